"""Type-II maximum likelihood over log-space hyperparameters.

The objective is the log marginal likelihood, optionally minus an L2 penalty
``lam * sum(log(lengthscale)^2)``, maximized by bounded Nelder-Mead from
several uniformly drawn starts in the log-space box (plus any explicit
starting points). A central-difference L-BFGS-B mode is available for larger
parameter vectors.

Also fits the "independent experts" baseline: one GP per partition interval,
trained and queried in isolation.
"""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import minimize

from .kernels import DomainError
from .linalg import LinAlgFailure
from .regression import Homoskedastic, Prediction, fit
from .string_kernel import DegeneracyError, Partition

__all__ = [
    "OptimizationFailed",
    "ConfigurationError",
    "Model",
    "SearchSpec",
    "RestartTrace",
    "FitResult",
    "default_bounds",
    "objective",
    "optimize",
    "fit_independent_experts",
    "IndependentExperts",
]

log = logging.getLogger(__name__)


class OptimizationFailed(RuntimeError):
    def __init__(self, message, traces=()):
        super().__init__(message)
        self.traces = list(traces)


class ConfigurationError(ValueError):
    pass


class Model:
    """A kernel plus noise model whose joint log-parameter vector is searched.

    Anything with ``param_names``, ``log_params`` and ``build(theta) ->
    (kernel, noise)`` can stand in for this class (e.g. to tie parameters).
    """

    def __init__(self, kernel, noise):
        self.kernel = kernel
        self.noise = noise
        self._split = kernel.log_params.size

    @property
    def param_names(self):
        return tuple(self.kernel.param_names) + tuple(self.noise.param_names)

    @property
    def log_params(self):
        return np.concatenate([self.kernel.log_params, self.noise.log_params])

    def build(self, theta):
        theta = np.asarray(theta, dtype=float)
        return (self.kernel.with_log_params(theta[:self._split]),
                self.noise.with_log_params(theta[self._split:]))


def _leaf(name):
    return name.rsplit(".", 1)[-1]


def _dim_of(name):
    head = name.split(".", 1)[0]
    if head.startswith("d") and head[1:].isdigit():
        return int(head[1:]) - 1
    return 0


def default_bounds(names, X, y):
    """Log-space box for each named hyperparameter, scaled to the data.

    Length scales span ``[0.01, 10] x`` the input range of their dimension;
    signal variances ``[1e-4, 10] x var(y)``; noise ``[1e-6, 1] x var(y)``.
    Periods run from twice the smallest input spacing to the input range and
    spectral frequencies from ``1/range`` to the Nyquist frequency.
    """
    X = np.asarray(X, dtype=float)
    X = X.reshape(len(X), -1)
    vy = float(np.var(y)) if np.size(y) > 1 and np.var(y) > 0 else 1.0
    lo, hi = [], []
    for name in names:
        col = X[:, min(_dim_of(name), X.shape[1] - 1)]
        span = float(np.ptp(col)) or 1.0
        u = np.unique(col)
        dmin = float(np.min(np.diff(u))) if u.size > 1 else span
        leaf = _leaf(name).split("_")[0]
        if leaf == "lengthscale":
            b = (0.01 * span, 10.0 * span)
        elif leaf in ("variance", "weight"):
            b = (1e-4 * vy, 10.0 * vy)
        elif leaf == "noise":
            b = (1e-6 * vy, vy)
        elif leaf == "period":
            b = (2.0 * dmin, span)
        elif leaf == "freq":
            b = (1.0 / span, 0.5 / dmin)
        elif leaf == "scale":
            b = (1e-3 / span, 0.5 / dmin)
        elif leaf == "alpha":
            b = (1e-2, 1e2)
        elif leaf == "offset":
            b = (1e-3, 1e3)
        else:
            b = (1e-4, 1e4)
        lo.append(np.log(b[0]))
        hi.append(np.log(b[1]))
    return np.array(lo), np.array(hi)


@dataclass
class SearchSpec:
    """Bounds are log-space; leave them ``None`` to use :func:`default_bounds`."""

    lower: np.ndarray = None
    upper: np.ndarray = None
    restarts: int = 5
    seed: int = 0
    max_evals: int = 2000
    penalty: float = 0.0
    initial: tuple = ()
    method: str = "nelder-mead"
    n_jobs: int = 1

    def resolved(self, names, X, y):
        lo, hi = self.lower, self.upper
        if lo is None or hi is None:
            dlo, dhi = default_bounds(names, X, y)
            lo = dlo if lo is None else lo
            hi = dhi if hi is None else hi
        lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
        if lo.shape != (len(names),) or hi.shape != (len(names),):
            raise ConfigurationError(f"bounds must have {len(names)} entries")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)) and np.all(lo < hi)):
            raise ConfigurationError("bounds must be finite with lower < upper")
        if self.restarts < 1 and not self.initial:
            raise ConfigurationError("need at least one start")
        return lo, hi


@dataclass
class RestartTrace:
    start: list
    end: list
    value: float
    n_evals: int
    n_clamped: int = 0
    label: str = "random"


@dataclass
class FitResult:
    names: tuple
    best: np.ndarray
    best_value: float
    traces: list = field(default_factory=list)

    @property
    def params(self):
        return dict(zip(self.names, np.exp(self.best)))

    def to_dict(self):
        return {
            "names": list(self.names),
            "best_log_params": [float(v) for v in self.best],
            "best_value": float(self.best_value),
            "traces": [asdict(t) for t in self.traces],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def objective(model, X, y, theta, penalty=0.0, names=None):
    """Penalized log marginal likelihood; ``-inf`` when the model cannot be fitted."""
    names = model.param_names if names is None else names
    try:
        kern, noise = model.build(theta)
        value = fit(kern, X, y, noise).log_marginal_likelihood()
    except (LinAlgFailure, DegeneracyError, DomainError, FloatingPointError, ValueError) as exc:
        log.debug("objective failed at %s: %s", theta, exc)
        return -np.inf
    if penalty:
        ls = np.array([t for n, t in zip(names, theta) if _leaf(n) == "lengthscale"])
        value -= penalty * float(np.sum(ls**2))
    return value if np.isfinite(value) else -np.inf


def _run_one(model, X, y, start, lo, hi, spec, names, label):
    counts = {"evals": 0, "clamped": 0}

    def neg(theta):
        clipped = np.clip(theta, lo, hi)
        if np.any(clipped != theta):
            counts["clamped"] += 1
        counts["evals"] += 1
        v = objective(model, X, y, clipped, spec.penalty, names)
        return -v if np.isfinite(v) else np.inf

    start = np.clip(np.asarray(start, dtype=float), lo, hi)
    bounds = list(zip(lo, hi))
    with np.errstate(all="ignore"):
        if spec.method == "nelder-mead":
            res = minimize(neg, start, method="Nelder-Mead", bounds=bounds,
                           options={"maxfev": spec.max_evals, "xatol": 1e-4, "fatol": 1e-6,
                                    "adaptive": len(start) > 4})
        elif spec.method == "fd-gradient":
            res = minimize(neg, start, method="L-BFGS-B", jac="3-point", bounds=bounds,
                           options={"maxfun": spec.max_evals})
        else:
            raise ConfigurationError(f"unknown optimizer {spec.method!r}")
    end = np.clip(res.x, lo, hi)
    value = -neg(end)
    counts["evals"] -= 1
    return RestartTrace(start.tolist(), end.tolist(), float(value), counts["evals"],
                        counts["clamped"], label)


def optimize(model, X, y, spec):
    """Maximize the (penalized) log marginal likelihood of ``model`` on ``(X, y)``."""
    names = tuple(model.param_names)
    lo, hi = spec.resolved(names, X, y)
    starts = [(np.asarray(s, dtype=float), "initial") for s in spec.initial]
    children = np.random.SeedSequence(spec.seed).spawn(spec.restarts)
    for child in children:
        rng = np.random.default_rng(child)
        starts.append((rng.uniform(lo, hi), "random"))

    def job(item):
        return _run_one(model, X, y, item[0], lo, hi, spec, names, item[1])

    if spec.n_jobs > 1:
        with ThreadPoolExecutor(spec.n_jobs) as pool:
            traces = list(pool.map(job, starts))
    else:
        traces = [job(s) for s in starts]
    finite = [t for t in traces if np.isfinite(t.value)]
    if not finite:
        raise OptimizationFailed("objective non-finite at every start", traces)
    # ties resolve to the earliest restart, so results are independent of completion order
    best = max(finite, key=lambda t: t.value)
    return FitResult(names, np.array(best.end), best.value, traces)


class IndependentExperts:
    """One independently trained GP per interval; test points go to their interval's expert."""

    def __init__(self, partition, posteriors, results):
        self.partition = partition
        self.posteriors = posteriors
        self.results = results

    def log_marginal_likelihood(self):
        return float(sum(p.log_marginal_likelihood() for p in self.posteriors))

    def predict(self, Xstar):
        Xs = np.ravel(np.asarray(Xstar, dtype=float))
        idx = self.partition.locate(Xs)
        mean = np.empty(Xs.size)
        lv = np.empty(Xs.size)
        pv = np.empty(Xs.size)
        nc = 0
        for k in np.unique(idx):
            sel = idx == k
            p = self.posteriors[k - 1].predict(Xs[sel])
            mean[sel], lv[sel], pv[sel] = p.mean, p.latent_var, p.predictive_var
            nc += p.n_clamped
        return Prediction(mean, lv, pv, n_clamped=nc)

    def predictive_log_likelihood(self, Xstar, ystar):
        ystar = np.ravel(np.asarray(ystar, dtype=float))
        p = self.predict(Xstar)
        v = p.predictive_var
        return float(np.sum(-0.5 * np.log(2 * np.pi * v) - 0.5 * (ystar - p.mean) ** 2 / v))


def fit_independent_experts(partition, base_kernel, X, y, spec, noise=None):
    """Train ``base_kernel`` (plus homoskedastic noise) separately on each interval."""
    partition = partition if isinstance(partition, Partition) else Partition(partition)
    X = np.ravel(np.asarray(X, dtype=float))
    y = np.ravel(np.asarray(y, dtype=float))
    idx = partition.locate(X)
    noise = Homoskedastic(max(float(np.var(y)) * 0.1, 1e-6)) if noise is None else noise
    posts, results = [], []
    for k in range(1, partition.n_strings + 1):
        sel = idx == k
        if sel.sum() < 2:
            raise ConfigurationError(f"interval {k} [{partition.boundaries[k - 1]:g}, "
                                     f"{partition.boundaries[k]:g}] has {sel.sum()} training points")
        model = Model(base_kernel, noise)
        sub = SearchSpec(restarts=spec.restarts, seed=spec.seed + k, max_evals=spec.max_evals,
                         penalty=spec.penalty, initial=spec.initial, method=spec.method,
                         lower=spec.lower, upper=spec.upper, n_jobs=spec.n_jobs)
        res = optimize(model, X[sel], y[sel], sub)
        kern, nz = model.build(res.best)
        posts.append(fit(kern, X[sel], y[sel], nz))
        results.append(res)
    return IndependentExperts(partition, posts, results)
