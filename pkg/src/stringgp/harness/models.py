"""Model recipes for experiments: build, initialize and train one model from a config entry.

A model entry is a dict such as::

    {"label": "String GP (6)", "kind": "string", "family": "matern32",
     "n_strings": 6, "noise": "per_string", "warm_start": "Vanilla GP"}

Kinds: ``gp`` (one kernel), ``string`` (string kernel), ``experts``
(independent GPs per interval), ``ard`` (product of base kernels) and
``alrd`` (product of string kernels).
"""

import time

import numpy as np
from scipy.signal import find_peaks, lombscargle

from ..hyperopt import ConfigurationError, Model, SearchSpec, fit_independent_experts, optimize
from ..kernels import FAMILIES, SpectralMixture
from ..multivariate import ProductKernel
from ..regression import Homoskedastic, PerString, fit
from ..string_kernel import Partition, StringKernel

__all__ = ["FAMILY_ALIASES", "FittedModel", "make_base", "partition_for", "fit_model", "peak_frequencies"]

FAMILY_ALIASES = {
    "se": "SquaredExponential",
    "rq": "RationalQuadratic",
    "matern32": "Matern32",
    "matern52": "Matern52",
    "periodic": "Periodic",
    "sm": "SpectralMixture",
    "poly2": "Polynomial2",
    "linear": "Linear",
}

KINDS = ("gp", "string", "experts", "ard", "alrd")


def family_class(name):
    key = FAMILY_ALIASES.get(str(name).lower(), name)
    if key not in FAMILIES:
        raise ConfigurationError(f"unknown kernel family {name!r}")
    return FAMILIES[key]


def peak_frequencies(x, y, n_peaks=1, fmin=None, fmax=None, n_grid=4000):
    """The ``n_peaks`` highest local maxima of the Lomb-Scargle periodogram (cycles per unit)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    span = float(np.ptp(x)) or 1.0
    u = np.unique(x)
    dmin = float(np.min(np.diff(u))) if u.size > 1 else span
    fmin = 1.0 / span if fmin is None else fmin
    fmax = 0.5 / dmin if fmax is None else fmax
    freqs = np.linspace(fmin, fmax, n_grid)
    power = lombscargle(x, y - y.mean(), 2 * np.pi * freqs)
    peaks, _ = find_peaks(power)
    if peaks.size == 0:
        peaks = np.array([int(np.argmax(power))])
    order = peaks[np.argsort(power[peaks])[::-1]]
    out = list(freqs[order[:n_peaks]])
    while len(out) < n_peaks:     # pad with harmonics of the strongest peak
        out.append(out[0] * (len(out) + 1))
    return np.array(out)


def make_base(entry, x, y):
    """A base kernel of ``entry["family"]`` initialized from data ``(x, y)`` (one coordinate)."""
    cls = family_class(entry["family"])
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    vy = float(np.var(y)) if y.size > 1 and np.var(y) > 0 else 1.0
    span = float(np.ptp(x)) or 1.0
    init = entry.get("init", "default")
    if cls is SpectralMixture:
        q = int(entry.get("n_components", 1))
        if init == "periodogram" and x.size > 2:
            mu = peak_frequencies(x, y, q)
        else:
            mu = np.arange(1, q + 1) / span
        return SpectralMixture.from_arrays(np.full(q, vy / q), np.full(q, 0.1 / span), mu)
    if cls.family == "Periodic":
        period = 1.0 / peak_frequencies(x, y, 1)[0] if init == "periodogram" and x.size > 2 else span / 4
        return cls(variance=vy, lengthscale=1.0, period=period)
    if cls.family == "Linear":
        return cls(variance=vy / max(float(np.mean(x * x)), 1e-12))
    params = {"variance": vy, "lengthscale": span * float(entry.get("lengthscale_frac", 0.1))}
    if cls.family == "RationalQuadratic":
        params["alpha"] = 1.0
    if cls.family == "Polynomial2":
        params = {"variance": vy / max(float(np.mean(x * x)) ** 2, 1e-12), "offset": 1.0}
    return cls(**params)


def partition_for(entry, domain, dim=None):
    """Boundaries from ``boundaries`` or an equal-width ``n_strings`` split of ``domain``.

    For product kernels (``dim`` given) either key may hold one entry per dimension.
    """
    b = entry.get("boundaries")
    n = entry.get("n_strings")
    if dim is not None:
        if b is not None and isinstance(b[0], (list, tuple)):
            b = b[dim]
        if isinstance(n, (list, tuple)):
            n = n[dim]
    if b is not None:
        return Partition(b)
    if n is None:
        raise ConfigurationError(f"model {entry.get('label')!r} needs boundaries or n_strings")
    lo, hi = domain
    return Partition(np.linspace(lo, hi, int(n) + 1))


class FittedModel:
    """A trained model plus the bookkeeping needed for metrics and reports."""

    def __init__(self, label, kind, predictor, results, kernel=None, noise=None, elapsed=0.0):
        self.label = label
        self.kind = kind
        self.predictor = predictor
        self.results = list(results)
        self.kernel = kernel
        self.noise = noise
        self.elapsed = elapsed

    @property
    def training_loglik(self):
        return self.predictor.log_marginal_likelihood()

    def predict(self, X):
        return self.predictor.predict(X)

    def predictive_loglik(self, X, y):
        return self.predictor.predictive_log_likelihood(X, y)

    @property
    def supports_gradient(self):
        return hasattr(self.predictor, "predict_gradient")

    def predict_gradient(self, X):
        return self.predictor.predict_gradient(X)

    def summary(self):
        # wall-clock time is logged, not reported, so reports stay byte-stable
        out = {"n_evals": int(sum(t.n_evals for r in self.results for t in r.traces))}
        if len(self.results) == 1:
            out["params"] = {k: float(v) for k, v in self.results[0].params.items()}
        return out


def _search(defaults, entry, seed):
    cfg = dict(defaults or {})
    cfg.update(entry.get("search", {}))
    return SearchSpec(restarts=int(cfg.get("restarts", 2)), seed=int(seed),
                      max_evals=int(cfg.get("max_evals", 2000)),
                      penalty=float(entry.get("penalty", cfg.get("penalty", 0.0))),
                      method=cfg.get("method", "nelder-mead"),
                      n_jobs=int(cfg.get("n_jobs", 1)))


def _noise_init(entry, y):
    vy = float(np.var(y)) if np.size(y) > 1 and np.var(y) > 0 else 1.0
    return vy * float(entry.get("noise_init", 0.1))


def _warm_theta(entry, model, fitted):
    """Tie the hyperparameters of a fitted single-kernel model across this model's strings."""
    src = fitted.get(entry.get("warm_start")) if entry.get("warm_start") else None
    if src is None:
        if entry.get("warm_start"):
            raise ConfigurationError(f"warm_start {entry['warm_start']!r} must be fitted earlier")
        return None
    kt = src.kernel.log_params
    nt = src.noise.log_params
    if entry["kind"] == "experts":
        return np.concatenate([kt, nt])
    kern = model.kernel
    if isinstance(kern, StringKernel):
        theta_k = np.tile(kt, kern.partition.n_strings)
    elif isinstance(kern, ProductKernel) and isinstance(src.kernel, ProductKernel):
        parts, i = [], 0
        for f_src, f_dst in zip(src.kernel.factors, kern.factors):
            n = f_src.log_params.size
            reps = f_dst.partition.n_strings if isinstance(f_dst, StringKernel) else 1
            parts.append(np.tile(kt[i:i + n], reps))
            i += n
        theta_k = np.concatenate(parts)
    else:
        theta_k = kt
    n_noise = len(model.noise.param_names)
    return np.concatenate([theta_k, np.repeat(nt[:1], n_noise)])


def fit_model(entry, X, y, domain, seed, search_defaults=None, fitted=None):
    """Train the model described by ``entry`` on ``(X, y)``.

    ``domain`` is the input range (``(lo, hi)`` or a list of those per
    dimension) used to place equal-width partitions; ``fitted`` maps labels of
    models already trained on the same data, for warm starts.
    """
    fitted = fitted or {}
    kind = entry.get("kind", "gp")
    if kind not in KINDS:
        raise ConfigurationError(f"unknown model kind {kind!r}; expected one of {KINDS}")
    label = entry.get("label", kind)
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    spec = _search(search_defaults, entry, seed)
    t0 = time.perf_counter()

    if kind == "experts":
        part = partition_for(entry, domain)
        base = make_base(entry, X, y)
        warm = _warm_theta(entry, None, fitted)
        if warm is not None:
            base = base.with_log_params(warm[:-1])
            spec.initial = (warm,)
        ex = fit_independent_experts(part, base, X, y, spec, noise=Homoskedastic(_noise_init(entry, y)))
        return FittedModel(label, kind, ex, ex.results, elapsed=time.perf_counter() - t0)

    if kind in ("gp", "string"):
        if X.ndim != 1:
            raise ConfigurationError(f"{kind} models take 1-D inputs; use ard/alrd for {X.shape[1]}-D")
        if kind == "gp":
            kernel = make_base(entry, X, y)
        else:
            part = partition_for(entry, domain)
            idx = part.locate(X)
            kernels = []
            for k in range(1, part.n_strings + 1):
                sel = idx == k
                xs, ys = (X[sel], y[sel]) if sel.sum() > 2 else (X, y)
                kernels.append(make_base(entry, xs, ys))
            kernel = StringKernel(part.boundaries, kernels)
    else:
        if X.ndim != 2:
            raise ConfigurationError(f"{kind} models take 2-D input arrays")
        doms = domain if np.ndim(domain) == 2 else [domain] * X.shape[1]
        factors = []
        for j in range(X.shape[1]):
            base = make_base(entry, X[:, j], y)
            if kind == "alrd":
                part = partition_for(entry, doms[j], dim=j)
                base = StringKernel(part.boundaries, [base] * part.n_strings)
            factors.append(base)
        # split the signal variance evenly over the factors
        kernel = ProductKernel(factors)
        theta = kernel.log_params.copy()
        names = kernel.param_names
        vy = float(np.var(y)) or 1.0
        for i, n in enumerate(names):
            if n.rsplit(".", 1)[-1] == "variance":
                theta[i] = np.log(vy) / X.shape[1]
        kernel = kernel.with_log_params(theta)

    if entry.get("noise", "homoskedastic") == "per_string":
        if kind != "string":
            raise ConfigurationError("per_string noise needs a string kernel")
        noise = PerString(kernel.partition, np.full(kernel.partition.n_strings, _noise_init(entry, y)))
    else:
        noise = Homoskedastic(_noise_init(entry, y))
    model = Model(kernel, noise)
    starts = [model.log_params]
    warm = _warm_theta(entry, model, fitted)
    if warm is not None:
        starts = [warm]
    spec.initial = tuple(starts)
    res = optimize(model, X, y, spec)
    k, nz = model.build(res.best)
    post = fit(k, X, y, nz)
    return FittedModel(label, kind, post, [res], k, nz, time.perf_counter() - t0)
