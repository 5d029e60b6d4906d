"""Exact Gaussian process regression for any kernel with a Gram interface.

A kernel here is anything exposing ``gram(X, Y=None)`` and ``diag(X)``.
Gradient prediction additionally needs cross-derivative blocks: univariate
kernels provide ``blocks(X, Y)``; product kernels provide
``gradient_grams(X, Y)`` and ``hessian_diag(X)``.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .kernels import CapabilityError
from .linalg import LinAlgFailure, cho_solve, jitchol, logdet_chol
from .string_kernel import Partition

__all__ = [
    "IllConditionedError",
    "CapabilityError",
    "Homoskedastic",
    "PerString",
    "Posterior",
    "Prediction",
    "fit",
    "predict",
    "predict_gradient",
    "log_marginal_likelihood",
    "predictive_log_likelihood",
]

LOG_2PI = np.log(2.0 * np.pi)


class IllConditionedError(np.linalg.LinAlgError):
    """Training covariance could not be factorized under the jitter policy."""


class Homoskedastic:
    param_names = ("noise",)

    def __init__(self, variance):
        if not np.isfinite(variance) or variance <= 0:
            raise ValueError(f"noise variance must be > 0, got {variance}")
        self.variance = float(variance)

    @property
    def log_params(self):
        return np.array([np.log(self.variance)])

    def with_log_params(self, theta):
        return Homoskedastic(float(np.exp(np.asarray(theta).ravel()[0])))

    def variances(self, X):
        return np.full(len(X), self.variance)

    def __repr__(self):
        return f"Homoskedastic({self.variance:.6g})"


class PerString:
    """Noise variance constant within each string interval of ``partition``.

    A point on an interior boundary takes the variance of the string on its
    left, as in :func:`~stringgp.string_kernel.locate_string`.
    """

    def __init__(self, partition, variances):
        self.partition = partition if isinstance(partition, Partition) else Partition(partition)
        v = np.asarray(variances, dtype=float).ravel()
        if v.size != self.partition.n_strings:
            raise ValueError(f"need {self.partition.n_strings} variances, got {v.size}")
        if not np.all(np.isfinite(v)) or np.any(v <= 0):
            raise ValueError("noise variances must be > 0")
        self.string_variances = v

    @property
    def param_names(self):
        return tuple(f"noise.s{k + 1}" for k in range(self.partition.n_strings))

    @property
    def log_params(self):
        return np.log(self.string_variances)

    def with_log_params(self, theta):
        return PerString(self.partition, np.exp(np.asarray(theta, dtype=float)))

    def variances(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 2:
            X = X[:, 0]
        return self.string_variances[self.partition.locate(X) - 1]

    def __repr__(self):
        return f"PerString({self.partition.boundaries.tolist()}, {self.string_variances.tolist()})"


def _as_inputs(X, ndim):
    X = np.asarray(X, dtype=float)
    if ndim == 1:
        X = X.reshape(-1)
    else:
        X = X.reshape(-1, ndim)
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite inputs")
    return X


def _prior_mean(kernel, X):
    if hasattr(kernel, "mean"):
        return kernel.mean(X)
    return np.zeros(len(X)), np.zeros(len(X))


@dataclass
class Prediction:
    mean: np.ndarray
    latent_var: np.ndarray
    predictive_var: np.ndarray
    grad_mean: np.ndarray = None     # (m, d)
    grad_var: np.ndarray = None      # (m, d)
    n_clamped: int = 0

    @property
    def latent_std(self):
        return np.sqrt(self.latent_var)

    @property
    def predictive_std(self):
        return np.sqrt(self.predictive_var)


@dataclass(frozen=True)
class Posterior:
    kernel: object
    noise: object
    X: np.ndarray
    y: np.ndarray
    chol: np.ndarray
    alpha: np.ndarray
    noise_diag: np.ndarray
    jitter: float = 0.0
    prior_mean: np.ndarray = field(default=None, repr=False)

    @property
    def n(self):
        return self.y.size

    def predict(self, Xstar, full_cov=False):
        return predict(self, Xstar, full_cov)

    def predict_gradient(self, Xstar):
        return predict_gradient(self, Xstar)

    def log_marginal_likelihood(self):
        return log_marginal_likelihood(self)

    def predictive_log_likelihood(self, Xstar, ystar):
        return predictive_log_likelihood(self, Xstar, ystar)


def fit(kernel, X, y, noise):
    """Condition a zero- (or kernel-) mean GP on noisy observations ``y`` at ``X``."""
    X = _as_inputs(X, getattr(kernel, "ndim", 1))
    y = np.asarray(y, dtype=float).ravel()
    if len(X) != y.size or y.size < 1:
        raise ValueError(f"X has {len(X)} rows but y has {y.size} values")
    if not np.all(np.isfinite(y)):
        raise ValueError("non-finite targets")
    nd = noise.variances(X)
    K = kernel.gram(X)
    K[np.diag_indices_from(K)] += nd
    try:
        L, jit = jitchol(K)
    except LinAlgFailure as exc:
        raise IllConditionedError(f"training covariance not factorizable: {exc}") from exc
    m0 = _prior_mean(kernel, X)[0]
    alpha = cho_solve(L, y - m0)
    return Posterior(kernel, noise, X, y, L, alpha, nd, jit, m0)


def _clamp(var):
    bad = var < 0
    return np.where(bad, 0.0, var), int(bad.sum())


def predict(post, Xstar, full_cov=False):
    """Posterior latent mean/variance and noisy predictive variance at ``Xstar``.

    With ``full_cov`` the latent covariance matrix is returned in ``latent_var``.
    """
    Xs = _as_inputs(Xstar, getattr(post.kernel, "ndim", 1))
    Ks = post.kernel.gram(post.X, Xs)
    mean = _prior_mean(post.kernel, Xs)[0] + Ks.T @ post.alpha
    V = solve_triangular(post.chol, Ks, lower=True, check_finite=False)
    noise_s = post.noise.variances(Xs)
    if full_cov:
        cov = post.kernel.gram(Xs) - V.T @ V
        var, nc = _clamp(np.diag(cov).copy())
        return Prediction(mean, cov, var + noise_s, n_clamped=nc)
    var, nc = _clamp(post.kernel.diag(Xs) - np.sum(V * V, axis=0))
    return Prediction(mean, var, var + noise_s, n_clamped=nc)


def _gradient_parts(kernel, X, Xs):
    """``G[j] = cov(f(X), df/dx_j(Xs))`` (d, n, m) and prior var of ``df/dx_j(Xs)`` (d, m)."""
    if hasattr(kernel, "gradient_grams"):
        G = kernel.gradient_grams(X, Xs)
        H = kernel.hessian_diag(Xs)
        return G, H
    if not hasattr(kernel, "blocks"):
        raise CapabilityError(f"{type(kernel).__name__} exposes no cross-derivative blocks")
    ky = kernel.blocks(X, Xs)[2]
    return ky[None], kernel.derivative_diag(Xs)[None]


def predict_gradient(post, Xstar):
    """Prediction with ``grad_mean``/``grad_var`` (shape ``(m, d)``) filled in."""
    pred = predict(post, Xstar)
    Xs = _as_inputs(Xstar, getattr(post.kernel, "ndim", 1))
    G, H = _gradient_parts(post.kernel, post.X, Xs)
    d = G.shape[0]
    gm = np.empty((len(Xs), d))
    gv = np.empty((len(Xs), d))
    nc = pred.n_clamped
    dm = _prior_mean(post.kernel, Xs)[1]
    for j in range(d):
        gm[:, j] = G[j].T @ post.alpha + (dm if d == 1 else 0.0)
        W = solve_triangular(post.chol, G[j], lower=True, check_finite=False)
        v, c = _clamp(H[j] - np.sum(W * W, axis=0))
        gv[:, j] = v
        nc += c
    pred.grad_mean, pred.grad_var, pred.n_clamped = gm, gv, nc
    return pred


def log_marginal_likelihood(post):
    r = post.y - post.prior_mean
    return float(-0.5 * r @ post.alpha - 0.5 * logdet_chol(post.chol) - 0.5 * post.n * LOG_2PI)


def predictive_log_likelihood(post, Xstar, ystar):
    """Sum over test points of the marginal predictive log density of ``ystar``."""
    ystar = np.asarray(ystar, dtype=float).ravel()
    pred = predict(post, Xstar)
    v = pred.predictive_var
    return float(np.sum(-0.5 * (LOG_2PI + np.log(v)) - 0.5 * (ystar - pred.mean) ** 2 / v))
