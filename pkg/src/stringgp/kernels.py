"""Univariate base kernels with analytic first and second cross-derivatives.

Every kernel exposes ``k(x, y)``, ``dk/dx``, ``dk/dy`` and ``d2k/dxdy`` as
broadcasting numpy functions, which is all a derivative Gaussian process
(the joint law of a GP and its mean-square derivative) needs. The 2x2 block
at ``(u, v)`` is laid out as::

    [[k(u, v),      dk/dy(u, v)    ],
     [dk/dx(u, v),  d2k/dxdy(u, v) ]]

i.e. ``[[cov(z_u, z_v), cov(z_u, z'_v)], [cov(z'_u, z_v), cov(z'_u, z'_v)]]``.

Hyperparameters are strictly positive and held internally as logarithms so
optimizers can work in unconstrained coordinates.
"""

import enum
from dataclasses import dataclass

import numpy as np

from .linalg import rcond

__all__ = [
    "DomainError",
    "CapabilityError",
    "DerivativeKernel",
    "SquaredExponential",
    "RationalQuadratic",
    "Matern32",
    "Matern52",
    "Periodic",
    "SpectralMixture",
    "Polynomial2",
    "Linear",
    "Degeneracy",
    "DegeneracyReport",
    "check_degeneracy",
    "kernel_from_spec",
    "FAMILIES",
    "DEFAULT_RCOND_THRESHOLD",
]

DEFAULT_RCOND_THRESHOLD = 1e-8


class DomainError(ValueError):
    """Input outside the domain a kernel (or string partition) accepts."""


class CapabilityError(TypeError):
    """The kernel does not provide what the requested computation needs."""


def _as_finite(x, name="input"):
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise DomainError(f"non-finite {name}")
    return x


class DerivativeKernel:
    """Base class: a kernel family plus its (log-space) hyperparameters.

    Subclasses set ``family`` and ``param_names`` and implement
    :meth:`_derivs`, returning ``(k, dk/dx, dk/dy, d2k/dxdy)`` for already
    broadcast float arrays. Instances are immutable.
    """

    family = None
    param_names = ()
    ndim = 1

    def __init__(self, **params):
        missing = set(self.param_names) - set(params)
        extra = set(params) - set(self.param_names)
        if missing or extra:
            raise TypeError(
                f"{type(self).__name__} expects parameters {self.param_names}; "
                f"missing {sorted(missing)}, unexpected {sorted(extra)}")
        values = np.array([params[n] for n in self.param_names], dtype=float)
        if not np.all(np.isfinite(values)) or np.any(values <= 0):
            raise ValueError(f"{type(self).__name__} hyperparameters must be finite and > 0: {params}")
        self._log_params = np.log(values)
        self._log_params.setflags(write=False)

    # -- hyperparameters -------------------------------------------------
    @property
    def log_params(self):
        return self._log_params

    @property
    def params(self):
        return dict(zip(self.param_names, np.exp(self._log_params)))

    def with_log_params(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.shape != self._log_params.shape:
            raise ValueError(f"expected {self._log_params.size} log-parameters, got {theta.shape}")
        if not np.all(np.isfinite(theta)):
            raise ValueError("non-finite log-parameters")
        new = object.__new__(type(self))
        new.__dict__.update(self.__dict__)
        new._log_params = theta.copy()
        new._log_params.setflags(write=False)
        return new

    def __getattr__(self, name):
        # natural-space access to hyperparameters, e.g. kern.lengthscale
        names = type(self).param_names
        if name in names:
            return float(np.exp(self._log_params[names.index(name)]))
        raise AttributeError(name)

    def __repr__(self):
        inner = ", ".join(f"{k}={v:.6g}" for k, v in self.params.items())
        return f"{type(self).__name__}({inner})"

    def to_spec(self):
        return {"family": self.family, "params": {k: float(v) for k, v in self.params.items()}}

    # -- evaluation ------------------------------------------------------
    def _derivs(self, x, y):
        raise NotImplementedError

    def derivs(self, x, y):
        """``(k, dk/dx, dk/dy, d2k/dxdy)`` at broadcast ``x``, ``y``."""
        x, y = np.broadcast_arrays(_as_finite(x), _as_finite(y))
        return self._derivs(x, y)

    def eval(self, x, y):
        return self.derivs(x, y)[0]

    __call__ = eval

    def eval_block(self, u, v):
        """The 2x2 derivative block at scalar ``(u, v)``."""
        k, kx, ky, kxy = (float(a) for a in self.derivs(u, v))
        return np.array([[k, ky], [kx, kxy]])

    def blocks(self, X, Y=None):
        """Pairwise ``(k, dk/dx, dk/dy, d2k/dxdy)`` matrices, each ``len(X) x len(Y)``."""
        X = np.ravel(_as_finite(X))
        Y = X if Y is None else np.ravel(_as_finite(Y))
        return self._derivs(*np.broadcast_arrays(X[:, None], Y[None, :]))

    def gram(self, X, Y=None):
        X = np.ravel(_as_finite(X))
        Y = X if Y is None else np.ravel(_as_finite(Y))
        return self._derivs(*np.broadcast_arrays(X[:, None], Y[None, :]))[0]

    def diag(self, X):
        X = np.ravel(_as_finite(X))
        return self._derivs(X, X)[0]

    def derivative_diag(self, X):
        """``d2k/dxdy(x, x)``: prior variance of the derivative process."""
        X = np.ravel(_as_finite(X))
        return self._derivs(X, X)[3]


class Stationary(DerivativeKernel):
    """Kernels of the lag ``r = x - y``: ``k = f(r)``.

    Then ``dk/dx = f'(r)``, ``dk/dy = -f'(r)`` and ``d2k/dxdy = -f''(r)``.
    """

    def _profile(self, r):
        """Return ``(f, f', f'')`` at lag ``r``."""
        raise NotImplementedError

    def _derivs(self, x, y):
        f, f1, f2 = self._profile(x - y)
        return f, f1, -f1, -f2


class SquaredExponential(Stationary):
    family = "SquaredExponential"
    param_names = ("variance", "lengthscale")

    def _profile(self, r):
        s2, ell = np.exp(self._log_params)
        il2 = 1.0 / ell**2
        f = s2 * np.exp(-0.5 * r * r * il2)
        return f, -r * il2 * f, (r * r * il2 - 1.0) * il2 * f


class RationalQuadratic(Stationary):
    family = "RationalQuadratic"
    param_names = ("variance", "lengthscale", "alpha")

    def _profile(self, r):
        s2, ell, alpha = np.exp(self._log_params)
        il2 = 1.0 / ell**2
        base = 1.0 + 0.5 * r * r * il2 / alpha
        f = s2 * base**-alpha
        g = s2 * base ** (-alpha - 1.0)
        f1 = -r * il2 * g
        f2 = -il2 * g + (alpha + 1.0) / alpha * (r * il2) ** 2 * g / base
        return f, f1, f2


class Matern32(Stationary):
    """Matern 3/2. Only C^2 jointly, which is enough for the 2x2 blocks."""

    family = "Matern32"
    param_names = ("variance", "lengthscale")

    def _profile(self, r):
        s2, ell = np.exp(self._log_params)
        a = np.sqrt(3.0) / ell
        ar = a * np.abs(r)
        e = s2 * np.exp(-ar)
        return (1.0 + ar) * e, -a * a * r * e, -a * a * (1.0 - ar) * e


class Matern52(Stationary):
    family = "Matern52"
    param_names = ("variance", "lengthscale")

    def _profile(self, r):
        s2, ell = np.exp(self._log_params)
        a = np.sqrt(5.0) / ell
        ar = a * np.abs(r)
        e = s2 * np.exp(-ar)
        c = a * a / 3.0
        return (1.0 + ar + ar * ar / 3.0) * e, -c * r * (1.0 + ar) * e, -c * (1.0 + ar - ar * ar) * e


class Periodic(Stationary):
    """MacKay's periodic kernel ``s2 * exp(-2 sin^2(pi r / T) / l^2)``."""

    family = "Periodic"
    param_names = ("variance", "lengthscale", "period")

    def _profile(self, r):
        s2, ell, T = np.exp(self._log_params)
        w = 2.0 * np.pi / T
        il2 = 1.0 / ell**2
        # sin^2(pi r / T) = (1 - cos(w r)) / 2
        g = 0.5 * (1.0 - np.cos(w * r))
        g1 = 0.5 * w * np.sin(w * r)
        g2 = 0.5 * w * w * np.cos(w * r)
        f = s2 * np.exp(-2.0 * il2 * g)
        f1 = -2.0 * il2 * g1 * f
        f2 = (-2.0 * il2 * g2 + 4.0 * il2**2 * g1 * g1) * f
        return f, f1, f2


class SpectralMixture(Stationary):
    """Spectral mixture ``sum_a w_a exp(-2 pi^2 r^2 s_a^2) cos(2 pi r mu_a)``.

    Parameters are passed as ``weight_i``, ``scale_i``, ``freq_i`` for
    ``i in range(n_components)``, or built with :meth:`from_arrays`.
    """

    family = "SpectralMixture"

    def __init__(self, n_components=1, **params):
        if n_components < 1:
            raise ValueError("n_components must be >= 1")
        self.n_components = int(n_components)
        self.param_names = tuple(
            f"{p}_{i}" for i in range(self.n_components) for p in ("weight", "scale", "freq"))
        super().__init__(**params)

    @classmethod
    def from_arrays(cls, weights, scales, freqs):
        weights, scales, freqs = (np.atleast_1d(np.asarray(a, dtype=float)) for a in (weights, scales, freqs))
        params = {}
        for i, (w, s, m) in enumerate(zip(weights, scales, freqs)):
            params.update({f"weight_{i}": w, f"scale_{i}": s, f"freq_{i}": m})
        return cls(n_components=len(weights), **params)

    def __getattr__(self, name):
        if name == "param_names":
            raise AttributeError(name)
        if name in self.param_names:
            return float(np.exp(self._log_params[self.param_names.index(name)]))
        raise AttributeError(name)

    def to_spec(self):
        spec = super().to_spec()
        spec["n_components"] = self.n_components
        return spec

    def _profile(self, r):
        p = np.exp(self._log_params).reshape(self.n_components, 3)
        f = np.zeros_like(r)
        f1 = np.zeros_like(r)
        f2 = np.zeros_like(r)
        for w, s, mu in p:
            c2 = 2.0 * np.pi**2 * s * s
            om = 2.0 * np.pi * mu
            e = w * np.exp(-c2 * r * r)
            co, si = np.cos(om * r), np.sin(om * r)
            e1 = -2.0 * c2 * r * e
            e2 = (4.0 * c2 * c2 * r * r - 2.0 * c2) * e
            f += e * co
            f1 += e1 * co - om * e * si
            f2 += e2 * co - 2.0 * om * e1 * si - om * om * e * co
        return f, f1, f2


class Polynomial2(DerivativeKernel):
    """Second order polynomial kernel ``s2 * (x y + c)^2``."""

    family = "Polynomial2"
    param_names = ("variance", "offset")

    def _derivs(self, x, y):
        s2, c = np.exp(self._log_params)
        q = x * y + c
        return s2 * q * q, 2.0 * s2 * q * y, 2.0 * s2 * q * x, 2.0 * s2 * (2.0 * x * y + c)


class Linear(DerivativeKernel):
    """Linear kernel ``s2 * (x - c)(y - c)`` with a fixed (not learned) offset ``c``.

    Degenerate everywhere: value and slope of a path are perfectly
    correlated. Kept mostly as a degeneracy-detection fixture.
    """

    family = "Linear"
    param_names = ("variance",)

    def __init__(self, variance, offset=0.0):
        self.offset = float(offset)
        super().__init__(variance=variance)

    def to_spec(self):
        spec = super().to_spec()
        spec["offset"] = self.offset
        return spec

    def _derivs(self, x, y):
        s2 = float(np.exp(self._log_params[0]))
        xc, yc = x - self.offset, y - self.offset
        return s2 * xc * yc, s2 * yc, s2 * xc, np.full_like(xc, s2)


FAMILIES = {
    cls.family: cls
    for cls in (SquaredExponential, RationalQuadratic, Matern32, Matern52, Periodic,
                SpectralMixture, Polynomial2, Linear)
}


def kernel_from_spec(spec):
    """Build a base kernel from ``{"family": ..., "params": {...}}`` (natural-space values)."""
    try:
        cls = FAMILIES[spec["family"]]
    except KeyError:
        raise ValueError(f"unknown kernel family {spec.get('family')!r}") from None
    params = dict(spec.get("params", {}))
    if cls is SpectralMixture:
        n = spec.get("n_components", len([k for k in params if k.startswith("weight_")]) or 1)
        return SpectralMixture(n_components=n, **params)
    if cls is Linear:
        if "variance" not in params:
            raise ValueError("Linear kernel spec needs params.variance")
        return Linear(params["variance"], offset=spec.get("offset", 0.0))
    return cls(**params)


# -- degeneracy -------------------------------------------------------------

class Degeneracy(enum.Enum):
    NON_DEGENERATE = "NonDegenerate"
    DEGENERATE_AT_A = "DegenerateAtA"
    DEGENERATE_AT_B_GIVEN_A = "DegenerateAtBGivenA"


@dataclass(frozen=True)
class DegeneracyReport:
    status: Degeneracy
    rcond_a: float
    rcond_b_given_a: float

    @property
    def ok(self):
        return self.status is Degeneracy.NON_DEGENERATE


def check_degeneracy(kernel, a, b, rcond_threshold=DEFAULT_RCOND_THRESHOLD):
    """Classify whether ``kernel`` can be conditioned on boundary pairs at ``a`` and ``b``.

    ``rcond_a`` is the reciprocal condition number of the 2x2 block at
    ``(a, a)``. ``rcond_b_given_a`` is the smallest singular value of the
    Schur complement ``K_bb - K_ba K_aa^-1 K_ab`` divided by the largest
    singular value of ``K_bb``, so an exactly vanishing conditional
    covariance reads as 0 rather than as a well-conditioned round-off matrix.
    """
    if a == b:
        raise ValueError("a and b must differ")
    Kaa = kernel.eval_block(a, a)
    ra = rcond(Kaa)
    if ra <= rcond_threshold:
        return DegeneracyReport(Degeneracy.DEGENERATE_AT_A, ra, float("nan"))
    Kab = kernel.eval_block(a, b)
    Kbb = kernel.eval_block(b, b)
    S = Kbb - Kab.T @ np.linalg.solve(Kaa, Kab)
    S = 0.5 * (S + S.T)
    sb = np.linalg.svd(Kbb, compute_uv=False)[0]
    rb = float(max(np.linalg.eigvalsh(S)[0], 0.0) / sb) if sb > 0 else 0.0
    status = Degeneracy.NON_DEGENERATE if rb > rcond_threshold else Degeneracy.DEGENERATE_AT_B_GIVEN_A
    return DegeneracyReport(status, ra, rb)
