"""String GP kernels: local experts on a partition, chained by shared boundary conditions.

A string kernel is specified by boundary times ``a_0 < ... < a_K`` and one
base :class:`~stringgp.kernels.DerivativeKernel` per interval. Its
covariance is assembled in two passes:

1. the joint covariance of the boundary pairs ``(z_{a_k}, z'_{a_k})`` is
   built by a forward recursion (:func:`build_boundary_moments`);
2. any pair of times is then handled by conditioning each string on its two
   boundary pairs and averaging over the boundary law (:func:`cov_block`).

Points lying exactly on an interior boundary are assigned to the string on
their left. Because a boundary time is itself conditioned on, the result does
not depend on that choice.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .kernels import DEFAULT_RCOND_THRESHOLD, DomainError, check_degeneracy, kernel_from_spec
from .linalg import MIN_RCOND, LinAlgFailure, cho_solve, jitchol, psd_pinv

__all__ = [
    "DegeneracyError",
    "Partition",
    "StringKernel",
    "BoundaryMoments",
    "locate_string",
    "build_boundary_moments",
    "cov_block",
    "gram",
    "zero_mean",
]


class DegeneracyError(np.linalg.LinAlgError):
    """A string's base kernel cannot be conditioned on its boundary pairs."""

    def __init__(self, message, string_index=None):
        super().__init__(message)
        self.string_index = string_index


class Partition:
    """Strictly increasing boundary times ``a_0 < a_1 < ... < a_K`` (K >= 1)."""

    def __init__(self, boundaries):
        a = np.asarray(boundaries, dtype=float).ravel()
        if a.size < 2:
            raise ValueError("a partition needs at least two boundary times")
        if not np.all(np.isfinite(a)) or np.any(np.diff(a) <= 0):
            raise ValueError(f"boundary times must be finite and strictly increasing: {a}")
        a.setflags(write=False)
        self.boundaries = a

    @property
    def n_strings(self):
        return self.boundaries.size - 1

    @property
    def lower(self):
        return float(self.boundaries[0])

    @property
    def upper(self):
        return float(self.boundaries[-1])

    def locate(self, t):
        """1-based string index of each time in ``t`` (vectorized :func:`locate_string`)."""
        t = np.asarray(t, dtype=float)
        if not np.all(np.isfinite(t)):
            raise DomainError("non-finite time")
        if np.any(t < self.lower) or np.any(t > self.upper):
            bad = t[(t < self.lower) | (t > self.upper)]
            raise DomainError(f"times {bad[:5]} outside [{self.lower}, {self.upper}]")
        return np.maximum(np.searchsorted(self.boundaries, t, side="left"), 1)

    def __eq__(self, other):
        return isinstance(other, Partition) and np.array_equal(self.boundaries, other.boundaries)

    def __hash__(self):
        return hash(self.boundaries.tobytes())

    def __repr__(self):
        return f"Partition({self.boundaries.tolist()})"


def locate_string(partition, t):
    """Index ``k`` in ``1..K`` with ``a_{k-1} <= t <= a_k``; interior ties go left."""
    return int(partition.locate(float(t)))


def zero_mean(t):
    t = np.asarray(t, dtype=float)
    return np.zeros_like(t), np.zeros_like(t)


@dataclass(frozen=True)
class BoundaryMoments:
    """Joint covariance of all boundary pairs, plus the recursion's ingredients.

    ``joint`` is ``2(K+1) x 2(K+1)``, ordered ``(z_{a_0}, z'_{a_0}, z_{a_1}, ...)``.
    ``propagators[k]`` and ``innovations[k]`` (k = 1..K; index 0 unused) are the
    matrices ``M_k = kK(a_k, a_{k-1}) kK(a_{k-1}, a_{k-1})^-1`` and
    ``Sigma_k = kK(a_k, a_k) - M_k kK(a_{k-1}, a_k)``.
    """

    joint: np.ndarray
    propagators: tuple
    innovations: tuple

    def block(self, k, l):
        """The 2x2 covariance between boundary pairs at ``a_k`` and ``a_l``."""
        return self.joint[2 * k:2 * k + 2, 2 * l:2 * l + 2]

    @property
    def n_strings(self):
        return self.joint.shape[0] // 2 - 1


def _sym2_rcond(A):
    """Reciprocal condition number of a symmetric 2x2 matrix, in closed form."""
    a, b, d = A[0, 0], A[0, 1], A[1, 1]
    half_tr = 0.5 * (a + d)
    rad = np.hypot(0.5 * (a - d), b)
    hi, lo = abs(half_tr) + rad, abs(abs(half_tr) - rad)
    if not np.isfinite(hi) or hi <= 0:
        return 0.0
    return float(lo / hi)


def _solve_2x2(A, B, string_index):
    """``A^-1 B`` for a symmetric positive definite 2x2 ``A``, jittered only if needed."""
    if _sym2_rcond(A) > MIN_RCOND:
        det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
        inv = np.array([[A[1, 1], -A[0, 1]], [-A[1, 0], A[0, 0]]]) / det
        return inv @ B
    try:
        L, _ = jitchol(A, check_rcond=True)
    except LinAlgFailure as exc:
        raise DegeneracyError(f"string {string_index}: boundary block not invertible ({exc})",
                              string_index) from exc
    return cho_solve(L, B)


def build_boundary_moments(sk, rcond_threshold=None):
    """Covariance of the boundary conditions by the forward Gaussian-message recursion."""
    thr = sk.rcond_threshold if rcond_threshold is None else rcond_threshold
    a = sk.partition.boundaries
    K = sk.partition.n_strings
    B = np.zeros((2 * (K + 1), 2 * (K + 1)))
    props = [None]
    innov = [None]
    for k in range(1, K + 1):
        A = sk._boundary_blocks[k - 1]
        Kpp, Kcp, Kcc = A[:2, :2], A[2:, :2], A[2:, 2:]
        if _sym2_rcond(Kpp) <= thr:
            raise DegeneracyError(
                f"string {k}: kernel {sk.kernels[k - 1]!r} is degenerate at a_{k - 1} = {a[k - 1]:g}", k)
        # M = Kcp Kpp^-1  <=>  M^T = Kpp^-1 Kcp^T  (Kpp symmetric)
        M = _solve_2x2(Kpp, Kcp.T, k).T
        S = Kcc - M @ Kcp.T
        S = 0.5 * (S + S.T)
        props.append(M)
        innov.append(S)
        c = slice(2 * k, 2 * k + 2)
        p = slice(2 * k - 2, 2 * k)
        if k == 1:
            B[:4, :4] = A
            continue
        # rows for a_k against every earlier boundary
        B[c, :2 * k] = M @ B[p, :2 * k]
        B[:2 * k, c] = B[c, :2 * k].T
        Bcc = S + M @ B[p, p] @ M.T
        B[c, c] = 0.5 * (Bcc + Bcc.T)
    B.setflags(write=False)
    return BoundaryMoments(B, tuple(props), tuple(innov))


class StringKernel:
    """Covariance of a string GP together with its derivative process.

    Parameters
    ----------
    boundaries : sequence of float or Partition
        Boundary times ``a_0 < ... < a_K``.
    kernels : sequence of DerivativeKernel
        One base kernel per string (length ``K``).
    means : sequence of callable, optional
        Per-string prior means ``m(t) -> (value, derivative)``. They only
        enter sampling and posterior means; the covariance ignores them.
    """

    ndim = 1

    def __init__(self, boundaries, kernels, means=None, rcond_threshold=DEFAULT_RCOND_THRESHOLD):
        self.partition = boundaries if isinstance(boundaries, Partition) else Partition(boundaries)
        self.kernels = tuple(kernels)
        if len(self.kernels) != self.partition.n_strings:
            raise ValueError(f"{self.partition.n_strings} strings but {len(self.kernels)} kernels")
        if means is None:
            means = (zero_mean,) * len(self.kernels)
        self.means = tuple(means)
        if len(self.means) != len(self.kernels):
            raise ValueError("one mean function per string required")
        self.rcond_threshold = rcond_threshold
        self._check_means()

    def _check_means(self):
        a = self.partition.boundaries
        for k in range(1, len(self.means)):
            if self.means[k - 1] is zero_mean and self.means[k] is zero_mean:
                continue
            left = np.array(self.means[k - 1](a[k]), dtype=float).ravel()
            right = np.array(self.means[k](a[k]), dtype=float).ravel()
            if not np.allclose(left, right, rtol=1e-10, atol=1e-12):
                raise ValueError(f"mean functions disagree (value or slope) at boundary a_{k} = {a[k]:g}")

    # -- hyperparameters -------------------------------------------------
    @property
    def param_names(self):
        return tuple(f"s{k + 1}.{n}" for k, kern in enumerate(self.kernels) for n in kern.param_names)

    @property
    def log_params(self):
        return np.concatenate([kern.log_params for kern in self.kernels])

    def with_log_params(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.size != self.log_params.size:
            raise ValueError(f"expected {self.log_params.size} log-parameters, got {theta.size}")
        out, i = [], 0
        for kern in self.kernels:
            n = kern.log_params.size
            out.append(kern.with_log_params(theta[i:i + n]))
            i += n
        return StringKernel(self.partition, out, self.means, self.rcond_threshold)

    def to_spec(self):
        return {"boundaries": self.partition.boundaries.tolist(),
                "strings": [kern.to_spec() for kern in self.kernels]}

    @classmethod
    def from_spec(cls, spec):
        return cls(spec["boundaries"], [kernel_from_spec(s) for s in spec["strings"]])

    def __repr__(self):
        return f"StringKernel({self.partition.boundaries.tolist()}, {list(self.kernels)})"

    def degeneracy_reports(self):
        a = self.partition.boundaries
        return [check_degeneracy(kern, a[k], a[k + 1], self.rcond_threshold)
                for k, kern in enumerate(self.kernels)]

    # -- cached assembly state -------------------------------------------
    @cached_property
    def moments(self):
        return build_boundary_moments(self)

    @cached_property
    def _boundary_blocks(self):
        """Each string's own 4x4 covariance of ``(z_a, z'_a, z_b, z'_b)`` at its ends."""
        a = self.partition.boundaries
        out = []
        for k, kern in enumerate(self.kernels, start=1):
            ab = np.array([a[k - 1], a[k]])
            A = _interleave(*kern._derivs(ab[:, None], ab[None, :]))
            out.append(0.5 * (A + A.T))
        return out

    @cached_property
    def _string_pinvs(self):
        """(Pseudo-)inverse of each string's 4x4 boundary covariance.

        A string that is degenerate at b given a (a period dividing the string
        length, a finite-rank kernel) has a singular block; the pseudo-inverse
        still gives the exact Gaussian conditional there.
        """
        out = []
        for k, A in enumerate(self._boundary_blocks, start=1):
            try:
                out.append(psd_pinv(A))
            except LinAlgFailure as exc:
                raise DegeneracyError(f"string {k}: cannot condition on both boundaries ({exc})", k) from exc
        return out

    def _lambda(self, kern, k, x):
        """Conditional-mean weights ``Lambda_x`` (shape ``(n, 2, 4)``) and the
        cross-covariances ``C_x = [K_{x;a}, K_{x;b}]`` for times ``x`` in string ``k``."""
        a0, a1 = self.partition.boundaries[k - 1], self.partition.boundaries[k]
        ab = np.array([[a0, a1]])
        kk, kx, ky, kxy = kern._derivs(*np.broadcast_arrays(x[:, None], ab))  # each (n, 2)
        C = np.empty((x.size, 2, 4))
        C[:, 0, 0::2] = kk
        C[:, 0, 1::2] = ky
        C[:, 1, 0::2] = kx
        C[:, 1, 1::2] = kxy
        lam = C @ self._string_pinvs[k - 1]
        # exact selection at the string's own boundaries
        eye = np.eye(2)
        at0, at1 = x == a0, x == a1
        if at0.any():
            lam[at0] = np.hstack([eye, np.zeros((2, 2))])
        if at1.any():
            lam[at1] = np.hstack([np.zeros((2, 2)), eye])
        return lam, C

    def _features(self, x):
        idx = self.partition.locate(x)
        D = 2 * (self.partition.n_strings + 1)
        E = np.zeros((x.size, 2, D))
        lam = np.empty((x.size, 2, 4))
        C = np.empty((x.size, 2, 4))
        for k in np.unique(idx):
            sel = idx == k
            lam_k, C_k = self._lambda(self.kernels[k - 1], k, x[sel])
            lam[sel], C[sel] = lam_k, C_k
            E[sel, :, 2 * (k - 1):2 * (k + 1)] = lam_k
        return idx, E, lam, C

    # -- evaluation --------------------------------------------------------
    def _assemble(self, X, Y, derivatives, moments=None):
        X = np.ravel(np.asarray(X, dtype=float))
        ix, Ex, lamx, Cx = self._features(X)
        if Y is None:
            Y, iy, Ey, Cy = X, ix, Ex, Cx
        else:
            Y = np.ravel(np.asarray(Y, dtype=float))
            iy, Ey, _, Cy = self._features(Y)
        B = (moments or self.moments).joint
        chans = ((0, 0), (1, 0), (0, 1), (1, 1)) if derivatives else ((0, 0),)
        out = {c: Ex[:, c[0], :] @ B @ Ey[:, c[1], :].T for c in chans}
        for k in np.unique(ix):
            sx = np.flatnonzero(ix == k)
            sy = np.flatnonzero(iy == k)
            if sy.size == 0:
                continue
            base = self.kernels[k - 1].blocks(X[sx], Y[sy])
            # base order (k, dk/dx, dk/dy, d2k/dxdy) is channels (0,0), (1,0), (0,1), (1,1)
            for (c, d), Kb in zip(((0, 0), (1, 0), (0, 1), (1, 1)), base):
                if (c, d) in out:
                    out[(c, d)][np.ix_(sx, sy)] += Kb - lamx[sx, c, :] @ Cy[sy, d, :].T
        return out

    def blocks(self, X, Y=None, moments=None):
        """Pairwise ``(k, dk/dx, dk/dy, d2k/dxdy)`` of the string GP kernel."""
        out = self._assemble(X, Y, True, moments)
        return out[(0, 0)], out[(1, 0)], out[(0, 1)], out[(1, 1)]

    def gram(self, X, Y=None, with_derivatives=False, moments=None):
        """Value Gram matrix, or with ``with_derivatives`` the full ``2n x 2m`` matrix
        ordered ``(z_{x_1..x_n}, z'_{x_1..x_n})`` by ``(z_{y_1..y_m}, z'_{y_1..y_m})``."""
        if not with_derivatives:
            G = self._assemble(X, Y, False, moments)[(0, 0)]
        else:
            k, kx, ky, kxy = self.blocks(X, Y, moments)
            G = np.block([[k, ky], [kx, kxy]])
        if Y is None:
            G = 0.5 * (G + G.T)
        return G

    def _diag_channel(self, X, c):
        X = np.ravel(np.asarray(X, dtype=float))
        idx, E, lam, C = self._features(X)
        B = self.moments.joint
        out = np.einsum("nd,de,ne->n", E[:, c, :], B, E[:, c, :])
        for k in np.unique(idx):
            sel = idx == k
            base = self.kernels[k - 1].derivs(X[sel], X[sel])[3 * c]
            out[sel] += base - np.einsum("ni,ni->n", lam[sel, c, :], C[sel, c, :])
        return out

    def diag(self, X):
        return self._diag_channel(X, 0)

    def derivative_diag(self, X):
        """Prior variance of the derivative process ``z'`` at each time."""
        return self._diag_channel(X, 1)

    def cov_block(self, u, v, moments=None):
        k, kx, ky, kxy = (float(m[0, 0]) for m in self.blocks([u], [v], moments))
        return np.array([[k, ky], [kx, kxy]])

    def eval(self, u, v):
        return float(self.gram([u], [v])[0, 0])

    __call__ = eval

    def mean(self, X):
        """Prior mean ``(value, derivative)`` at each time."""
        X = np.ravel(np.asarray(X, dtype=float))
        idx = self.partition.locate(X)
        m = np.zeros(X.size)
        dm = np.zeros(X.size)
        for k in np.unique(idx):
            sel = idx == k
            mv, md = self.means[k - 1](X[sel])
            m[sel], dm[sel] = mv, md
        return m, dm


def _interleave(kk, kx, ky, kxy):
    """Pack pairwise blocks into the ``(z_1, z'_1, z_2, z'_2, ...)`` ordering."""
    n, m = kk.shape
    A = np.empty((2 * n, 2 * m))
    A[0::2, 0::2] = kk
    A[0::2, 1::2] = ky
    A[1::2, 0::2] = kx
    A[1::2, 1::2] = kxy
    return A


def cov_block(sk, bm, u, v):
    """``K̄_{u;v}`` for the string kernel ``sk`` with boundary moments ``bm``."""
    return sk.cov_block(u, v, moments=bm)


def gram(sk, bm, xs, with_derivatives=False):
    return sk.gram(xs, with_derivatives=with_derivatives, moments=bm)
