"""Dense linear-algebra helpers shared by the kernel, sampler and regression code.

All symmetric positive (semi-)definite solves go through the same jitter
policy: try the raw matrix first, then add ``1e-10 * trace / dim`` to the
diagonal and grow it by a decade at a time, at most three times.
"""

import numpy as np
import scipy.linalg as la

JITTER_BASE = 1e-10
JITTER_DECADES = 3
# below this the factor is numerically meaningless even if Cholesky succeeds
MIN_RCOND = 1e-13
# eigenvalues below this fraction of the largest are treated as exact zeros
PINV_RCOND = 1e-10


class LinAlgFailure(np.linalg.LinAlgError):
    """Raised when a matrix cannot be factorized even after jitter."""


def rcond(A):
    """Reciprocal 2-norm condition number of a symmetric matrix (0 if singular)."""
    s = np.linalg.svd(np.asarray(A, dtype=float), compute_uv=False)
    if s[0] <= 0 or not np.all(np.isfinite(s)):
        return 0.0
    return float(s[-1] / s[0])


def jitter_schedule(A):
    """Yield the diagonal jitter values tried for matrix ``A``, starting at 0."""
    A = np.asarray(A)
    scale = np.trace(A) / A.shape[0]
    if not np.isfinite(scale) or scale <= 0:
        scale = 1.0
    yield 0.0
    for j in range(JITTER_DECADES + 1):
        yield JITTER_BASE * scale * 10.0 ** j


def jitchol(A, check_rcond=False):
    """Lower Cholesky factor of ``A`` under the shared jitter policy.

    Returns ``(L, jitter)``. When ``check_rcond`` is set, a factor whose
    diagonal ratio implies a reciprocal condition below ``MIN_RCOND`` is
    rejected and more jitter is tried; this matters for the tiny 2x2/4x4
    boundary systems where Cholesky can "succeed" on a singular matrix.
    """
    A = np.asarray(A, dtype=float)
    if not np.all(np.isfinite(A)):
        raise LinAlgFailure("matrix has non-finite entries")
    n = A.shape[0]
    for jit in jitter_schedule(A):
        Aj = A + jit * np.eye(n) if jit else A
        try:
            L = la.cholesky(Aj, lower=True, check_finite=False)
        except la.LinAlgError:
            continue
        d = np.diag(L)
        if check_rcond and (d.min() / d.max()) ** 2 < MIN_RCOND:
            continue
        return L, jit
    raise LinAlgFailure(f"{n}x{n} matrix not positive definite after maximum jitter")


def cho_solve(L, B):
    return la.cho_solve((L, True), B, check_finite=False)


def spd_inverse(A):
    """Inverse of a small SPD matrix via the jittered Cholesky factor."""
    L, _ = jitchol(A, check_rcond=True)
    return cho_solve(L, np.eye(A.shape[0]))


def psd_pinv(A, rcond=PINV_RCOND):
    """Moore-Penrose pseudo-inverse of a symmetric PSD matrix, via its eigendecomposition.

    Conditioning a Gaussian on a singular block is exact with the
    pseudo-inverse, whereas jitter leaves an O(jitter) error behind.
    """
    A = np.asarray(A, dtype=float)
    if not np.all(np.isfinite(A)):
        raise LinAlgFailure("matrix has non-finite entries")
    w, V = np.linalg.eigh(0.5 * (A + A.T))
    top = w.max()
    if top <= 0:
        raise LinAlgFailure("matrix has no positive eigenvalue")
    if w.min() < -1e-8 * top:
        raise LinAlgFailure("matrix has a significantly negative eigenvalue")
    keep = w > rcond * top
    inv = np.zeros_like(w)
    inv[keep] = 1.0 / w[keep]
    return (V * inv) @ V.T


def logdet_chol(L):
    return 2.0 * np.sum(np.log(np.diag(L)))


def psd_sqrt(A):
    """A factor ``S`` with ``S @ S.T == A`` for a PSD (possibly singular) matrix.

    Used for sampling, where an exactly singular covariance (a degenerate
    boundary innovation, say) is legitimate and should not be rejected.
    """
    A = np.asarray(A, dtype=float)
    A = 0.5 * (A + A.T)
    try:
        L, _ = jitchol(A)
        return L
    except LinAlgFailure:
        pass
    w, V = np.linalg.eigh(A)
    tol = -1e-8 * max(abs(w).max(), 1.0)
    if w.min() < tol:
        raise LinAlgFailure("covariance has a significantly negative eigenvalue")
    return V * np.sqrt(np.clip(w, 0.0, None))
