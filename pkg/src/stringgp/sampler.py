"""Joint prior draws of a string GP and its derivative.

Boundary pairs are drawn first, as a Markov chain over the boundary times.
Each string is then filled in independently, conditioned on the two boundary
pairs it touches. All routines are vectorized over ``n_draws``.

Randomness comes from ``numpy.random.SeedSequence``: the boundary chain uses
one child stream and string ``k`` uses child ``k``, so filling strings in
parallel or in any order gives identical paths.
"""

from dataclasses import dataclass

import numpy as np

from .linalg import LinAlgFailure, psd_sqrt
from .string_kernel import DegeneracyError

__all__ = ["BoundaryDraw", "PathDraw", "sample_boundaries", "sample_path", "sample", "path_rows"]


@dataclass(frozen=True)
class BoundaryDraw:
    """``values[d, k] = (z_{a_k}, z'_{a_k})`` for draw ``d``."""

    boundaries: np.ndarray
    values: np.ndarray
    seed: object = None

    @property
    def n_draws(self):
        return self.values.shape[0]


@dataclass(frozen=True)
class PathDraw:
    times: np.ndarray
    z: np.ndarray          # (n_draws, n_times)
    z_prime: np.ndarray    # (n_draws, n_times)
    string_index: np.ndarray


def _streams(seed, n_strings):
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return ss.spawn(n_strings + 1)


def _mvn(rng, mean, cov, n_draws):
    try:
        S = psd_sqrt(cov)
    except LinAlgFailure as exc:
        raise DegeneracyError(f"conditional covariance not PSD: {exc}") from exc
    eps = rng.standard_normal((n_draws, cov.shape[0]))
    return mean + eps @ S.T


def sample_boundaries(sk, bm=None, seed=None, n_draws=1):
    """Draw boundary pairs from the Markov factorization of their joint law."""
    bm = sk.moments if bm is None else bm
    a = sk.partition.boundaries
    K = sk.partition.n_strings
    rng = np.random.default_rng(_streams(seed, K)[0])
    x = np.empty((n_draws, K + 1, 2))
    m1, dm1 = sk.means[0](a[0])
    x[:, 0, :] = _mvn(rng, np.array([float(m1), float(dm1)]), bm.block(0, 0), n_draws)
    for k in range(1, K + 1):
        M = bm.propagators[k]
        mp = np.array([float(v) for v in sk.means[k - 1](a[k - 1])])
        mc = np.array([float(v) for v in sk.means[k - 1](a[k])])
        mu = mc + (x[:, k - 1, :] - mp) @ M.T
        x[:, k, :] = _mvn(rng, 0.0, bm.innovations[k], n_draws) + mu
    return BoundaryDraw(a.copy(), x, seed)


def sample_path(sk, bd, times, seed=None):
    """Fill in each string, given the boundary draw ``bd``, at sorted ``times``."""
    times = np.asarray(times, dtype=float).ravel()
    if np.any(np.diff(times) < 0):
        raise ValueError("times must be sorted")
    a = sk.partition.boundaries
    K = sk.partition.n_strings
    idx = sk.partition.locate(times)
    n_draws = bd.n_draws
    z = np.empty((n_draws, times.size))
    zp = np.empty((n_draws, times.size))
    streams = _streams(seed, K)
    for k in np.unique(idx):
        sel = np.flatnonzero(idx == k)
        t = times[sel]
        kern = sk.kernels[k - 1]
        lam, C = sk._lambda(kern, k, t)
        n = t.size
        # conditional covariance over (z_t..., z'_t...) for this string
        kk, kx, ky, kxy = kern.blocks(t, t)
        Kt = np.block([[kk, ky], [kx, kxy]])
        L2 = np.concatenate([lam[:, 0, :], lam[:, 1, :]])   # (2n, 4)
        C2 = np.concatenate([C[:, 0, :], C[:, 1, :]])
        cov = Kt - L2 @ C2.T
        cov = 0.5 * (cov + cov.T)
        m, dm = sk.means[k - 1](t)
        ma, dma = sk.means[k - 1](a[k - 1])
        mb, dmb = sk.means[k - 1](a[k])
        mbound = np.array([float(ma), float(dma), float(mb), float(dmb)])
        resid = bd.values[:, k - 1:k + 1, :].reshape(n_draws, 4) - mbound
        mean = np.concatenate([np.broadcast_to(m, (n,)), np.broadcast_to(dm, (n,))]) + resid @ L2.T
        rng = np.random.default_rng(streams[k])
        draw = _mvn(rng, mean, cov, n_draws)
        z[:, sel] = draw[:, :n]
        zp[:, sel] = draw[:, n:]
        # conditioning reproduces the conditions exactly
        for j, tj in enumerate(t):
            if tj == a[k - 1]:
                z[:, sel[j]], zp[:, sel[j]] = bd.values[:, k - 1, 0], bd.values[:, k - 1, 1]
            elif tj == a[k]:
                z[:, sel[j]], zp[:, sel[j]] = bd.values[:, k, 0], bd.values[:, k, 1]
    return PathDraw(times, z, zp, idx)


def sample(sk, times, seed=None, n_draws=1):
    """Unconditional draws of ``(z_t, z'_t)`` at ``times``: boundaries, then strings."""
    ss = np.random.SeedSequence(seed)
    s_bound, s_path = ss.spawn(2)
    bd = sample_boundaries(sk, seed=s_bound, n_draws=n_draws)
    return sample_path(sk, bd, times, seed=s_path)


def path_rows(path):
    """Long-format rows ``(time, z, z_prime, string_index, draw_id)`` for CSV output."""
    rows = []
    for d in range(path.z.shape[0]):
        for j, t in enumerate(path.times):
            rows.append((float(t), float(path.z[d, j]), float(path.z_prime[d, j]),
                         int(path.string_index[j]), d))
    return rows
