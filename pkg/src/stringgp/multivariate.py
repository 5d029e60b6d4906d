"""Separable product kernels over d input dimensions.

Each factor is a univariate kernel acting on one coordinate: a base kernel
gives the usual ARD product, a :class:`~stringgp.string_kernel.StringKernel`
(with its own partition and per-string hyperparameters) gives automatic
*local* relevance determination (ALRD).

For ``k(u, v) = prod_j k_j(u_j, v_j)``::

    dk/dv_j        = dk_j/dv_j * prod_{l != j} k_l
    d2k/du_i dv_j  = dk_i/du_i * dk_j/dv_j * prod_{l not in {i, j}} k_l   (i != j)
    d2k/du_i dv_i  = d2k_i/du_i dv_i * prod_{l != i} k_l
"""

import numpy as np

from .kernels import CapabilityError, DomainError, kernel_from_spec
from .string_kernel import StringKernel

__all__ = ["ProductKernel", "eval_product", "eval_product_gradient_blocks"]


def _leave_one_out_products(mats):
    """``out[j] = prod_{l != j} mats[l]`` without dividing (factors may vanish)."""
    d = len(mats)
    ones = np.ones_like(mats[0])
    prefix = [ones]
    for m in mats[:-1]:
        prefix.append(prefix[-1] * m)
    suffix = [ones] * d
    for j in range(d - 2, -1, -1):
        suffix[j] = suffix[j + 1] * mats[j + 1]
    return [prefix[j] * suffix[j] for j in range(d)]


class ProductKernel:
    def __init__(self, factors):
        self.factors = tuple(factors)
        if not self.factors:
            raise ValueError("a product kernel needs at least one factor")

    @property
    def ndim(self):
        return len(self.factors)

    @property
    def param_names(self):
        return tuple(f"d{j + 1}.{n}" for j, f in enumerate(self.factors) for n in f.param_names)

    @property
    def log_params(self):
        return np.concatenate([f.log_params for f in self.factors])

    def with_log_params(self, theta):
        theta = np.asarray(theta, dtype=float)
        out, i = [], 0
        for f in self.factors:
            n = f.log_params.size
            out.append(f.with_log_params(theta[i:i + n]))
            i += n
        if i != theta.size:
            raise ValueError(f"expected {i} log-parameters, got {theta.size}")
        return ProductKernel(out)

    def to_spec(self):
        return {"dims": [f.to_spec() for f in self.factors]}

    @classmethod
    def from_spec(cls, spec):
        return cls([StringKernel.from_spec(s) if "boundaries" in s else kernel_from_spec(s)
                    for s in spec["dims"]])

    def __repr__(self):
        return f"ProductKernel({list(self.factors)})"

    def _cols(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(1, -1) if X.size == self.ndim else X.reshape(-1, self.ndim)
        if X.shape[1] != self.ndim:
            raise ValueError(f"inputs have {X.shape[1]} columns, kernel has {self.ndim} factors")
        return X

    def _factor_blocks(self, X, Y):
        out = []
        for j, f in enumerate(self.factors):
            try:
                out.append(f.blocks(X[:, j], Y[:, j]))
            except DomainError as exc:
                raise DomainError(f"dimension {j + 1}: {exc}") from exc
            except AttributeError as exc:
                raise CapabilityError(f"factor {j + 1} exposes no derivative blocks") from exc
        return out

    def gram(self, X, Y=None):
        X = self._cols(X)
        Y = X if Y is None else self._cols(Y)
        G = np.ones((len(X), len(Y)))
        for j, f in enumerate(self.factors):
            try:
                G *= f.gram(X[:, j], Y[:, j])
            except DomainError as exc:
                raise DomainError(f"dimension {j + 1}: {exc}") from exc
        return G

    def diag(self, X):
        X = self._cols(X)
        out = np.ones(len(X))
        for j, f in enumerate(self.factors):
            out *= f.diag(X[:, j])
        return out

    def gradient_grams(self, X, Y):
        """``G[j] = dk/dv_j(X, Y)``, i.e. ``cov(f(X), df/dx_j(Y))``; shape ``(d, n, m)``."""
        X, Y = self._cols(X), self._cols(Y)
        blk = self._factor_blocks(X, Y)
        loo = _leave_one_out_products([b[0] for b in blk])
        return np.stack([blk[j][2] * loo[j] for j in range(self.ndim)])

    def hessian_grams(self, X, Y):
        """``H[i, j] = d2k/du_i dv_j(X, Y)``; shape ``(d, d, n, m)``."""
        X, Y = self._cols(X), self._cols(Y)
        blk = self._factor_blocks(X, Y)
        vals = [b[0] for b in blk]
        d = self.ndim
        H = np.empty((d, d, len(X), len(Y)))
        for i in range(d):
            for j in range(d):
                mats = list(vals)
                if i == j:
                    mats[i] = blk[i][3]
                else:
                    mats[i] = blk[i][1]
                    mats[j] = blk[j][2]
                H[i, j] = np.prod(mats, axis=0)
        return H

    def hessian_diag(self, X):
        """Prior variance of each gradient coordinate, ``(d, n)``."""
        X = self._cols(X)
        vals = [f.diag(X[:, j]) for j, f in enumerate(self.factors)]
        dvar = [f.derivative_diag(X[:, j]) for j, f in enumerate(self.factors)]
        loo = _leave_one_out_products(vals)
        return np.stack([dvar[j] * loo[j] for j in range(self.ndim)])


def eval_product(pk, u, v):
    return float(pk.gram(np.atleast_2d(u), np.atleast_2d(v))[0, 0])


def eval_product_gradient_blocks(pk, u, v):
    """``(k(u, v), [dk/dv_j], [[d2k/du_i dv_j]])`` at single points ``u``, ``v``."""
    U, V = np.atleast_2d(np.asarray(u, dtype=float)), np.atleast_2d(np.asarray(v, dtype=float))
    value = float(pk.gram(U, V)[0, 0])
    grad = pk.gradient_grams(U, V)[:, 0, 0]
    hess = pk.hessian_grams(U, V)[:, :, 0, 0]
    return value, grad, hess
