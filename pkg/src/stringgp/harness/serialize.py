"""JSON round-trips for kernels, noise models and fitted models."""

import numpy as np

from ..hyperopt import IndependentExperts
from ..kernels import kernel_from_spec
from ..multivariate import ProductKernel
from ..regression import Homoskedastic, PerString, fit
from ..string_kernel import Partition, StringKernel
from .models import FittedModel, family_class

__all__ = ["kernel_from_any", "noise_to_spec", "noise_from_spec", "fitted_to_dict", "fitted_from_dict"]

SCHEMA_VERSION = 1


def _normalize(spec):
    spec = dict(spec)
    spec["family"] = family_class(spec["family"]).family
    return spec


def kernel_from_any(spec):
    """Base kernel, string kernel (``boundaries``/``strings``) or product (``dims``)."""
    if "dims" in spec:
        return ProductKernel([kernel_from_any(s) for s in spec["dims"]])
    if "boundaries" in spec:
        return StringKernel(spec["boundaries"], [kernel_from_spec(_normalize(s)) for s in spec["strings"]])
    return kernel_from_spec(_normalize(spec))


def noise_to_spec(noise):
    if isinstance(noise, PerString):
        return {"type": "per_string", "boundaries": noise.partition.boundaries.tolist(),
                "variances": noise.string_variances.tolist()}
    return {"type": "homoskedastic", "variance": noise.variance}


def noise_from_spec(spec):
    if spec.get("type", "homoskedastic") == "per_string":
        return PerString(spec["boundaries"], spec["variances"])
    return Homoskedastic(spec["variance"])


def _arr(X):
    return np.asarray(X, dtype=float).tolist()


def fitted_to_dict(fm, X, y):
    """Everything needed to rebuild the posterior: hyperparameters and training data."""
    out = {"schema": SCHEMA_VERSION, "label": fm.label, "kind": fm.kind, "X": _arr(X), "y": _arr(y)}
    if isinstance(fm.predictor, IndependentExperts):
        out["boundaries"] = fm.predictor.partition.boundaries.tolist()
        out["experts"] = [{"kernel": p.kernel.to_spec(), "noise": noise_to_spec(p.noise)}
                          for p in fm.predictor.posteriors]
    else:
        out["kernel"] = fm.kernel.to_spec()
        out["noise"] = noise_to_spec(fm.noise)
    out["fit"] = [r.to_dict() for r in fm.results]
    out["training_loglik"] = float(fm.training_loglik)
    return out


def fitted_from_dict(d):
    X = np.asarray(d["X"], dtype=float)
    y = np.asarray(d["y"], dtype=float)
    if "experts" in d:
        part = Partition(d["boundaries"])
        idx = part.locate(X)
        posts = []
        for k, e in enumerate(d["experts"], start=1):
            sel = idx == k
            posts.append(fit(kernel_from_any(e["kernel"]), X[sel], y[sel], noise_from_spec(e["noise"])))
        return FittedModel(d.get("label", "experts"), "experts", IndependentExperts(part, posts, []), [])
    kern = kernel_from_any(d["kernel"])
    noise = noise_from_spec(d["noise"])
    return FittedModel(d.get("label", d.get("kind", "gp")), d.get("kind", "gp"),
                       fit(kern, X, y, noise), [], kern, noise)
