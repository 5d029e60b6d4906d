"""Per-run metrics and their across-run aggregates."""

from dataclasses import dataclass, field, fields

import numpy as np

__all__ = ["MetricsReport", "METRIC_FIELDS", "mae", "rr_std", "compute_metrics", "aggregate"]

METRIC_FIELDS = ("training_loglik", "predictive_loglik", "mae", "mae_point_2std",
                 "avg_std", "avg_latent_std", "rr_std")


def mae(pred, truth):
    return float(np.mean(np.abs(np.asarray(pred) - np.asarray(truth))))


def rr_std(std):
    """Relative range ``(max - min) / mean`` of posterior standard deviations."""
    std = np.asarray(std, dtype=float)
    return float((std.max() - std.min()) / std.mean())


@dataclass
class MetricsReport:
    """Metrics of one fitted model on one replication.

    A metric left as ``None`` was not computed (e.g. no test points) and is
    omitted from serialized output rather than written as zero.
    """

    model: str
    replication: int
    seed: int
    n_train: int
    n_test: int
    training_loglik: float = None
    predictive_loglik: float = None
    mae: float = None
    mae_point_2std: float = None   # 2 x std of |error| across test points
    avg_std: float = None          # predictive (noisy) std
    avg_latent_std: float = None
    rr_std: float = None
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None or (f.name == "extra" and not v):
                continue
            out[f.name] = v
        return out


def compute_metrics(model, replication, seed, n_train, pred=None, y_test=None,
                    training_loglik=None, predictive_loglik=None, extra=None):
    """Fill a :class:`MetricsReport` from a prediction at the test inputs."""
    rep = MetricsReport(model, int(replication), int(seed), int(n_train), 0,
                        training_loglik=None if training_loglik is None else float(training_loglik),
                        extra=dict(extra or {}))
    if pred is None or y_test is None or np.size(y_test) == 0:
        return rep
    y_test = np.ravel(y_test)
    err = np.abs(pred.mean - y_test)
    rep.n_test = int(y_test.size)
    rep.mae = float(err.mean())
    rep.mae_point_2std = float(2.0 * err.std())
    sd = pred.predictive_std
    rep.avg_std = float(sd.mean())
    rep.avg_latent_std = float(pred.latent_std.mean())
    rep.rr_std = rr_std(sd)
    if predictive_loglik is not None:
        rep.predictive_loglik = float(predictive_loglik)
    return rep


def aggregate(reports):
    """``{model: {metric: {"mean", "two_std", "n"}}}`` over replications.

    ``two_std`` is twice the sample standard deviation across runs (0 for a
    single run). Metrics absent from every run are absent here too.
    """
    by_model = {}
    for r in reports:
        by_model.setdefault(r.model, []).append(r)
    out = {}
    for name in sorted(by_model):
        runs = by_model[name]
        stats = {}
        for m in METRIC_FIELDS:
            vals = np.array([getattr(r, m) for r in runs if getattr(r, m) is not None], dtype=float)
            if vals.size == 0:
                continue
            sd = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
            stats[m] = {"mean": float(vals.mean()), "two_std": 2.0 * sd, "n": int(vals.size)}
        out[name] = stats
    return out
