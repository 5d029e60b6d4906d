"""Seeded, replicated experiment runs: data, splits, model fits, metrics, plot data."""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..hyperopt import ConfigurationError
from .config import preset, validate_config
from .datasets import gen_synthetic, load_csv, load_motorcycle
from .metrics import aggregate, compute_metrics
from .models import fit_model

__all__ = ["ExperimentError", "ExperimentReport", "run_experiment", "replication_seeds",
           "load_dataset", "make_split"]

log = logging.getLogger(__name__)


class ExperimentError(RuntimeError):
    pass


@dataclass
class ExperimentReport:
    name: str
    seed: int
    config: dict
    runs: list = field(default_factory=list)          # MetricsReport
    aggregate: dict = field(default_factory=dict)
    comparisons: list = field(default_factory=list)
    bands: list = field(default_factory=list)         # (x, mean, lo, hi, series)
    gradient_field: list = field(default_factory=list)  # (x1, x2, mean, d/dx1, d/dx2, series)

    def to_dict(self):
        return {
            "name": self.name,
            "seed": self.seed,
            "config": self.config,
            "runs": [r.to_dict() for r in self.runs],
            "aggregate": self.aggregate,
            "comparisons": self.comparisons,
            "bands": [list(r) for r in self.bands],
            "gradient_field": [list(r) for r in self.gradient_field],
        }

    @classmethod
    def from_dict(cls, d):
        from .metrics import MetricsReport
        runs = [MetricsReport(**r) for r in d.get("runs", [])]
        return cls(d["name"], d["seed"], d.get("config", {}), runs, d.get("aggregate", {}),
                   d.get("comparisons", []), [tuple(r) for r in d.get("bands", [])],
                   [tuple(r) for r in d.get("gradient_field", [])])


def replication_seeds(seed, n):
    """Independent 32-bit seeds for ``n`` replications, derived from ``seed``."""
    return [int(c.generate_state(1)[0]) for c in np.random.SeedSequence(seed).spawn(n)]


def load_dataset(ds_cfg, seed=None):
    src = ds_cfg["source"]
    if src == "synthetic":
        return gen_synthetic(ds_cfg["function"], step=ds_cfg.get("step"), mesh=ds_cfg.get("mesh"),
                             noise_std=ds_cfg.get("noise_std", 0.0), seed=seed)
    if src == "motorcycle":
        return load_motorcycle()
    path = ds_cfg.get("path") or os.environ.get(ds_cfg.get("path_env", ""), "")
    if not path:
        raise FileNotFoundError(f"dataset file not given (set {ds_cfg.get('path_env')} or 'path')")
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    return load_csv(path, ds_cfg.get("csv_schema", "xy"))


def make_split(ds, split_cfg, seed):
    """Boolean ``(train, test)`` masks under the configured split policy."""
    policy = split_cfg.get("policy", "preset" if ds.train_mask is not None else "none")
    rng = np.random.default_rng(seed)
    if policy == "preset":
        if ds.train_mask is None:
            raise ConfigurationError("preset split requested but the dataset has none")
        mask = ds.train_mask.copy()
    elif policy == "random_holdout":
        n_test = int(split_cfg.get("n_test", 0))
        if not 0 <= n_test < ds.n - 1:
            raise ConfigurationError(f"cannot hold out {n_test} of {ds.n} points")
        mask = np.ones(ds.n, dtype=bool)
        mask[rng.choice(ds.n, n_test, replace=False)] = False
    else:
        mask = np.ones(ds.n, dtype=bool)
    test = ~mask
    cap = split_cfg.get("max_train")
    if cap is not None and mask.sum() > cap:
        # thin the training set; points dropped here are not used for testing
        keep = rng.choice(np.flatnonzero(mask), cap, replace=False)
        mask = np.zeros(ds.n, dtype=bool)
        mask[keep] = True
    return mask, test


def _domain(ds, ds_cfg):
    if "domain" in ds_cfg:
        return ds_cfg["domain"]
    if ds.X.ndim == 1:
        return (float(ds.X.min()), float(ds.X.max()))
    return [(float(c.min()), float(c.max())) for c in ds.X.T]


def _truth(ds):
    return ds.meta.get("exact", ds.y)


def _run_replication(cfg, rep, rep_seed, want_plots):
    ds_cfg = cfg["dataset"]
    ds = load_dataset(ds_cfg, seed=rep_seed)
    train, test = make_split(ds, cfg.get("split", {}), rep_seed)
    X, y = ds.X[train], ds.y[train]
    Xt, yt = ds.X[test], _truth(ds)[test]
    domain = _domain(ds, ds_cfg)
    fitted, reports = {}, []
    for i, entry in enumerate(cfg["models"]):
        label = entry["label"]
        try:
            fm = fit_model(entry, X, y, domain, rep_seed + i, cfg.get("search"), fitted)
            pred = fm.predict(Xt) if yt.size else None
            pll = fm.predictive_loglik(Xt, yt) if yt.size else None
            rep_ = compute_metrics(label, rep, rep_seed, y.size, pred, yt, fm.training_loglik, pll,
                                   extra=fm.summary())
        except Exception as exc:
            raise ExperimentError(f"{cfg['name']}: replication {rep} (seed {rep_seed}), "
                                  f"model {label!r}: {type(exc).__name__}: {exc}") from exc
        fitted[label] = fm
        reports.append(rep_)
        log.info("%s rep %d %s (%.2fs): %s", cfg["name"], rep, label, fm.elapsed, rep_.to_dict())
    plots = _plots(cfg, ds, X, y, Xt, yt, domain, fitted) if want_plots else ([], [])
    return reports, plots


def _plots(cfg, ds, X, y, Xt, yt, domain, fitted):
    pc = cfg.get("plot", {})
    bands, field_rows = [], []
    n = int(pc.get("grid", 0))
    if n and ds.X.ndim == 1:
        lo, hi = domain
        grid = np.linspace(lo, hi, n)
        for label, fm in fitted.items():
            p = fm.predict(grid)
            sd = p.predictive_std
            for x, m, s in zip(grid, p.mean, sd):
                bands.append((float(x), float(m), float(m - 2 * s), float(m + 2 * s), label))
        for x, v in zip(X, y):
            bands.append((float(x), float(v), float(v), float(v), "train"))
        for x, v in zip(Xt, yt):
            bands.append((float(x), float(v), float(v), float(v), "test"))
    n = int(pc.get("gradient_grid", 0))
    if n and ds.X.ndim == 2:
        (l0, h0), (l1, h1) = domain
        G0, G1 = np.meshgrid(np.linspace(l0, h0, n), np.linspace(l1, h1, n), indexing="ij")
        P = np.column_stack([G0.ravel(), G1.ravel()])
        for label, fm in fitted.items():
            if not fm.supports_gradient:
                continue
            p = fm.predict_gradient(P)
            for (a, b), m, g in zip(P, p.mean, p.grad_mean):
                field_rows.append((float(a), float(b), float(m), float(g[0]), float(g[1]), label))
    return bands, field_rows


def _comparisons(cfg, runs):
    out = []
    for a, b in cfg.get("compare", []):
        by_rep = {}
        for r in runs:
            if r.model in (a, b) and r.predictive_loglik is not None:
                by_rep.setdefault(r.replication, {})[r.model] = r.predictive_loglik
        pairs = [v for v in by_rep.values() if a in v and b in v]
        wins = sum(v[a] > v[b] for v in pairs)
        out.append({"model": a, "baseline": b, "metric": "predictive_loglik",
                    "wins": int(wins), "n": len(pairs)})
    return out


def run_experiment(cfg, replications=None, n_jobs=None):
    """Run a named preset or a config dict; returns an :class:`ExperimentReport`.

    Replication ``r`` uses seed ``replication_seeds(cfg["seed"], R)[r]`` for
    its noise draw, split and optimizer starts (model ``i`` adds ``i``), so
    results do not depend on ``n_jobs`` or completion order.
    """
    cfg = preset(cfg) if isinstance(cfg, str) else validate_config(cfg)
    if replications is not None:
        cfg = dict(cfg, replications=int(replications))
    R = int(cfg.get("replications", 1))
    seed = int(cfg.get("seed", 0))
    seeds = replication_seeds(seed, R)
    jobs = int(n_jobs or cfg.get("n_jobs", 1))

    def one(r):
        return _run_replication(cfg, r, seeds[r], r == 0)

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            results = list(pool.map(one, range(R)))
    else:
        results = [one(r) for r in range(R)]
    runs = [rep for reps, _ in results for rep in reps]
    bands, grad = results[0][1]
    return ExperimentReport(cfg["name"], seed, cfg, runs, aggregate(runs),
                            _comparisons(cfg, runs), bands, grad)
