"""Command-line interface: ``stringgp <subcommand> ...`` (also ``python3 -m stringgp``)."""

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from .harness.config import load_config, preset, validate_config
from .harness.datasets import load_csv
from .harness.experiments import ExperimentReport, run_experiment
from .harness.models import fit_model
from .harness.report import FORMATS, emit_report
from .harness.serialize import fitted_from_dict, fitted_to_dict, kernel_from_any
from .sampler import path_rows, sample
from .string_kernel import StringKernel

log = logging.getLogger("stringgp")


def _grid(text):
    """``lo:hi:n`` -> linspace, or a comma-separated list of values."""
    if ":" in text:
        lo, hi, n = text.split(":")
        return np.linspace(float(lo), float(hi), int(n))
    return np.array([float(v) for v in text.split(",") if v.strip()])


def _params(pairs):
    out = {}
    for p in pairs or []:
        if "=" not in p:
            raise SystemExit(f"--param expects name=value, got {p!r}")
        k, v = p.split("=", 1)
        out[k.strip()] = float(v)
    return out


def _read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _kernel_from_args(args):
    if args.config:
        cfg = _read_json(args.config)
        return kernel_from_any(cfg.get("kernel", cfg))
    if not args.family:
        raise SystemExit("give --config or --family (with --param name=value ...)")
    base = {"family": args.family, "params": _params(args.param)}
    if args.family.lower() in ("sm", "spectralmixture"):
        base["n_components"] = args.n_components
    if args.boundaries:
        b = _grid(args.boundaries)
        return kernel_from_any({"boundaries": b.tolist(), "strings": [base] * (len(b) - 1)})
    return kernel_from_any(base)


def _open_out(args, name):
    if args.out_dir:
        os.makedirs(args.out_dir, exist_ok=True)
        path = os.path.join(args.out_dir, name)
        return open(path, "w", newline="", encoding="utf-8"), path
    return sys.stdout, None


def _num(v):
    return repr(float(v))


def cmd_sample(args):
    sk = _kernel_from_args(args)
    if not isinstance(sk, StringKernel):
        a = _grid(args.times)
        sk = StringKernel([a.min(), a.max()], [sk])
    times = np.sort(_grid(args.times))
    path = sample(sk, times, seed=args.seed, n_draws=args.n_draws)
    fh, dest = _open_out(args, "samples.csv")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["time", "z", "z_prime", "string_index", "draw_id"])
    for t, z, zp, k, d in path_rows(path):
        w.writerow([_num(t), _num(z), _num(zp), k, d])
    if dest:
        fh.close()
        print(dest)


def cmd_kernel_eval(args):
    kern = _kernel_from_args(args)
    us, vs = _grid(args.u), _grid(args.v)
    rows = []
    for u in us:
        for v in vs:
            blk = kern.cov_block(u, v) if isinstance(kern, StringKernel) else kern.eval_block(u, v)
            rows.append([_num(u), _num(v), _num(blk[0, 0]), _num(blk[0, 1]), _num(blk[1, 0]), _num(blk[1, 1])])
    fh, dest = _open_out(args, "kernel_eval.csv")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["u", "v", "k", "dk_dv", "dk_du", "d2k_dudv"])
    w.writerows(rows)
    if dest:
        fh.close()
        print(dest)


def cmd_fit(args):
    ds = load_csv(args.data, args.csv_schema)
    if args.config:
        cfg = _read_json(args.config)
        if cfg.get("schema") != 1:
            raise SystemExit('model config needs "schema": 1')
        entry, search = cfg["model"], cfg.get("search", {})
        domain = cfg.get("domain")
    else:
        entry = {"label": args.kind, "kind": args.kind, "family": args.family or "se"}
        if args.n_strings:
            entry["n_strings"] = args.n_strings
        if args.boundaries:
            entry["boundaries"] = _grid(args.boundaries).tolist()
        if args.per_string_noise:
            entry["noise"] = "per_string"
        search = {"restarts": args.restarts, "max_evals": args.max_evals}
        domain = None
    if domain is None:
        domain = ((float(ds.X.min()), float(ds.X.max())) if ds.X.ndim == 1
                  else [(float(c.min()), float(c.max())) for c in ds.X.T])
    fm = fit_model(entry, ds.X, ds.y, domain, args.seed, search)
    fh, dest = _open_out(args, "model.json")
    fh.write(json.dumps(fitted_to_dict(fm, ds.X, ds.y), indent=2, sort_keys=True) + "\n")
    if dest:
        fh.close()
        print(dest)


def cmd_predict(args):
    fm = fitted_from_dict(_read_json(args.model))
    if args.points:
        ds = load_csv(args.points, args.csv_schema)
        X = ds.X
    else:
        X = _grid(args.at)
    grad = args.gradient and fm.supports_gradient
    p = fm.predict_gradient(X) if grad else fm.predict(X)
    Xc = X.reshape(len(X), -1)
    d = Xc.shape[1]
    xcols = ["x"] if d == 1 else [f"x{j + 1}" for j in range(d)]
    header = [*xcols, "mean", "std", "lo", "hi", "latent_std"]
    if grad:
        header += ["d_dx"] if d == 1 else [f"d_dx{j + 1}" for j in range(d)]
    fh, dest = _open_out(args, "predictions.csv")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(header)
    sd, lsd = p.predictive_std, p.latent_std
    for i in range(len(Xc)):
        row = [*map(_num, Xc[i]), _num(p.mean[i]), _num(sd[i]), _num(p.mean[i] - 2 * sd[i]),
               _num(p.mean[i] + 2 * sd[i]), _num(lsd[i])]
        if grad:
            row += list(map(_num, p.grad_mean[i]))
        w.writerow(row)
    if dest:
        fh.close()
        print(dest)


def _formats(text):
    fmts = FORMATS if text in (None, "all") else tuple(f.strip() for f in text.split(","))
    for f in fmts:
        if f not in FORMATS:
            raise SystemExit(f"unknown format {f!r}; choose from {', '.join(FORMATS)} or all")
    return fmts


def cmd_experiment(args):
    target = args.config or args.name
    if target is None:
        raise SystemExit("experiment needs a preset name or --config")
    cfg = load_config(target) if target.endswith(".json") else preset(target)
    if args.seed is not None:
        cfg["seed"] = args.seed
    cfg = validate_config(cfg)
    report = run_experiment(cfg, replications=args.replications, n_jobs=args.n_jobs)
    out = args.out_dir or "."
    for fmt in _formats(args.format):
        for p in emit_report(report, fmt, out):
            print(p)
    for c in report.comparisons:
        print(f"{c['model']} beats {c['baseline']} on {c['wins']}/{c['n']} replications", file=sys.stderr)


def cmd_report(args):
    report = ExperimentReport.from_dict(_read_json(args.report))
    for fmt in _formats(args.format):
        for p in emit_report(report, fmt, args.out_dir or "."):
            print(p)


def _kernel_flags(p):
    p.add_argument("--config", help="JSON kernel spec (base, string or product)")
    p.add_argument("--family", help="base family, e.g. se, matern32, periodic")
    p.add_argument("--param", action="append", metavar="NAME=VALUE", help="kernel hyperparameter")
    p.add_argument("--n-components", type=int, default=1)
    p.add_argument("--boundaries", help="string boundaries, lo:hi:n or a,b,c")


def build_parser():
    parser = argparse.ArgumentParser(prog="stringgp", description="String Gaussian process toolkit")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out-dir")
        return p

    p = common(sub.add_parser("sample", help="draw prior paths (value and derivative)"))
    _kernel_flags(p)
    p.add_argument("--times", required=True, help="lo:hi:n or comma list")
    p.add_argument("--n-draws", type=int, default=1)
    p.set_defaults(func=cmd_sample)

    p = common(sub.add_parser("kernel-eval", help="2x2 derivative covariance blocks"))
    _kernel_flags(p)
    p.add_argument("u")
    p.add_argument("v")
    p.set_defaults(func=cmd_kernel_eval)

    p = common(sub.add_parser("fit", help="train one model on a CSV file"))
    p.add_argument("--data", required=True)
    p.add_argument("--csv-schema", default="xy", choices=["xy", "latlon_anomaly"])
    p.add_argument("--config", help='JSON {"schema": 1, "model": {...}, "search": {...}}')
    p.add_argument("--kind", default="gp", choices=["gp", "string", "experts", "ard", "alrd"])
    p.add_argument("--family")
    p.add_argument("--n-strings", type=int)
    p.add_argument("--boundaries")
    p.add_argument("--per-string-noise", action="store_true")
    p.add_argument("--restarts", type=int, default=3)
    p.add_argument("--max-evals", type=int, default=2000)
    p.set_defaults(func=cmd_fit)

    p = common(sub.add_parser("predict", help="posterior predictions from a fitted model"))
    p.add_argument("--model", required=True, help="model.json written by `fit`")
    p.add_argument("--at", default="0:1:101")
    p.add_argument("--points", help="CSV of query points")
    p.add_argument("--csv-schema", default="xy", choices=["xy", "latlon_anomaly"])
    p.add_argument("--gradient", action="store_true")
    p.set_defaults(func=cmd_predict)

    p = common(sub.add_parser("experiment", help="run a preset or a JSON experiment config"))
    p.add_argument("name", nargs="?")
    p.add_argument("--config")
    p.add_argument("--format", default="all", help="csv,json,plotdata or all")
    p.add_argument("--replications", type=int)
    p.add_argument("--n-jobs", type=int)
    p.set_defaults(func=cmd_experiment)

    p = common(sub.add_parser("report", help="re-emit a saved JSON report"))
    p.add_argument("report")
    p.add_argument("--format", default="all")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "seed", None) is None and args.command in ("sample", "fit"):
        args.seed = 0
    try:
        args.func(args)
    except (ValueError, TypeError, FileNotFoundError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
