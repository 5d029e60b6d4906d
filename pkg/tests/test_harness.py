import csv
import io
import json
from pathlib import Path

import numpy as np
import pytest

from stringgp.cli import main
from stringgp.harness import (
    ExperimentReport,
    ParseError,
    aggregate,
    compute_metrics,
    emit_report,
    gen_synthetic,
    load_csv,
    load_motorcycle,
    preset,
    render,
    run_experiment,
    validate_config,
)
from stringgp.harness.experiments import make_split, replication_seeds
from stringgp.harness.metrics import mae, rr_std
from stringgp.hyperopt import ConfigurationError
from stringgp.regression import Prediction


def small_config(**over):
    cfg = {
        "schema": 1,
        "name": "tiny",
        "dataset": {"source": "synthetic", "function": "f0", "step": 1 / 60, "noise_std": 1e-2,
                    "domain": [0.0, 1.0]},
        "split": {"policy": "preset"},
        "models": [{"label": "SE", "kind": "gp", "family": "se"},
                   {"label": "S2", "kind": "string", "family": "se", "n_strings": 2, "warm_start": "SE"}],
        "search": {"restarts": 1, "max_evals": 80},
        "compare": [["S2", "SE"]],
        "replications": 2,
        "seed": 3,
        "plot": {"grid": 11},
    }
    cfg.update(over)
    return cfg


def test_synthetic_examples():
    ds = gen_synthetic("f0")
    X = ds.X
    at = lambda t: ds.y[np.argmin(np.abs(X - t))]
    assert abs(at(0.25)) < 1e-12
    assert abs(at(0.5)) < 1e-12
    assert abs(gen_synthetic("f1").y[np.argmin(np.abs(X - 0.75))]) < 1e-12
    assert ds.n == 301 and ds.train_mask.sum() == 151


def test_synthetic_formulas_random_points():
    t = np.random.default_rng(0).uniform(0, 1, 1000)
    g0 = gen_synthetic("f0", grid=t).y
    g1 = gen_synthetic("f1", grid=t).y
    e0 = np.where(t <= 0.5, np.sin(60 * np.pi * t), 15 / 4 * np.sin(16 * np.pi * t))
    e1 = np.where(t <= 0.5, np.sin(16 * np.pi * t), 0.5 * np.sin(32 * np.pi * t))
    assert np.max(np.abs(g0 - e0)) <= 1e-14
    assert np.max(np.abs(g1 - e1)) <= 1e-14


def test_synthetic_2d_preset():
    ds = gen_synthetic("f2")
    assert ds.X.shape == (61 * 61, 2)
    u, v = ds.X[ds.train_mask].T
    assert not np.any((u > 0.4 + 1e-9) & (u < 0.6 - 1e-9))
    f3 = gen_synthetic("f3", mesh=0.1)
    a = gen_synthetic("f0", grid=f3.X[:, 0]).y
    b = gen_synthetic("f1", grid=f3.X[:, 1]).y
    assert np.allclose(f3.y, np.sqrt(a**2 + b**2), atol=1e-14)


def test_synthetic_noise_only_on_training():
    ds = gen_synthetic("f1", noise_std=0.1, seed=1)
    exact = ds.meta["exact"]
    assert np.array_equal(ds.y[~ds.train_mask], exact[~ds.train_mask])
    assert not np.array_equal(ds.y[ds.train_mask], exact[ds.train_mask])


def test_synthetic_unknown_name():
    with pytest.raises(ValueError):
        gen_synthetic("f9")


def test_csv_xy_row(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("x,y\n10.0,-3.2\n")
    ds = load_csv(p)
    assert ds.X[0] == 10.0 and ds.y[0] == -3.2


def test_csv_bad_latitude(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("lat,lon,anomaly\n10,200,0.5\n91,10,0.1\n")
    with pytest.raises(ParseError) as info:
        load_csv(p, "latlon_anomaly")
    assert info.value.line == 3


def test_csv_longitude_wrap(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("Latitude,Longitude,Anomaly\n10,-30,0.5\n-5,370,0.1\n")
    ds = load_csv(p, "latlon_anomaly")
    assert np.allclose(ds.X, [[10, 330], [-5, 10]])


def test_csv_malformed_line_number(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("x,y\n1,2\n3,abc\n")
    with pytest.raises(ParseError, match="line 3"):
        load_csv(p)
    p.write_text("x,y\n1,2\n3\n")
    with pytest.raises(ParseError):
        load_csv(p)


def test_motorcycle_bundled():
    ds = load_motorcycle()
    assert ds.n == 133 and ds.ndim == 1
    assert ds.X.min() >= 0 and ds.X.max() <= 60


def test_metric_definitions():
    rng = np.random.default_rng(2)
    m, y = rng.standard_normal(20), rng.standard_normal(20)
    sd = rng.uniform(0.5, 2, 20)
    assert abs(mae(m, y) - np.abs(m - y).mean()) <= 1e-12
    assert abs(rr_std(sd) - (sd.max() - sd.min()) / sd.mean()) <= 1e-12
    pred = Prediction(m, sd**2 - 0.1, sd**2)
    rep = compute_metrics("M", 0, 5, 100, pred, y, -10.0, -3.0)
    assert abs(rep.mae - np.abs(m - y).mean()) <= 1e-12
    assert abs(rep.avg_std - sd.mean()) <= 1e-12
    assert abs(rep.rr_std - (sd.max() - sd.min()) / sd.mean()) <= 1e-12


def test_empty_test_set_leaves_fields_absent():
    rep = compute_metrics("M", 0, 1, 10, None, np.array([]), -5.0)
    d = rep.to_dict()
    for k in ("mae", "predictive_loglik", "avg_std", "rr_std"):
        assert k not in d
    assert d["training_loglik"] == -5.0


def test_aggregate_mean_two_std():
    reps = [compute_metrics("A", i, i, 10, None, None, float(v)) for i, v in enumerate([1.0, 2.0, 4.0])]
    agg = aggregate(reps)["A"]["training_loglik"]
    assert agg["mean"] == pytest.approx(7 / 3)
    assert agg["two_std"] == pytest.approx(2 * np.std([1.0, 2.0, 4.0], ddof=1))


def test_config_validation_errors():
    validate_config(small_config())
    for bad in (
        small_config(schema=2),
        small_config(models=[{"label": "A", "kind": "gp", "family": "se"}] * 2),
        small_config(models=[{"label": "A", "kind": "gp", "family": "se", "warm_start": "B"}]),
        small_config(models=[{"label": "A", "kind": "string", "family": "se"}]),
        small_config(compare=[["A", "SE"]]),
        small_config(replications=0),
    ):
        with pytest.raises(ConfigurationError):
            validate_config(bad)


def test_presets_validate():
    for name in ("f0", "f1", "f2", "f3", "motorcycle", "temperature"):
        validate_config(preset(name))
    with pytest.raises(ConfigurationError):
        preset("nope")


def test_split_reproducible():
    ds = load_motorcycle()
    seeds = replication_seeds(0, 3)
    a = make_split(ds, {"policy": "random_holdout", "n_test": 5}, int(seeds[1]))
    b = make_split(ds, {"policy": "random_holdout", "n_test": 5}, int(seeds[1]))
    c = make_split(ds, {"policy": "random_holdout", "n_test": 5}, int(seeds[2]))
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
    assert not np.array_equal(a[1], c[1])
    assert a[1].sum() == 5 and np.all(a[0] ^ a[1])


def test_end_to_end_reproducible_and_byte_stable(tmp_path):
    r1 = run_experiment(small_config())
    r2 = run_experiment(small_config(), n_jobs=2)
    assert render(r1, "json") == render(r2, "json")
    assert render(r1, "csv") == render(r2, "csv")
    back = ExperimentReport.from_dict(json.loads(render(r1, "json")["tiny.json"]))
    assert render(back, "csv") == render(r1, "csv")
    paths = emit_report(r1, "csv", tmp_path)
    assert [Path(p).name for p in paths] == ["tiny_comparisons.csv", "tiny_runs.csv", "tiny_summary.csv"]


def test_plotdata_bands():
    files = render(run_experiment(small_config(replications=1)), "plotdata")
    rows = list(csv.DictReader(io.StringIO(files["tiny_bands.csv"])))
    post = [r for r in rows if r["series"] in ("SE", "S2")]
    assert len(post) == 22
    for r in post:
        m, lo, hi = float(r["mean"]), float(r["lo"]), float(r["hi"])
        assert lo <= m <= hi
        assert abs((m - lo) - (hi - m)) <= 1e-9 * max(1.0, abs(m))


def test_experiment_error_carries_context():
    cfg = small_config(models=[{"label": "Bad", "kind": "string", "family": "linear",
                                "boundaries": [0.0, 0.5, 1.0]}], compare=[])
    with pytest.raises(Exception, match="tiny: replication 0"):
        run_experiment(cfg)


def test_cli_kernel_eval_and_sample(tmp_path, capsys):
    assert main(["kernel-eval", "--family", "se", "--param", "variance=1", "--param", "lengthscale=1",
                 "0", "1"]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert float(rows[0]["k"]) == pytest.approx(np.exp(-0.5))
    assert main(["sample", "--family", "matern52", "--param", "variance=1", "--param", "lengthscale=0.3",
                 "--boundaries", "0:1:3", "--times", "0:1:11", "--n-draws", "2", "--seed", "4",
                 "--out-dir", str(tmp_path)]) == 0
    rows = list(csv.DictReader(open(tmp_path / "samples.csv")))
    assert len(rows) == 22 and set(rows[0]) == {"time", "z", "z_prime", "string_index", "draw_id"}


def test_cli_fit_predict_roundtrip(tmp_path):
    x = np.linspace(0, 1, 30)
    data = tmp_path / "d.csv"
    data.write_text("x,y\n" + "".join(f"{a!r},{float(np.sin(6 * a))!r}\n" for a in x.tolist()))
    assert main(["fit", "--data", str(data), "--kind", "string", "--family", "se", "--n-strings", "2",
                 "--restarts", "1", "--max-evals", "100", "--seed", "0", "--out-dir", str(tmp_path)]) == 0
    assert main(["predict", "--model", str(tmp_path / "model.json"), "--at", "0:1:5", "--gradient",
                 "--out-dir", str(tmp_path)]) == 0
    rows = list(csv.DictReader(open(tmp_path / "predictions.csv")))
    assert len(rows) == 5 and "d_dx" in rows[0]
    assert abs(float(rows[2]["mean"]) - np.sin(3.0)) < 0.1


def test_cli_errors_exit_2(tmp_path, capsys):
    assert main(["fit", "--data", str(tmp_path / "missing.csv"), "--family", "se"]) == 2
    assert "error:" in capsys.readouterr().err
    assert main(["kernel-eval", "--family", "linear", "--boundaries", "0,1", "0", "0.5"]) == 2


def test_cli_experiment_and_report(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(small_config(replications=1)))
    assert main(["experiment", "--config", str(cfg), "--format", "json", "--out-dir", str(tmp_path)]) == 0
    out = tmp_path / "again"
    assert main(["report", str(tmp_path / "tiny.json"), "--format", "csv", "--out-dir", str(out)]) == 0
    assert (out / "tiny_summary.csv").exists()
