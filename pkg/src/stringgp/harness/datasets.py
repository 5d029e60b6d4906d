"""Datasets: synthetic test functions, CSV ingestion and the bundled motorcycle data."""

import csv
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

__all__ = [
    "Dataset",
    "ParseError",
    "SYNTHETIC",
    "f0",
    "f1",
    "f2",
    "f3",
    "gen_synthetic",
    "load_csv",
    "load_motorcycle",
]


class ParseError(ValueError):
    def __init__(self, message, line=None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


@dataclass
class Dataset:
    X: np.ndarray                 # (n,) for 1-D inputs, (n, d) otherwise
    y: np.ndarray
    train_mask: np.ndarray = None
    source: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=float).ravel()
        if len(self.X) != self.y.size:
            raise ValueError(f"{len(self.X)} inputs but {self.y.size} targets")
        if not (np.all(np.isfinite(self.X)) and np.all(np.isfinite(self.y))):
            raise ValueError("dataset contains NaN or infinite values")
        if self.train_mask is not None:
            self.train_mask = np.asarray(self.train_mask, dtype=bool)

    @property
    def n(self):
        return self.y.size

    @property
    def ndim(self):
        return 1 if self.X.ndim == 1 else self.X.shape[1]

    def subset(self, idx):
        return Dataset(self.X[idx], self.y[idx], None, self.source, dict(self.meta))

    def train(self):
        return self.subset(self.train_mask) if self.train_mask is not None else self

    def test(self):
        return self.subset(~self.train_mask) if self.train_mask is not None else self.subset(slice(0, 0))


# -- synthetic functions ---------------------------------------------------

def f0(t):
    t = np.asarray(t, dtype=float)
    return np.where(t <= 0.5, np.sin(60 * np.pi * t), 3.75 * np.sin(16 * np.pi * t))


def f1(t):
    t = np.asarray(t, dtype=float)
    return np.where(t <= 0.5, np.sin(16 * np.pi * t), 0.5 * np.sin(32 * np.pi * t))


def f2(u, v):
    return f0(u) * f1(v)


def f3(u, v):
    return np.sqrt(f0(u) ** 2 + f1(v) ** 2)


SYNTHETIC = {"f0": f0, "f1": f1, "f2": f2, "f3": f3}


def _grid_1d(step):
    n = int(round(1.0 / step))
    if n < 1 or abs(n * step - 1.0) > 1e-9:
        raise ValueError(f"grid step {step} must divide 1")
    return np.arange(n + 1) / n


def _in_union(t, pieces):
    out = np.zeros(t.shape, dtype=bool)
    for lo, hi in pieces:
        out |= (t >= lo - 1e-12) & (t <= hi + 1e-12)
    return out


def gen_synthetic(name, step=None, mesh=None, grid=None, train=None, noise_std=0.0, seed=None):
    """Exact values of a synthetic function on a grid, with a training mask.

    One-dimensional functions default to the grid of step ``1/300`` on
    ``[0, 1]`` with training restricted to ``[0.25, 0.75]``; two-dimensional
    ones to a ``1/60`` mesh of the unit square with training on
    ``([0, 0.4] u [0.6, 1])^2``. ``train`` overrides the training pieces (a
    list of ``(lo, hi)`` intervals, applied per coordinate). Noise, if any, is
    added to the training targets only.
    """
    if name not in SYNTHETIC:
        raise ValueError(f"unknown synthetic function {name!r}; expected one of {sorted(SYNTHETIC)}")
    two_d = name in ("f2", "f3")
    if grid is None:
        s = mesh if two_d else step
        g = _grid_1d(s or (1 / 60 if two_d else 1 / 300))
    else:
        g = np.asarray(grid, dtype=float)
    if np.any(g < 0) or np.any(g > 1):
        raise ValueError("synthetic grids must lie in [0, 1]")
    if train is None:
        train = [(0.0, 0.4), (0.6, 1.0)] if two_d else [(0.25, 0.75)]
    if two_d:
        if g.ndim == 1:
            U, V = np.meshgrid(g, g, indexing="ij")
            X = np.column_stack([U.ravel(), V.ravel()])
        else:
            X = g
        y = SYNTHETIC[name](X[:, 0], X[:, 1])
        mask = _in_union(X[:, 0], train) & _in_union(X[:, 1], train)
    else:
        X = g.ravel()
        y = SYNTHETIC[name](X)
        mask = _in_union(X, train)
    y = np.asarray(y, dtype=float)
    meta = {"function": name, "noise_std": float(noise_std), "train_pieces": [list(p) for p in train]}
    if noise_std:
        rng = np.random.default_rng(seed)
        y = y.copy()
        y[mask] += noise_std * rng.standard_normal(int(mask.sum()))
        meta["exact"] = SYNTHETIC[name](X[:, 0], X[:, 1]) if two_d else SYNTHETIC[name](X)
    return Dataset(X, y, mask, f"synthetic:{name}", meta)


# -- CSV --------------------------------------------------------------------

_LAT = ("lat", "latitude")
_LON = ("lon", "long", "longitude")
_VAL = ("anomaly", "value", "temp", "temperature")


def _float(cell, line, col):
    try:
        v = float(cell)
    except ValueError:
        raise ParseError(f"column {col!r}: cannot parse {cell!r} as a number", line) from None
    if not np.isfinite(v):
        raise ParseError(f"column {col!r}: non-finite value {cell!r}", line)
    return v


def _pick(header, names, what):
    low = [h.strip().lower() for h in header]
    for n in names:
        if n in low:
            return low.index(n)
    raise ParseError(f"header has no {what} column (expected one of {list(names)})", 1)


def load_csv(path, schema="xy"):
    """Read a headed CSV file.

    ``xy``: two columns, input then target. ``latlon_anomaly``: columns named
    lat/latitude, lon/longitude and anomaly (any order); inputs are
    ``(lat, lon)`` with longitude wrapped into ``[0, 360)``.
    """
    if schema not in ("xy", "latlon_anomaly"):
        raise ValueError(f"unknown CSV schema {schema!r}")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError("empty file", 1)
    header = rows[0]
    if schema == "xy":
        if len(header) != 2:
            raise ParseError(f"xy schema needs 2 columns, header has {len(header)}", 1)
        cols = (0, 1)
        names = [h.strip() for h in header]
    else:
        cols = (_pick(header, _LAT, "latitude"), _pick(header, _LON, "longitude"),
                _pick(header, _VAL, "anomaly"))
        names = [header[c].strip() for c in cols]
    data = []
    for line, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(row)}", line)
        vals = [_float(row[c], line, names[i]) for i, c in enumerate(cols)]
        if schema == "latlon_anomaly":
            if not -90.0 <= vals[0] <= 90.0:
                raise ParseError(f"latitude {vals[0]} outside [-90, 90]", line)
            vals[1] = vals[1] % 360.0
        data.append(vals)
    if not data:
        raise ParseError("no data rows", 2)
    arr = np.array(data)
    X = arr[:, 0] if schema == "xy" else arr[:, :2]
    return Dataset(X, arr[:, -1], None, f"csv:{path}", {"columns": names, "schema": schema})


def load_motorcycle():
    """The 133-row motorcycle crash accelerometer data (time in ms, acceleration in g)."""
    ref = resources.files("stringgp").joinpath("data/mcycle.csv")
    with resources.as_file(ref) as p:
        ds = load_csv(p, "xy")
    ds.source = "bundled:mcycle"
    return ds
