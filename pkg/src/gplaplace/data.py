"""Benchmark datasets: GP prior samples, the ten-point linear set, CSV I/O."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import DataError, GenerationError, NotPositiveDefiniteError
from .kernels import param_layout, parse_kernel, render
from .model import Dataset, GPModel, noisy_gram, jittered_cholesky

__all__ = [
    "GENERATORS",
    "SIZE_PRESETS",
    "GeneratorSpec",
    "Normalization",
    "sample_from_gp_prior",
    "linear_benchmark_dataset",
    "normalize",
    "load_csv",
    "write_csv",
]

GENERATORS = ("LIN", "SE", "MAT32", "SE+SE")
SIZE_PRESETS = (5, 10, 20, 30, 40, 50, 100, 200)

_LINEAR_Y = (
    0.106470838606225,
    0.151844221539413,
    0.296365731603068,
    0.406171032190665,
    0.0893660808707719,
    0.496633373724801,
    1.3649612419355,
    0.576025393790963,
    1.03487772075105,
    1.08454376768281,
)


@dataclass(frozen=True)
class GeneratorSpec:
    """Recipe for a dataset drawn from a GP prior.

    All raw hyperparameters are 0, i.e. every constrained value is
    ``softplus(0) = log 2``.
    """

    kernel: str
    n: int
    seed: int = 0
    low: float = -2.5
    high: float = 2.5

    def __post_init__(self):
        if self.kernel not in GENERATORS:
            raise DataError(f"unknown generator {self.kernel!r}; choose from {GENERATORS}")
        if self.n < 2:
            raise DataError("generated datasets need n >= 2")
        if not (np.isfinite(self.low) and np.isfinite(self.high) and self.low < self.high):
            raise DataError(f"invalid input range [{self.low}, {self.high}]")

    def to_dict(self):
        return {"kernel": self.kernel, "n": self.n, "seed": self.seed,
                "low": self.low, "high": self.high, "raw_init": 0.0}


def sample_from_gp_prior(spec, x=None, size=None):
    """Draw targets from ``N(0, K + noise I)`` at raw hyperparameters 0.

    ``x`` overrides the evenly spaced inputs.  With ``size`` set, returns an
    array of ``size`` replicate target vectors instead of a Dataset.
    """
    expr = parse_kernel(spec.kernel)
    model = GPModel(expr)
    x = np.linspace(spec.low, spec.high, spec.n) if x is None else np.asarray(x, float)
    raw = np.zeros(len(param_layout(expr)))
    C, _ = noisy_gram(model, raw, x)
    try:
        L, _ = jittered_cholesky(C, model.jitter)
    except NotPositiveDefiniteError as exc:
        raise GenerationError(str(exc)) from exc
    rng = np.random.default_rng(spec.seed)
    if size is not None:
        return rng.standard_normal((size, x.size)) @ L.T
    y = L @ rng.standard_normal(x.size)
    return Dataset(x, y, meta={"generator": spec.to_dict(), "kernel": render(expr)})


def linear_benchmark_dataset():
    """Ten noisy points of ``y = x`` on an even grid over [0, 1]."""
    x = np.arange(10) / 9.0
    return Dataset(x, np.array(_LINEAR_Y), meta={"name": "linear-benchmark"})


@dataclass(frozen=True)
class Normalization:
    mean: float
    std: float

    def apply(self, y):
        return (np.asarray(y) - self.mean) / self.std

    def invert(self, y):
        return np.asarray(y) * self.std + self.mean


def normalize(data):
    """Zero-mean, unit (population) standard deviation targets.

    Returns
    -------
    Dataset, Normalization
    """
    if data.n < 2:
        raise DataError("normalisation needs at least two points")
    mean = float(np.mean(data.y))
    std = float(np.std(data.y))
    if not std > 0:
        raise DataError("targets have zero variance")
    t = Normalization(mean, std)
    meta = dict(data.meta, normalization={"mean": mean, "std": std})
    return Dataset(data.x, t.apply(data.y), meta=meta), t


def load_csv(path_or_file):
    """Read two numeric columns ``x, y``; an optional header row is skipped.

    Rows are returned sorted by ``x`` (stable, duplicates kept).  Error
    messages give 1-based line numbers counted after the header.
    """
    if hasattr(path_or_file, "read"):
        text = path_or_file.read()
    else:
        with open(path_or_file, newline="", encoding="utf-8") as fh:
            text = fh.read()
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError("CSV file is empty")

    def numeric(row):
        try:
            return [float(c) for c in row]
        except ValueError:
            return None

    def is_number(cell):
        try:
            float(cell)
        except ValueError:
            return False
        return True

    if not any(is_number(c) for c in rows[0]):
        rows = rows[1:]
    if not rows:
        raise DataError("CSV file has a header but no data")
    xs, ys = [], []
    for line, row in enumerate(rows, start=1):
        vals = numeric(row)
        if vals is None or len(vals) != 2:
            raise DataError(f"malformed row at line {line}: {','.join(row)!r}")
        xs.append(vals[0])
        ys.append(vals[1])
    x, y = np.array(xs), np.array(ys)
    order = np.argsort(x, kind="stable")
    return Dataset(x[order], y[order])


def write_csv(data, path_or_file):
    """Write ``x,y`` with a header; ``repr`` keeps floats round-trippable."""
    lines = ["x,y"] + [f"{float(a)!r},{float(b)!r}" for a, b in zip(data.x, data.y)]
    text = "\n".join(lines) + "\n"
    if hasattr(path_or_file, "write"):
        path_or_file.write(text)
    else:
        with open(path_or_file, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
