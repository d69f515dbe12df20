"""Discrete probability measures on R^d: construction, file I/O, quantiles."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

import numpy as np

from .exceptions import ValidationError

WEIGHT_SUM_TOL = 1e-6


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Finitely supported probability measure.

    Parameters
    ----------
    points : array-like, shape (n, d) or (n,)
        Support points. A 1D array is read as ``n`` points on the line.
    weights : array-like, shape (n,)
        Positive masses. They are renormalized when their sum is within
        ``1e-6`` of one; otherwise construction fails.

    Duplicate points (exact coordinate equality) are merged and their masses
    summed. Atom order is the order of first appearance.
    """

    points: np.ndarray
    weights: np.ndarray
    dim: int = field(init=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        w = np.asarray(self.weights, dtype=float).ravel()
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[1] < 1:
            raise ValidationError("points must be a (n, d) array")
        if pts.shape[0] == 0:
            raise ValidationError("a measure needs at least one atom")
        if pts.shape[0] != w.shape[0]:
            raise ValidationError(
                f"{pts.shape[0]} points but {w.shape[0]} weights")
        if not (np.all(np.isfinite(pts)) and np.all(np.isfinite(w))):
            raise ValidationError("points and weights must be finite")
        if np.any(w <= 0):
            raise ValidationError("weights must be strictly positive")
        total = float(math.fsum(w))
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise ValidationError(f"weights sum to {total!r}, expected 1")

        # exact-equality merge, first-appearance order
        _, first, inverse = np.unique(
            pts, axis=0, return_index=True, return_inverse=True)
        inverse = inverse.ravel()
        if len(first) < len(pts):
            order = np.argsort(first)
            rank = np.empty_like(order)
            rank[order] = np.arange(len(order))
            merged = np.zeros(len(first))
            np.add.at(merged, rank[inverse], w)
            pts = pts[np.sort(first)]
            w = merged
        w = w / math.fsum(w)

        object.__setattr__(self, "points", _readonly(np.ascontiguousarray(pts)))
        object.__setattr__(self, "weights", _readonly(w))
        object.__setattr__(self, "dim", int(pts.shape[1]))

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def n_atoms(self) -> int:
        return self.points.shape[0]

    def __repr__(self) -> str:
        return f"DiscreteMeasure(dim={self.dim}, n_atoms={self.n_atoms})"

    def mean(self) -> np.ndarray:
        return self.weights @ self.points

    def sorted(self) -> "DiscreteMeasure":
        """Copy with atoms in lexicographic order (1D: increasing)."""
        order = np.lexsort(self.points.T[::-1])
        return DiscreteMeasure(self.points[order], self.weights[order])

    def allclose(self, other: "DiscreteMeasure", atol: float = 1e-9) -> bool:
        """Compare as measures (atom order ignored)."""
        if self.dim != other.dim or self.n_atoms != other.n_atoms:
            return False
        a, b = self.sorted(), other.sorted()
        return bool(np.allclose(a.points, b.points, rtol=0, atol=atol)
                    and np.allclose(a.weights, b.weights, rtol=0, atol=atol))

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "atoms": [{"x": [float(v) for v in x], "w": float(w)}
                      for x, w in zip(self.points, self.weights)],
        }


def dirac(x) -> DiscreteMeasure:
    return DiscreteMeasure(np.atleast_2d(np.asarray(x, dtype=float)), [1.0])


def uniform(points) -> DiscreteMeasure:
    pts = np.asarray(points, dtype=float)
    n = pts.shape[0]
    return DiscreteMeasure(pts, np.full(n, 1.0 / n))


def merge_close_atoms(points: np.ndarray, weights: np.ndarray,
                      atol: float) -> DiscreteMeasure:
    """Build a measure, aggregating atoms closer than ``atol``.

    Atoms are visited in order; each joins the first earlier representative
    within ``atol`` (Euclidean distance).
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    weights = np.asarray(weights, dtype=float)
    reps: list[np.ndarray] = []
    mass: list[float] = []
    for x, w in zip(points, weights):
        for k, r in enumerate(reps):
            if np.linalg.norm(x - r) <= atol:
                mass[k] += w
                break
        else:
            reps.append(x)
            mass.append(float(w))
    return DiscreteMeasure(np.array(reps), np.array(mass))


# ---------------------------------------------------------------------------
# file formats

def _fmt(v: float) -> str:
    return f"{float(v):.17g}"


def _parse_csv(text: str) -> tuple[np.ndarray, np.ndarray]:
    rows = []
    dim = None
    for lineno, rec in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not rec or all(not c.strip() for c in rec):
            continue
        if len(rec) < 2:
            raise ValidationError(f"line {lineno}: expected x1,...,xd,w")
        try:
            vals = [float(c) for c in rec]
        except ValueError as exc:
            raise ValidationError(f"line {lineno}: {exc}") from None
        if dim is None:
            dim = len(vals) - 1
        elif len(vals) - 1 != dim:
            raise ValidationError(
                f"line {lineno}: dimension {len(vals) - 1}, expected {dim}")
        rows.append(vals)
    if not rows:
        raise ValidationError("empty measure file")
    arr = np.array(rows)
    return arr[:, :-1], arr[:, -1]


def _parse_json(text: str) -> tuple[np.ndarray, np.ndarray]:
    try:
        obj = json.loads(text)
        dim = int(obj["dim"])
        atoms = obj["atoms"]
        pts = [[float(v) for v in a["x"]] for a in atoms]
        w = [float(a["w"]) for a in atoms]
    except (ValueError, KeyError, TypeError) as exc:
        raise ValidationError(f"malformed measure JSON: {exc}") from None
    if dim < 1 or any(len(x) != dim for x in pts):
        raise ValidationError("inconsistent dimension in measure JSON")
    if not pts:
        raise ValidationError("empty measure file")
    return np.array(pts), np.array(w)


def load_measure(source, format: str | None = None) -> DiscreteMeasure:
    """Read a measure from a file path, an open stream, or raw bytes.

    ``format`` is ``"csv"`` or ``"json"``; when omitted it is inferred from
    the file suffix, falling back to sniffing for a leading ``{``.
    """
    name = None
    if isinstance(source, (str, os.PathLike)):
        name = os.fspath(source)
        with open(name, "rb") as fh:
            raw = fh.read()
    elif hasattr(source, "read"):
        raw = source.read()
    else:
        raw = bytes(source)
    text = raw.decode("utf-8") if isinstance(raw, bytes) else raw
    if format is None:
        if name and name.lower().endswith(".json"):
            format = "json"
        elif name and name.lower().endswith(".csv"):
            format = "csv"
        else:
            format = "json" if text.lstrip().startswith("{") else "csv"
    if format == "csv":
        pts, w = _parse_csv(text)
    elif format == "json":
        pts, w = _parse_json(text)
    else:
        raise ValidationError(f"unknown measure format {format!r}")
    return DiscreteMeasure(pts, w)


def dump_measure(measure: DiscreteMeasure, fh: IO[str],
                 format: str = "json") -> None:
    """Write ``measure`` with 17 significant digits (round-trip exact)."""
    if format == "json":
        json.dump(measure.to_dict(), fh)
        fh.write("\n")
    elif format == "csv":
        for x, w in zip(measure.points, measure.weights):
            fh.write(",".join(_fmt(v) for v in (*x, w)) + "\n")
    else:
        raise ValidationError(f"unknown measure format {format!r}")


# ---------------------------------------------------------------------------
# Gaussian discretization and quantiles

def normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def normal_ppf(y: float, tol: float = 1e-12) -> float:
    """Standard normal inverse CDF by bisection on ``normal_cdf``."""
    if not 0.0 < y < 1.0:
        raise ValidationError(f"level {y!r} outside (0, 1)")
    if y == 0.5:
        return 0.0
    if y < 0.5:
        return -normal_ppf(1.0 - y, tol)
    lo, hi = 0.0, 1.0
    while normal_cdf(hi) < y:
        lo, hi = hi, 2.0 * hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if normal_cdf(mid) < y:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def midpoint_levels(m: int) -> np.ndarray:
    """Levels (k - 1/2)/m, k = 1..m."""
    if m < 1:
        raise ValidationError("resolution must be positive")
    return (np.arange(1, m + 1) - 0.5) / m


def discretize_gaussian(mean: float, std: float, n: int) -> DiscreteMeasure:
    """Quantile-midpoint discretization of N(mean, std^2) with ``n`` atoms."""
    if not std > 0:
        raise ValidationError("std must be positive")
    if n < 1:
        raise ValidationError("n must be positive")
    levels = midpoint_levels(n)
    # symmetric levels share one bisection
    z = np.array([normal_ppf(y) for y in levels[: (n + 1) // 2]])
    full = np.concatenate([z, -z[: n // 2][::-1]])
    return DiscreteMeasure(mean + std * full, np.full(n, 1.0 / n))


def _check_1d(measure: DiscreteMeasure) -> None:
    if measure.dim != 1:
        raise ValidationError(f"expected a 1D measure, got dim={measure.dim}")


def quantile_function(measure: DiscreteMeasure, ys) -> np.ndarray:
    """Vectorized generalized inverse ``F^{-1}(y) = inf{x : F(x) >= y}``."""
    _check_1d(measure)
    ys = np.asarray(ys, dtype=float)
    if np.any((ys <= 0) | (ys >= 1)):
        raise ValidationError("quantile levels must lie in (0, 1)")
    order = np.argsort(measure.points[:, 0], kind="stable")
    xs = measure.points[order, 0]
    cw = np.cumsum(measure.weights[order])
    cw[-1] = 1.0
    idx = np.searchsorted(cw, ys, side="left")
    return xs[np.minimum(idx, len(xs) - 1)]


def quantile(measure: DiscreteMeasure, y: float) -> float:
    return float(quantile_function(measure, np.array([y]))[0])


@dataclass(frozen=True, eq=False)
class QuantileGrid:
    """Inverse-CDF samples at the midpoint levels ``(k - 1/2)/m``."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float).ravel()
        if v.size == 0:
            raise ValidationError("empty quantile grid")
        object.__setattr__(self, "values", _readonly(v))

    @property
    def m(self) -> int:
        return self.values.size

    @property
    def levels(self) -> np.ndarray:
        return midpoint_levels(self.m)

    def is_monotone(self) -> bool:
        return bool(np.all(np.diff(self.values) >= 0))

    def to_measure(self) -> DiscreteMeasure:
        """Measure with ``m`` equal-mass atoms at the grid values."""
        return DiscreteMeasure(self.values, np.full(self.m, 1.0 / self.m))

    @classmethod
    def of(cls, measure: DiscreteMeasure, m: int) -> "QuantileGrid":
        return cls(quantile_function(measure, midpoint_levels(m)))


def common_dim(measures: Sequence[DiscreteMeasure]) -> int:
    """Common dimension of ``measures`` (raises when they disagree)."""
    dims = {mu.dim for mu in measures}
    if len(dims) != 1:
        raise ValidationError(f"marginals have mixed dimensions {sorted(dims)}")
    return dims.pop()


def as_measures(items: Iterable) -> list[DiscreteMeasure]:
    out = []
    for it in items:
        if not isinstance(it, DiscreteMeasure):
            raise ValidationError(f"expected DiscreteMeasure, got {type(it).__name__}")
        out.append(it)
    return out
