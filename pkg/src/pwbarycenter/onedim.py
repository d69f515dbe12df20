"""Barycenters on the line through quantile functions.

On R the p-Wasserstein barycenter has inverse distribution function
G^{-1}(y) = xbar_p(F_1^{-1}(y), ..., F_N^{-1}(y)), the pointwise p-barycenter
of the input quantiles; as p -> 1 (odd N) it tends to their median and as
p -> inf to their midrange.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exceptions import ValidationError
from .measures import (DiscreteMeasure, QuantileGrid, discretize_gaussian,
                       midpoint_levels, quantile_function)
from .pbarycenter import solve_batch

ONE = "one"
INF = "inf"

# five Gaussians: four similar, one far away
FIGURE1_GAUSSIANS = ((0.0, 1.0), (0.5, 0.8), (-0.5, 1.2), (0.2, 0.9), (10.0, 0.5))
# three general Gaussians
FIGURE2_GAUSSIANS = ((-4.0, 1.0), (0.0, 0.5), (3.0, 2.0))
FIGURE_P = (ONE, 1.1, 2.0, 10.0, INF)


def parse_p(p):
    """Accept a float in (1, inf) or the limit symbols ``"one"`` / ``"inf"``."""
    if isinstance(p, str):
        key = p.strip().lower()
        if key in ("one", "1"):
            return ONE
        if key in ("inf", "infinity"):
            return INF
        try:
            p = float(key)
        except ValueError:
            raise ValidationError(f"cannot parse exponent {p!r}") from None
    p = float(p)
    if p == 1.0:
        return ONE
    if math.isinf(p) and p > 0:
        return INF
    if not 1.0 < p < math.inf:
        raise ValidationError(f"exponent p={p!r} must satisfy 1 < p < inf")
    return p


def p_label(p) -> str:
    p = parse_p(p)
    if p == ONE:
        return "1"
    if p == INF:
        return "inf"
    return f"{p:g}"


@dataclass(frozen=True, eq=False)
class OneDimProblem:
    marginals: Sequence[DiscreteMeasure]
    lam: np.ndarray = None
    p: object = 2.0
    m: int = 1000

    def __post_init__(self):
        margs = tuple(self.marginals)
        if not margs:
            raise ValidationError("need at least one marginal")
        if any(mu.dim != 1 for mu in margs):
            raise ValidationError("one-dimensional problems need dim = 1 marginals")
        N = len(margs)
        lam = np.full(N, 1.0 / N) if self.lam is None else \
            np.asarray(self.lam, dtype=float).ravel()
        if lam.shape != (N,) or np.any(lam <= 0) or abs(lam.sum() - 1) > 1e-12:
            raise ValidationError("lambda must hold N positive weights summing to 1")
        if int(self.m) < 1:
            raise ValidationError("quantile resolution m must be positive")
        object.__setattr__(self, "marginals", margs)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "p", parse_p(self.p))
        object.__setattr__(self, "m", int(self.m))

    @property
    def N(self) -> int:
        return len(self.marginals)

    @property
    def equal_weights(self) -> bool:
        return bool(np.allclose(self.lam, 1.0 / self.N, rtol=0, atol=1e-12))

    def quantile_matrix(self) -> np.ndarray:
        """F_i^{-1}(y_k), shape (m, N)."""
        y = midpoint_levels(self.m)
        return np.stack([quantile_function(mu, y) for mu in self.marginals], axis=1)


def barycenter_quantile(prob: OneDimProblem) -> QuantileGrid:
    """Quantiles of the p-barycenter at the levels (k - 1/2)/m."""
    if prob.p in (ONE, INF):
        return barycenter_quantile_limit(prob)
    Q = prob.quantile_matrix()
    z = solve_batch(Q[:, :, None], prob.lam, prob.p)[:, 0]
    return QuantileGrid(z)


def barycenter_quantile_limit(prob: OneDimProblem) -> QuantileGrid:
    """Median (p -> 1) or midrange (p -> inf) of the input quantiles.

    The p -> 1 limit is only defined here for equal weights and odd N.
    """
    Q = prob.quantile_matrix()
    if prob.p == ONE:
        if not prob.equal_weights:
            raise ValidationError("the p -> 1 limit needs equal weights")
        if prob.N % 2 == 0:
            raise ValidationError("the p -> 1 limit needs an odd number of marginals")
        return QuantileGrid(np.sort(Q, axis=1)[:, prob.N // 2])
    if prob.p == INF:
        return QuantileGrid(0.5 * (Q.min(axis=1) + Q.max(axis=1)))
    raise ValidationError("barycenter_quantile_limit expects p = 'one' or 'inf'")


def wp_1d(mu: DiscreteMeasure, nu: DiscreteMeasure, p: float, m: int | None = None) -> float:
    """W_p^p(mu, nu) = int_0^1 |F^{-1} - G^{-1}|^p dy, integrated exactly.

    Both quantile functions are constant between consecutive cumulative
    weights of either measure, so the integral is a finite sum. ``m`` is
    accepted for interface symmetry and ignored.
    """
    if mu.dim != 1 or nu.dim != 1:
        raise ValidationError("wp_1d needs two one-dimensional measures")
    cuts = np.union1d(np.cumsum(mu.sorted().weights), np.cumsum(nu.sorted().weights))
    # cuts within rounding of 0 or 1 would give midpoints that round onto them
    cuts = np.union1d(cuts[(cuts > 1e-14) & (cuts < 1.0 - 1e-14)], [0.0, 1.0])
    lengths = np.diff(cuts)
    keep = lengths > 0
    mids = 0.5 * (cuts[:-1] + cuts[1:])[keep]
    diff = np.abs(quantile_function(mu, mids) - quantile_function(nu, mids))
    return float(math.fsum(lengths[keep] * diff ** p))


def sup_distance(a: QuantileGrid, b: QuantileGrid) -> float:
    if a.m != b.m:
        raise ValidationError("quantile grids have different resolutions")
    return float(np.abs(a.values - b.values).max())


def limit_gaps(marginals: Sequence[DiscreteMeasure], p_values, limit, m: int) -> list[float]:
    """sup_k |G_p^{-1}(y_k) - G_limit^{-1}(y_k)| for each p in ``p_values``."""
    ref = barycenter_quantile_limit(OneDimProblem(marginals, None, limit, m))
    return [sup_distance(barycenter_quantile(OneDimProblem(marginals, None, p, m)), ref)
            for p in p_values]


@dataclass
class FigureData:
    """Quantile curves and histogram densities for a set of Gaussians."""

    levels: np.ndarray
    inputs: np.ndarray          # (m, N)
    barycenters: dict           # label -> (m,) values
    bin_edges: np.ndarray
    densities: dict             # label -> (n_bins,) histogram densities

    def quantile_header(self) -> list[str]:
        N = self.inputs.shape[1]
        return (["y"] + [f"Finv_{i + 1}" for i in range(N)]
                + [f"Ginv_p{lab}" for lab in self.barycenters])

    def write_quantiles(self, fh) -> None:
        fh.write(",".join(self.quantile_header()) + "\n")
        cols = [self.levels, *self.inputs.T, *self.barycenters.values()]
        for row in zip(*cols):
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")

    def write_histograms(self, fh) -> None:
        fh.write(",".join(["bin_left", "bin_right"]
                          + [f"density_p{lab}" for lab in self.densities]) + "\n")
        cols = [self.bin_edges[:-1], self.bin_edges[1:], *self.densities.values()]
        for row in zip(*cols):
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")

    def quantile_csv(self) -> str:
        buf = io.StringIO()
        self.write_quantiles(buf)
        return buf.getvalue()


def emit_figure_data(gaussians, p_list=FIGURE_P, n: int = 200, m: int = 200,
                     bin_width: float = 0.25) -> FigureData:
    """Barycenter quantile curves of discretized Gaussians for several p.

    Each ``(mean, std)`` pair is discretized with ``n`` quantile-midpoint
    atoms; curves are sampled at ``m`` midpoint levels with equal weights.
    Histogram densities of every barycenter (``m`` equal-mass atoms) share
    bins of width ``bin_width``.
    """
    if not bin_width > 0:
        raise ValidationError("bin_width must be positive")
    margs = [discretize_gaussian(mu, s, n) for mu, s in gaussians]
    prob_inputs = OneDimProblem(margs, None, 2.0, m)
    curves = {}
    for p in p_list:
        grid = barycenter_quantile(OneDimProblem(margs, None, p, m))
        curves[p_label(p)] = grid.values
    allv = np.concatenate(list(curves.values()))
    lo = math.floor(allv.min() / bin_width) * bin_width
    hi = math.ceil(allv.max() / bin_width) * bin_width
    if hi <= lo:
        hi = lo + bin_width
    edges = lo + bin_width * np.arange(int(round((hi - lo) / bin_width)) + 1)
    dens = {lab: np.histogram(v, bins=edges, density=True)[0] for lab, v in curves.items()}
    return FigureData(midpoint_levels(m), prob_inputs.quantile_matrix(), curves, edges, dens)
