"""Structural checks on transport plans."""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .mmot import TransportPlan, cost_tensor
from .pbarycenter import convex_weights

MAX_FULL_SWAP_N = 12
DEFAULT_PAIR_BUDGET = 20_000
_TENSOR_LIMIT = 2_000_000


@dataclass
class MonotonicityReport:
    pairs_checked: int
    violations: list
    max_deficit: float
    tolerance: float
    sampled: bool = False

    @property
    def n_violations(self) -> int:
        return len(self.violations)

    def to_dict(self) -> dict:
        return {
            "pairs_checked": self.pairs_checked,
            "n_violations": self.n_violations,
            "violations": self.violations,
            "max_deficit": self.max_deficit,
            "tolerance": self.tolerance,
            "sampled": self.sampled,
        }


def _swap_masks(N: int) -> np.ndarray:
    if N <= MAX_FULL_SWAP_N:
        return np.arange(1, (1 << N) - 1, dtype=np.int64)
    return np.array([1 << i for i in range(N)], dtype=np.int64)


def _cost_lookup(plan: TransportPlan):
    prob = plan.problem
    if math.prod(prob.sizes) <= _TENSOR_LIMIT:
        table = cost_tensor(prob)
        return lambda idx: table[np.ravel_multi_index(idx.T, prob.sizes)]
    return prob.cost_of


def check_cp_monotone(plan: TransportPlan, tolerance: float | None = None,
                      pair_budget: int = DEFAULT_PAIR_BUDGET,
                      seed: int = 0) -> MonotonicityReport:
    """Pairwise swap test of c_p-monotonicity on the support of ``plan``.

    For every pair of entries and every swap pattern (bit i set: exchange
    the i-th coordinates), report a violation when
    ``c(x1) + c(x2) > c(s1) + c(s2) + tolerance``. The default tolerance is
    ``1e-8 * (1 + cost)``. Pairs are enumerated when there are at most
    ``pair_budget`` of them and sampled uniformly (seeded) otherwise. For
    N > 12 only single-coordinate swaps are tried.
    """
    prob = plan.problem
    N = prob.N
    if tolerance is None:
        tolerance = 1e-8 * (1.0 + plan.cost)
    K = len(plan)
    n_pairs = K * (K - 1) // 2
    if n_pairs == 0:
        return MonotonicityReport(0, [], 0.0, tolerance)
    sampled = n_pairs > pair_budget
    if sampled:
        rng = np.random.default_rng(seed)
        a = rng.integers(0, K, size=pair_budget)
        b = rng.integers(0, K - 1, size=pair_budget)
        b = np.where(b >= a, b + 1, b)
        pairs = np.sort(np.stack([a, b], axis=1), axis=1)
    else:
        pairs = np.array(list(itertools.combinations(range(K), 2)))
    masks = _swap_masks(N)
    bits = ((masks[:, None] >> np.arange(N)[None, :]) & 1).astype(bool)  # (M, N)
    lookup = _cost_lookup(plan)
    base = plan.entry_costs

    violations = []
    max_def = -math.inf
    idx = plan.indices
    chunk = max(1, 200_000 // len(masks))
    for s in range(0, len(pairs), chunk):
        pr = pairs[s:s + chunk]
        x1 = idx[pr[:, 0]][:, None, :]
        x2 = idx[pr[:, 1]][:, None, :]
        s1 = np.where(bits[None], x2, x1)
        s2 = np.where(bits[None], x1, x2)
        c1 = lookup(s1.reshape(-1, N)).reshape(len(pr), len(masks))
        c2 = lookup(s2.reshape(-1, N)).reshape(len(pr), len(masks))
        deficit = (base[pr[:, 0]] + base[pr[:, 1]])[:, None] - c1 - c2
        max_def = max(max_def, float(deficit.max()))
        for r, k in zip(*np.nonzero(deficit > tolerance)):
            violations.append({
                "entries": [idx[pr[r, 0]].tolist(), idx[pr[r, 1]].tolist()],
                "swap_mask": format(int(masks[k]), f"0{N}b")[::-1],
                "deficit": float(deficit[r, k]),
            })
    return MonotonicityReport(len(pairs), violations, max_def, tolerance, sampled)


@dataclass
class SingularReport:
    patterns: list
    histogram: dict
    threshold: float
    convention: str = ("i is singular for an entry when |x_i - xbar| <= "
                       "threshold * diameter of the entry's points")

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "convention": self.convention,
            "histogram": self.histogram,
            "patterns": [sorted(s) for s in self.patterns],
        }


def classify_singular(plan: TransportPlan, threshold: float = 1e-8) -> SingularReport:
    """Per entry, the set of marginals whose point coincides with the barycenter."""
    pts = plan.problem.tuples(plan.indices)               # (K, N, d)
    z = plan.barycenters
    r = np.linalg.norm(pts - z[:, None, :], axis=2)
    pair = np.linalg.norm(pts[:, :, None, :] - pts[:, None, :, :], axis=3)
    diam = pair.reshape(len(pts), -1).max(axis=1)
    hit = r <= threshold * diam[:, None]
    patterns = [frozenset(int(i) for i in np.flatnonzero(row)) for row in hit]
    hist = Counter(",".join(str(i) for i in sorted(s)) or "empty" for s in patterns)
    return SingularReport(patterns, dict(sorted(hist.items())), threshold)


@dataclass
class GraphReport:
    marginal: int
    counts: list
    is_graph: bool
    n_entries: int
    vertex_bound: int

    def to_dict(self) -> dict:
        return {
            "marginal": self.marginal,
            "counts": self.counts,
            "is_graph": self.is_graph,
            "n_entries": self.n_entries,
            "vertex_bound": self.vertex_bound,
        }


def graph_diagnostic(plan: TransportPlan, i: int) -> GraphReport:
    """Whether the plan is the graph of a map over marginal ``i``."""
    prob = plan.problem
    if not 0 <= i < prob.N:
        raise IndexError(f"marginal index {i} out of range")
    counts = np.bincount(plan.indices[:, i], minlength=prob.sizes[i])
    return GraphReport(i, counts.tolist(), bool(np.all(counts == 1)), len(plan),
                       sum(prob.sizes) - prob.N + 1)


def hull_residuals(plan: TransportPlan) -> np.ndarray:
    """Per entry, ``|sum_i eta_i x_i - xbar|`` with the convex weights of the entry.

    Small values certify that every barycenter lies in the convex hull of
    its entry's points; entries with a singular point are reported as 0.
    """
    prob = plan.problem
    pts = prob.tuples(plan.indices)
    z = plan.barycenters
    out = np.zeros(len(plan))
    for k in range(len(plan)):
        eta = convex_weights(pts[k], prob.lam, prob.p, z[k])
        if np.all(np.isfinite(eta)) and np.all(eta >= 0):
            out[k] = float(np.linalg.norm(eta @ pts[k] - z[k]))
        else:
            out[k] = math.inf
    return out
