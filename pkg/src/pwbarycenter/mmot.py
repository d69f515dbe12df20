"""Multi-marginal linear program for p-Wasserstein barycenters.

The LP has one equality row per atom of every marginal and one column per
multi-index ``(j_1, ..., j_N)`` in the product of the supports. Rows are few
(``sum n_i``) and columns are many (``prod n_i``), so the solver keeps a
dense basis inverse and prices the columns implicitly against a cached cost
tensor.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .exceptions import BudgetExceededError, SolverError, ValidationError
from .measures import DiscreteMeasure, merge_close_atoms
from .pbarycenter import DEFAULT_TOL, cost_batch, solve_batch

VARIABLE_BUDGET = 10 ** 7
MARGINAL_TOL = 1e-9
PUSHFORWARD_MERGE_TOL = 1e-9
_CHUNK = 1 << 17


@dataclass(frozen=True, eq=False)
class BarycenterProblem:
    """Marginals ``mu_i``, convex weights ``lam`` and exponent ``p``."""

    marginals: Sequence[DiscreteMeasure]
    lam: np.ndarray = None
    p: float = 2.0

    def __post_init__(self):
        margs = tuple(self.marginals)
        if len(margs) < 2:
            raise ValidationError("need at least two marginals")
        for mu in margs:
            if not isinstance(mu, DiscreteMeasure):
                raise ValidationError("marginals must be DiscreteMeasure objects")
        dims = {mu.dim for mu in margs}
        if len(dims) != 1:
            raise ValidationError(f"marginals have mixed dimensions {sorted(dims)}")
        N = len(margs)
        lam = np.full(N, 1.0 / N) if self.lam is None else \
            np.asarray(self.lam, dtype=float).ravel()
        if lam.shape != (N,):
            raise ValidationError(f"expected {N} weights, got {lam.size}")
        if np.any(lam <= 0) or abs(lam.sum() - 1.0) > 1e-12:
            raise ValidationError("lambda must be positive and sum to 1")
        p = float(self.p)
        if not 1.0 < p < math.inf:
            raise ValidationError(f"exponent p={p!r} must satisfy 1 < p < inf")
        lam = lam.copy()
        lam.setflags(write=False)
        object.__setattr__(self, "marginals", margs)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "p", p)

    @property
    def N(self) -> int:
        return len(self.marginals)

    @property
    def dim(self) -> int:
        return self.marginals[0].dim

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(mu.n_atoms for mu in self.marginals)

    def tuples(self, idx: np.ndarray) -> np.ndarray:
        """Points ``(x_{j_1}, ..., x_{j_N})`` for multi-indices ``idx`` (K, N)."""
        idx = np.asarray(idx, dtype=np.intp)
        return np.stack([mu.points[idx[:, i]]
                         for i, mu in enumerate(self.marginals)], axis=1)

    def cost_of(self, idx: np.ndarray) -> np.ndarray:
        c, _ = cost_batch(self.tuples(idx), self.lam, self.p)
        return c

    def barycenters_of(self, idx: np.ndarray) -> np.ndarray:
        return solve_batch(self.tuples(idx), self.lam, self.p)

    def permuted(self, perm: Sequence[int]) -> "BarycenterProblem":
        perm = list(perm)
        return BarycenterProblem([self.marginals[k] for k in perm],
                                 self.lam[perm], self.p)


@dataclass(frozen=True, eq=False)
class TransportPlan:
    """Sparse coupling of the marginals of ``problem``.

    ``indices`` has shape (K, N), 0-based atom indices per marginal;
    ``masses`` has shape (K,). ``duals`` holds the per-atom LP multipliers
    when the plan comes out of :func:`solve_mmot`.
    """

    problem: BarycenterProblem
    indices: np.ndarray
    masses: np.ndarray
    duals: tuple | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.intp).reshape(-1, self.problem.N)
        g = np.asarray(self.masses, dtype=float).ravel()
        if idx.shape[0] != g.shape[0]:
            raise ValidationError("indices and masses differ in length")
        if np.any(g <= 0):
            raise ValidationError("plan masses must be positive")
        for i, n in enumerate(self.problem.sizes):
            if idx.size and (idx[:, i].min() < 0 or idx[:, i].max() >= n):
                raise ValidationError(f"atom index out of range for marginal {i}")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "masses", g)

    @classmethod
    def from_entries(cls, problem: BarycenterProblem, entries) -> "TransportPlan":
        """Build from ``[(multi_index, mass), ...]``."""
        entries = list(entries)
        idx = np.array([e[0] for e in entries], dtype=np.intp)
        g = np.array([e[1] for e in entries], dtype=float)
        return cls(problem, idx.reshape(-1, problem.N), g)

    def __len__(self) -> int:
        return self.masses.size

    @property
    def entry_costs(self) -> np.ndarray:
        if "costs" not in self._cache:
            self._cache["costs"] = self.problem.cost_of(self.indices)
        return self._cache["costs"]

    @property
    def barycenters(self) -> np.ndarray:
        """Barycenter point of each entry, shape (K, d)."""
        if "bary" not in self._cache:
            self._cache["bary"] = self.problem.barycenters_of(self.indices)
        return self._cache["bary"]

    @property
    def cost(self) -> float:
        return float(math.fsum(self.masses * self.entry_costs))

    def marginal_weights(self, i: int) -> np.ndarray:
        n = self.problem.sizes[i]
        return np.bincount(self.indices[:, i], weights=self.masses, minlength=n)

    def marginal_error(self) -> float:
        """Largest deviation from the marginal constraints."""
        return max(float(np.abs(self.marginal_weights(i) - mu.weights).max())
                   for i, mu in enumerate(self.problem.marginals))

    def is_feasible(self, tol: float = MARGINAL_TOL) -> bool:
        return self.marginal_error() <= tol

    def to_dict(self) -> dict:
        return {
            "entries": [{"idx": [int(j) for j in row], "mass": float(g)}
                        for row, g in zip(self.indices, self.masses)],
            "cost": self.cost,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, obj: dict, problem: BarycenterProblem) -> "TransportPlan":
        try:
            entries = [(e["idx"], float(e["mass"])) for e in obj["entries"]]
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed plan JSON: {exc}") from None
        if any(len(ix) != problem.N for ix, _ in entries):
            raise ValidationError("plan index arity does not match the problem")
        return cls.from_entries(problem, entries)


def plan_marginal(plan: TransportPlan, i: int) -> DiscreteMeasure:
    """i-th marginal of ``plan`` as a measure on the support of ``mu_i``."""
    if not 0 <= i < plan.problem.N:
        raise IndexError(f"marginal index {i} out of range")
    w = plan.marginal_weights(i)
    keep = w > 0
    return DiscreteMeasure(plan.problem.marginals[i].points[keep], w[keep])


def pushforward_barycenter(plan: TransportPlan,
                           atol: float = PUSHFORWARD_MERGE_TOL) -> DiscreteMeasure:
    """Image of ``plan`` under the barycenter map, near-equal atoms merged."""
    return merge_close_atoms(plan.barycenters, plan.masses, atol)


# ---------------------------------------------------------------------------
# cost tensor

def cost_tensor(problem: BarycenterProblem, tol: float = DEFAULT_TOL) -> np.ndarray:
    """c_p over the full product of supports, flattened in C order."""
    sizes = problem.sizes
    total = math.prod(sizes)
    out = np.empty(total)
    for start in range(0, total, _CHUNK):
        flat = np.arange(start, min(start + _CHUNK, total))
        idx = np.stack(np.unravel_index(flat, sizes), axis=1)
        out[start:start + flat.size], _ = cost_batch(
            problem.tuples(idx), problem.lam, problem.p, tol)
    return out


# ---------------------------------------------------------------------------
# revised simplex

class _TransportationSimplex:
    """Revised simplex with Bland's rule on the multi-marginal polytope.

    One row per atom, except the first atom of marginals 2..N, whose rows
    are implied by the others (all marginals carry total mass one). The
    remaining ``sum n_i - N + 1`` rows have full rank, so every basis has
    exactly that many columns.
    """

    REFACTOR_EVERY = 64

    def __init__(self, weights: Sequence[np.ndarray], costs: np.ndarray,
                 max_iter: int | None = None):
        self.weights = [np.asarray(w, dtype=float) for w in weights]
        self.sizes = tuple(len(w) for w in self.weights)
        self.N = len(self.sizes)
        self.costs = costs
        self.row_of = []
        b = []
        r = 0
        for i, w in enumerate(self.weights):
            rows = np.full(len(w), -1, dtype=np.intp)
            start = 0 if i == 0 else 1
            rows[start:] = np.arange(r, r + len(w) - start)
            r += len(w) - start
            b.extend(w[start:])
            self.row_of.append(rows)
        self.m = r
        self.b = np.array(b)
        cmax = float(np.abs(costs).max()) if costs.size else 0.0
        self.rc_tol = 1e-11 * (1.0 + cmax)
        self.pivot_tol = 1e-9
        self.max_iter = max_iter or max(50_000, 50 * self.m * self.N)
        self.n_iter = 0

    def column(self, flat: int) -> np.ndarray:
        idx = np.unravel_index(flat, self.sizes)
        rows = [self.row_of[i][a] for i, a in enumerate(idx)]
        return np.array([r for r in rows if r >= 0], dtype=np.intp)

    def basis_matrix(self, basis) -> np.ndarray:
        B = np.zeros((self.m, self.m))
        for k, q in enumerate(basis):
            B[self.column(q), k] = 1.0
        return B

    def initial_basis(self) -> list[int]:
        """Staircase (north-west corner) basis.

        Each step advances one pointer, so the path visits exactly
        ``sum (n_i - 1) + 1`` multi-indices, each introducing a fresh row:
        the basis matrix is triangular with unit diagonal.
        """
        res = [w.copy() for w in self.weights]
        ptr = [0] * self.N
        basis = []
        while True:
            basis.append(int(np.ravel_multi_index(ptr, self.sizes)))
            g = min(res[i][ptr[i]] for i in range(self.N))
            for i in range(self.N):
                res[i][ptr[i]] -= g
            movable = [i for i in range(self.N) if ptr[i] < self.sizes[i] - 1]
            if not movable:
                break
            k = min(movable, key=lambda i: (res[i][ptr[i]], i))
            ptr[k] += 1
        return basis

    def duals(self, y: np.ndarray) -> list[np.ndarray]:
        out = []
        for rows in self.row_of:
            u = np.zeros(len(rows))
            keep = rows >= 0
            u[keep] = y[rows[keep]]
            out.append(u)
        return out

    def entering(self, u: list[np.ndarray]) -> int | None:
        """Smallest column index with negative reduced cost (Bland)."""
        sizes = self.sizes
        inner = math.prod(sizes[1:])
        # dual sum over all but the first marginal, broadcast once
        tail = np.zeros(sizes[1:])
        for i in range(1, self.N):
            shape = [1] * (self.N - 1)
            shape[i - 1] = sizes[i]
            tail = tail + u[i].reshape(shape)
        tail = tail.ravel()
        rows_per_chunk = max(1, _CHUNK // max(inner, 1))
        for a0 in range(0, sizes[0], rows_per_chunk):
            a1 = min(a0 + rows_per_chunk, sizes[0])
            c = self.costs[a0 * inner:a1 * inner].reshape(a1 - a0, inner)
            rc = c - u[0][a0:a1, None] - tail[None, :]
            hit = np.flatnonzero(rc.ravel() < -self.rc_tol)
            if hit.size:
                return a0 * inner + int(hit[0])
        return None

    def solve(self):
        basis = self.initial_basis()
        B = self.basis_matrix(basis)
        Binv = np.linalg.inv(B)
        x = Binv @ self.b
        x[np.abs(x) < 1e-15] = 0.0
        if np.any(x < -1e-12):
            raise SolverError("initial basis is infeasible")
        x = np.maximum(x, 0.0)
        basis = np.array(basis, dtype=np.int64)

        since_refactor = 0
        while True:
            self.n_iter += 1
            if self.n_iter > self.max_iter:
                raise SolverError(f"simplex exceeded {self.max_iter} iterations")
            y = self.costs[basis] @ Binv
            q = self.entering(self.duals(y))
            if q is None:
                break
            d = Binv[:, self.column(q)].sum(axis=1)
            pos = np.flatnonzero(d > self.pivot_tol)
            if pos.size == 0:
                raise SolverError("LP unbounded: internal error")
            ratios = x[pos] / d[pos]
            theta = ratios.min()
            ties = pos[ratios <= theta + 1e-12 * max(1.0, theta)]
            r = int(ties[np.argmin(basis[ties])])  # Bland: smallest index leaves
            theta = x[r] / d[r]
            x = x - theta * d
            x[r] = theta
            x[np.abs(x) < 1e-15] = 0.0
            x = np.maximum(x, 0.0)
            basis[r] = q
            piv = Binv[r] / d[r]
            Binv -= np.outer(d, piv)
            Binv[r] = piv
            since_refactor += 1
            if since_refactor >= self.REFACTOR_EVERY:
                Binv = np.linalg.inv(self.basis_matrix(basis))
                x = np.maximum(Binv @ self.b, 0.0)
                since_refactor = 0

        B = self.basis_matrix(basis)
        x = np.linalg.solve(B, self.b)
        y = np.linalg.solve(B.T, self.costs[basis])
        if np.any(x < -1e-10):
            raise SolverError("final basis is infeasible")
        return basis, np.maximum(x, 0.0), self.duals(y)


def solve_mmot(problem: BarycenterProblem,
               budget: int = VARIABLE_BUDGET) -> tuple[TransportPlan, float]:
    """Exact optimal vertex of the multi-marginal barycenter LP.

    Returns
    -------
    plan : TransportPlan
        Basic optimal plan with at most ``sum n_i - N + 1`` entries and the
        LP duals attached (``plan.duals[i][a]`` for atom ``a`` of marginal
        ``i``).
    cost : float
        Optimal value ``sum_k mass_k * c_p(entry_k)``.
    """
    sizes = problem.sizes
    if math.prod(sizes) > budget:
        raise BudgetExceededError(
            f"{math.prod(sizes)} columns exceed the budget of {budget}")
    costs = cost_tensor(problem)
    lp = _TransportationSimplex([mu.weights for mu in problem.marginals], costs)
    basis, x, duals = lp.solve()
    keep = x > 1e-15
    idx = np.stack(np.unravel_index(basis[keep], sizes), axis=1)
    plan = TransportPlan(problem, idx, x[keep], duals=tuple(duals))
    plan._cache["costs"] = costs[basis[keep]]
    plan._cache["n_iter"] = lp.n_iter
    if plan.marginal_error() > MARGINAL_TOL:
        raise SolverError("optimal plan violates the marginal constraints")
    return plan, plan.cost
