"""Two-marginal W_p transport and the coupled barycenter objective."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import BudgetExceededError, ValidationError
from .measures import DiscreteMeasure
from .mmot import (VARIABLE_BUDGET, BarycenterProblem, TransportPlan,
                   _TransportationSimplex, pushforward_barycenter)


@dataclass(frozen=True, eq=False)
class PairPlan:
    """Coupling between ``source`` and ``target`` given by sparse entries.

    ``pairs`` is an int array of shape (K, 2) of atom indices into
    ``source`` and ``target``; ``cost`` is ``sum mass * |x_i - y_j|^p``.
    """

    source: DiscreteMeasure
    target: DiscreteMeasure
    pairs: np.ndarray
    masses: np.ndarray
    p: float

    @property
    def cost(self) -> float:
        x = self.source.points[self.pairs[:, 0]]
        y = self.target.points[self.pairs[:, 1]]
        return float(math.fsum(self.masses * np.linalg.norm(x - y, axis=1) ** self.p))

    def marginal_error(self) -> float:
        a = np.bincount(self.pairs[:, 0], self.masses, self.source.n_atoms)
        b = np.bincount(self.pairs[:, 1], self.masses, self.target.n_atoms)
        return max(float(np.abs(a - self.source.weights).max()),
                   float(np.abs(b - self.target.weights).max()))

    def to_dict(self) -> dict:
        return {
            "entries": [{"idx": [int(i), int(j)], "mass": float(g)}
                        for (i, j), g in zip(self.pairs, self.masses)],
            "cost": self.cost,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _pair_cost_matrix(mu: DiscreteMeasure, nu: DiscreteMeasure, p: float) -> np.ndarray:
    diff = mu.points[:, None, :] - nu.points[None, :, :]
    return np.linalg.norm(diff, axis=2) ** p


def wp_discrete(mu: DiscreteMeasure, nu: DiscreteMeasure, p: float,
                budget: int = VARIABLE_BUDGET) -> tuple[PairPlan, float]:
    """Optimal plan and W_p^p(mu, nu) (the p-th power, not the root).

    Uses the same simplex as the multi-marginal solver with N = 2.
    """
    if mu.dim != nu.dim:
        raise ValidationError("measures live in different dimensions")
    if not 1.0 <= p < math.inf:
        raise ValidationError("p must satisfy 1 <= p < inf")
    if mu.n_atoms * nu.n_atoms > budget:
        raise BudgetExceededError(
            f"{mu.n_atoms * nu.n_atoms} columns exceed the budget of {budget}")
    costs = _pair_cost_matrix(mu, nu, p).ravel()
    lp = _TransportationSimplex([mu.weights, nu.weights], costs)
    basis, x, _ = lp.solve()
    keep = x > 1e-15
    pairs = np.stack(np.unravel_index(basis[keep], (mu.n_atoms, nu.n_atoms)), axis=1)
    plan = PairPlan(mu, nu, pairs.astype(np.intp), x[keep], float(p))
    return plan, float(math.fsum(x[keep] * costs[basis[keep]]))


def coupled_objective(candidate: DiscreteMeasure, problem: BarycenterProblem) -> float:
    """sum_i lam_i W_p^p(mu_i, candidate)."""
    if candidate.dim != problem.dim:
        raise ValidationError("candidate dimension differs from the problem")
    return float(math.fsum(
        lam * wp_discrete(mu, candidate, problem.p)[1]
        for mu, lam in zip(problem.marginals, problem.lam)))


def induced_pair_plan(plan: TransportPlan, i: int,
                      target: DiscreteMeasure | None = None) -> PairPlan:
    """Coupling of ``mu_i`` with the pushforward barycenter induced by ``plan``.

    Each entry ``(j_1..j_N, g)`` is sent to ``(x_{j_i}, xbar_p(entry), g)``;
    equal pairs are aggregated. Barycenter points are matched to the atoms
    of ``target`` (default: the pushforward of ``plan``) by nearest atom.
    """
    if not 0 <= i < plan.problem.N:
        raise IndexError(f"marginal index {i} out of range")
    if target is None:
        target = pushforward_barycenter(plan)
    z = plan.barycenters
    dist = np.linalg.norm(z[:, None, :] - target.points[None, :, :], axis=2)
    tgt = np.argmin(dist, axis=1)
    src = plan.indices[:, i]
    n_t = target.n_atoms
    key = src * n_t + tgt
    uniq, inv = np.unique(key, return_inverse=True)
    mass = np.bincount(inv.ravel(), weights=plan.masses)
    pairs = np.stack([uniq // n_t, uniq % n_t], axis=1).astype(np.intp)
    return PairPlan(plan.problem.marginals[i], target, pairs, mass, plan.problem.p)
