"""Dual side of the multi-marginal barycenter LP.

Potentials live on finite grids. The ``lam h_p``-conjugate

    phi^{lam,p}(x) = min_z { lam |x - z|^p - phi(z) }

is taken over the nodes of ``phi``, and can be evaluated at any point, which
is how gradients of the improved potentials are estimated off the grid.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .exceptions import ValidationError
from .mmot import BarycenterProblem, TransportPlan, cost_tensor, pushforward_barycenter

FEASIBILITY_TOL = 1e-9
_CHUNK = 1 << 22  # pairwise evaluations per block


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Real values sampled on a finite set of nodes in R^d."""

    nodes: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim == 1:
            nodes = nodes[:, None]
        vals = np.asarray(self.values, dtype=float).ravel()
        if nodes.shape[0] != vals.shape[0]:
            raise ValidationError("nodes and values differ in length")
        if not np.all(np.isfinite(vals)):
            raise ValidationError("grid function values must be finite")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return self.values.size

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    def to_dict(self) -> dict:
        return {"nodes": self.nodes.tolist(), "values": self.values.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, obj: dict) -> "GridFunction":
        return cls(np.array(obj["nodes"], dtype=float), np.array(obj["values"]))


def conjugate_values(nodes: np.ndarray, values: np.ndarray, lam: float, p: float,
                     out: np.ndarray) -> np.ndarray:
    """min over ``nodes`` z of lam |x - z|^p - values(z), for every x in ``out``."""
    out = np.asarray(out, dtype=float)
    if out.ndim == 1:
        out = out[:, None]
    if len(nodes) == 0 or len(out) == 0:
        raise ValidationError("conjugate of an empty grid")
    res = np.empty(len(out))
    step = max(1, _CHUNK // len(nodes))
    for a in range(0, len(out), step):
        x = out[a:a + step]
        dist = np.linalg.norm(x[:, None, :] - nodes[None, :, :], axis=2)
        res[a:a + step] = (lam * dist ** p - values[None, :]).min(axis=1)
    return res


def conjugate(phi: GridFunction, lam: float, p: float, out_nodes) -> GridFunction:
    """The ``lam h_p``-conjugate of ``phi`` sampled on ``out_nodes``."""
    if not lam > 0:
        raise ValidationError("lambda must be positive")
    out_nodes = np.asarray(out_nodes, dtype=float)
    if out_nodes.ndim == 1:
        out_nodes = out_nodes[:, None]
    return GridFunction(out_nodes, conjugate_values(phi.nodes, phi.values, lam, p, out_nodes))


@dataclass(frozen=True, eq=False)
class PotentialSet:
    """Potentials ``phi_i`` on each support and generators ``psi_i`` on a
    common z-grid, with ``phi_i = psi_i^{lam_i,p}`` and ``sum_i psi_i = 0``.

    ``shifts[i]`` is the constant added to ``phi_i`` by the normalization of
    :func:`improve_potentials`; the shifts sum to zero.
    """

    problem: BarycenterProblem
    phi: tuple
    psi: tuple
    shifts: np.ndarray = None
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def z_grid(self) -> np.ndarray:
        return self.psi[0].nodes

    def phi_at(self, i: int, x) -> np.ndarray:
        """Evaluate ``phi_i`` anywhere through its conjugate representation."""
        psi = self.psi[i]
        return conjugate_values(psi.nodes, psi.values, self.problem.lam[i],
                                self.problem.p, x)

    def psi_sum_error(self) -> float:
        total = np.sum([g.values for g in self.psi], axis=0)
        return float(np.abs(total).max())

    def feasibility_violation(self) -> float:
        return max_violation([g.values for g in self.phi], self.problem)

    def to_dict(self) -> dict:
        return {"phi": [g.to_dict() for g in self.phi],
                "psi": [g.to_dict() for g in self.psi]}


def _support_sum(values: Sequence[np.ndarray]) -> np.ndarray:
    """Tensor of phi_1(j_1) + ... + phi_N(j_N), flattened in C order."""
    total = np.zeros(())
    for v in values:
        total = np.add.outer(total, np.asarray(v, dtype=float))
    return total.ravel()


def max_violation(values: Sequence[np.ndarray], problem: BarycenterProblem,
                  costs: np.ndarray | None = None) -> float:
    """max over support combinations of sum_i phi_i(x_i) - c_p(x)."""
    if costs is None:
        costs = cost_tensor(problem)
    return float((_support_sum(values) - costs).max())


def lp_potentials(plan: TransportPlan) -> list[GridFunction]:
    """LP multipliers of ``plan`` as grid functions on the supports."""
    if plan.duals is None:
        raise ValidationError("plan carries no dual variables")
    return [GridFunction(mu.points, u)
            for mu, u in zip(plan.problem.marginals, plan.duals)]


def default_z_grid(problem: BarycenterProblem, plan: TransportPlan | None = None,
                   resolution: int = 0, combination_budget: int = 200_000) -> np.ndarray:
    """Candidate barycenter nodes.

    Union of the marginal supports, the barycenter of every support
    combination when there are at most ``combination_budget`` of them
    (otherwise only the atoms of the pushforward of ``plan``), and an
    optional regular grid of ``resolution`` points per axis over the
    bounding box of the supports.
    """
    parts = [mu.points for mu in problem.marginals]
    total = math.prod(problem.sizes)
    if total <= combination_budget:
        idx = np.stack(np.unravel_index(np.arange(total), problem.sizes), axis=1)
        parts.append(problem.barycenters_of(idx))
    elif plan is not None:
        parts.append(pushforward_barycenter(plan).points)
    if resolution > 0:
        pts = np.vstack(parts)
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        axes = [np.linspace(a, b, resolution) for a, b in zip(lo, hi)]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        parts.append(mesh.reshape(-1, problem.dim))
    return np.unique(np.vstack(parts), axis=0)


def improve_potentials(raw: Sequence[GridFunction], problem: BarycenterProblem,
                       z_grid=None) -> PotentialSet:
    """Replace feasible potentials by conjugate pairs with higher dual value.

    ``psi_i = phi_i^{lam_i,p}`` for i < N, ``psi_N = -sum_{i<N} psi_i`` and
    the new potentials are ``phi~_i = psi_i^{lam_i,p}``. Then
    ``phi~_i - shifts[i] >= phi_i`` on every support (``shifts`` are the
    normalization constants below; before normalizing the inequality is the
    plain ``phi~_i >= phi_i``). Feasibility of the output is exact
    whenever ``z_grid`` contains the barycenter of every support combination
    (the default for problems up to 200 000 combinations).

    Each ``psi_i`` is shifted by its value at the node nearest the origin;
    the shifts sum to zero, so the dual value is unchanged by it.
    """
    raw = list(raw)
    N, p, lam = problem.N, problem.p, problem.lam
    if len(raw) != N:
        raise ValidationError(f"expected {N} potentials, got {len(raw)}")
    for g, mu in zip(raw, problem.marginals):
        if g.nodes.shape != mu.points.shape or not np.allclose(g.nodes, mu.points):
            raise ValidationError("raw potentials must be sampled on the supports")
    viol = max_violation([g.values for g in raw], problem)
    if viol > FEASIBILITY_TOL:
        raise ValidationError(f"raw potentials are infeasible (violation {viol:.3g})")
    Z = default_z_grid(problem) if z_grid is None else np.atleast_2d(
        np.asarray(z_grid, dtype=float))
    if Z.shape[1] != problem.dim:
        Z = Z.reshape(-1, problem.dim)

    psi_vals = [conjugate_values(g.nodes, g.values, lam[i], p, Z)
                for i, g in enumerate(raw[:-1])]
    z0 = int(np.argmin(np.linalg.norm(Z, axis=1)))
    offsets = [float(v[z0]) for v in psi_vals]
    psi_vals = [v - c for v, c in zip(psi_vals, offsets)]
    psi_vals.append(-np.sum(psi_vals, axis=0))
    shifts = np.array(offsets + [-math.fsum(offsets)])
    psi = tuple(GridFunction(Z, v) for v in psi_vals)
    phi = tuple(GridFunction(mu.points, conjugate_values(Z, psi_vals[i], lam[i], p, mu.points))
                for i, mu in enumerate(problem.marginals))
    return PotentialSet(problem, phi, psi, shifts)


def first_order_potentials(plan: TransportPlan) -> PotentialSet:
    """Improved LP potentials with ``psi`` sampled on the pushforward atoms only.

    These ``psi_i`` are the two-marginal potentials of ``mu_i`` against the
    barycenter, and the resulting ``phi~_i`` are smooth near the support
    atoms, which is what finite-difference checks need. Feasibility is not
    guaranteed in general; inspect ``feasibility_violation()``.
    """
    Z = pushforward_barycenter(plan).points
    return improve_potentials(lp_potentials(plan), plan.problem, z_grid=Z)


def dual_value(pot) -> float:
    """sum_i sum_atoms weight * phi_i(atom)."""
    if isinstance(pot, PotentialSet):
        phis, problem = pot.phi, pot.problem
    else:
        phis, problem = pot
    return float(math.fsum(float(mu.weights @ g.values)
                           for g, mu in zip(phis, problem.marginals)))


def complementary_slackness(plan: TransportPlan, pot: PotentialSet) -> float:
    """max |phi_i(x_i) + psi_i(z) - lam_i |x_i - z|^p| over plan entries.

    ``z`` is the barycenter point of the entry, looked up on the z-grid.
    """
    prob = plan.problem
    z = plan.barycenters
    Z = pot.z_grid
    k = np.argmin(np.linalg.norm(z[:, None, :] - Z[None, :, :], axis=2), axis=1)
    worst = 0.0
    for i, mu in enumerate(prob.marginals):
        x = mu.points[plan.indices[:, i]]
        lhs = pot.phi[i].values[plan.indices[:, i]] + pot.psi[i].values[k]
        rhs = prob.lam[i] * np.linalg.norm(x - Z[k], axis=1) ** prob.p
        worst = max(worst, float(np.abs(lhs - rhs).max()))
    return worst


# ---------------------------------------------------------------------------
# first-order system and maps

def _central_gradient(f, x: np.ndarray, h: float) -> np.ndarray:
    d = x.shape[1]
    grad = np.empty_like(x)
    for k in range(d):
        e = np.zeros(d)
        e[k] = h
        grad[:, k] = (f(x + e) - f(x - e)) / (2.0 * h)
    return grad


def potential_gradient(pot: PotentialSet, i: int, x, fd_step: float) -> np.ndarray:
    """Central-difference gradient of ``phi_i`` at the points ``x``."""
    if not fd_step > 0:
        raise ValidationError("fd_step must be positive")
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return _central_gradient(lambda y: pot.phi_at(i, y), x, fd_step)


@dataclass
class FirstOrderReport:
    max_residual: float
    mean_residual: float
    max_residual_half: float
    max_residual_richardson: float
    flagged_nodes: list
    insufficient_grid: list
    residuals: np.ndarray = field(repr=False, default=None)

    def to_dict(self) -> dict:
        return {
            "max_residual": self.max_residual,
            "mean_residual": self.mean_residual,
            "max_residual_half": self.max_residual_half,
            "max_residual_richardson": self.max_residual_richardson,
            "flagged_nodes": self.flagged_nodes,
            "insufficient_grid": self.insufficient_grid,
        }


def check_first_order(plan: TransportPlan, pot: PotentialSet,
                      fd_step: float = 1e-4) -> FirstOrderReport:
    """Residuals of lam_i Dh_p(x_i - xbar) = D phi_i(x_i) on the plan support.

    Gradients are taken with steps ``fd_step`` and ``fd_step / 2``; their
    Richardson combination is reported too. An (entry, marginal) pair whose
    two estimates disagree by more than 10% is flagged as a kink. Marginals
    with a single atom carry no gradient information and are listed under
    ``insufficient_grid`` instead of producing residuals.
    """
    prob = plan.problem
    p = prob.p
    z = plan.barycenters
    raw, half, rich = [], [], []
    flagged, insufficient = [], []
    for i, mu in enumerate(prob.marginals):
        if mu.n_atoms < 2:
            insufficient.append(i)
            continue
        x = mu.points[plan.indices[:, i]]
        diff = x - z
        r = np.linalg.norm(diff, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            lhs = np.where(r[:, None] > 0,
                           prob.lam[i] * p * (r ** (p - 2.0))[:, None] * diff, 0.0)
        g1 = potential_gradient(pot, i, x, fd_step)
        g2 = potential_gradient(pot, i, x, fd_step / 2)
        gr = (4.0 * g2 - g1) / 3.0
        raw.append(np.linalg.norm(lhs - g1, axis=1))
        half.append(np.linalg.norm(lhs - g2, axis=1))
        rich.append(np.linalg.norm(lhs - gr, axis=1))
        gap = np.linalg.norm(g1 - g2, axis=1)
        bad = gap > 0.1 * np.linalg.norm(g2, axis=1) + 1e-6
        flagged.extend([int(k), i] for k in np.flatnonzero(bad))
    if not raw:
        return FirstOrderReport(math.nan, math.nan, math.nan, math.nan,
                                flagged, insufficient, np.zeros((0,)))
    raw_a, half_a, rich_a = (np.concatenate(v) for v in (raw, half, rich))
    return FirstOrderReport(float(raw_a.max()), float(raw_a.mean()),
                            float(half_a.max()), float(rich_a.max()),
                            flagged, insufficient, raw_a)


def reconstruct_map_S(pot: PotentialSet, i: int, fd_step: float = 1e-4) -> np.ndarray:
    """Sample S_i(x) = x - (p lam_i)^{-1/(p-1)} |D phi_i|^{(2-p)/(p-1)} D phi_i.

    Evaluated at every atom of ``mu_i``; where ``|D phi_i| <= fd_step`` the
    map is taken to be the identity.
    """
    prob = pot.problem
    if not 0 <= i < prob.N:
        raise IndexError(f"marginal index {i} out of range")
    p, lam = prob.p, prob.lam[i]
    x = prob.marginals[i].points
    D = potential_gradient(pot, i, x, fd_step)
    nrm = np.linalg.norm(D, axis=1)
    small = nrm <= fd_step
    with np.errstate(divide="ignore", invalid="ignore"):
        factor = (p * lam) ** (-1.0 / (p - 1.0)) * np.where(
            small, 0.0, nrm ** ((2.0 - p) / (p - 1.0)))
    return x - factor[:, None] * D


def transport_maps(pot: PotentialSet, fd_step: float = 1e-4) -> list[np.ndarray]:
    """T_i = S_i^{-1} o S_1 sampled on the atoms of ``mu_1``.

    The inverse is a nearest-sample lookup among the S_i values on the atoms
    of ``mu_i``; returns, for each i, the atom index of ``mu_i`` assigned to
    every atom of ``mu_1``. Diagnostic only.
    """
    S = [reconstruct_map_S(pot, i, fd_step) for i in range(pot.problem.N)]
    out = []
    for Si in S:
        dist = np.linalg.norm(S[0][:, None, :] - Si[None, :, :], axis=2)
        out.append(np.argmin(dist, axis=1))
    return out


# ---------------------------------------------------------------------------
# equi-Lipschitz bound

def lipschitz_radius(R: float, M_R: float, lam: float, p: float) -> float:
    """R~ = R + (3 2^p M_R / (lam p R))^{1/(p-1)}."""
    return R + (3.0 * 2.0 ** p * M_R / (lam * p * R)) ** (1.0 / (p - 1.0))


def lipschitz_bound(R: float, M_R: float, lam: float, p: float) -> float:
    """L_R = p lam (R~^{p-1} + R^{p-1}) for conjugates bounded by M_R on B_2R."""
    Rt = lipschitz_radius(R, M_R, lam, p)
    return p * lam * (Rt ** (p - 1.0) + R ** (p - 1.0))


def lipschitz_ratio(g: GridFunction) -> float:
    """Largest |g(x) - g(x')| / |x - x'| over pairs of distinct nodes."""
    dist = np.linalg.norm(g.nodes[:, None, :] - g.nodes[None, :, :], axis=2)
    dv = np.abs(g.values[:, None] - g.values[None, :])
    mask = dist > 0
    return float((dv[mask] / dist[mask]).max()) if np.any(mask) else 0.0
