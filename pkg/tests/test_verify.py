import numpy as np
import pytest

from pwbarycenter import (BarycenterProblem, DiscreteMeasure, TransportPlan, check_cp_monotone,
                          classify_singular, dirac, graph_diagnostic, solve_mmot, uniform)
from pwbarycenter.verify import _swap_masks, hull_residuals


def crossing_plan():
    mu = uniform([0.0, 1.0])
    prob = BarycenterProblem([mu, mu], None, 2.0)
    return TransportPlan.from_entries(prob, [((0, 1), 0.5), ((1, 0), 0.5)])


def test_crossing_plan_deficit():
    rep = check_cp_monotone(crossing_plan())
    assert rep.pairs_checked == 1
    assert rep.n_violations == 2  # swapping either coordinate uncrosses it
    assert rep.max_deficit == 0.5
    assert all(v["deficit"] > rep.tolerance for v in rep.violations)
    assert {v["swap_mask"] for v in rep.violations} == {"10", "01"}


def test_single_entry_plan():
    prob = BarycenterProblem([dirac([0.0]), dirac([1.0])])
    plan, _ = solve_mmot(prob)
    rep = check_cp_monotone(plan)
    assert rep.pairs_checked == 0 and rep.n_violations == 0


def test_optimal_plans_are_monotone_and_perturbed_are_not():
    rng = np.random.default_rng(17)
    found = 0
    for _ in range(20):
        margs = [DiscreteMeasure(rng.normal(size=(5, 1)), rng.dirichlet(np.ones(5))) for _ in range(3)]
        prob = BarycenterProblem(margs, None, 2.0)
        plan, cost = solve_mmot(prob)
        assert check_cp_monotone(plan).n_violations == 0
        # move mass between two entries by swapping their second coordinate
        if len(plan) < 2:
            continue
        idx = plan.indices.copy()
        a, b = 0, 1
        g = min(plan.masses[a], plan.masses[b])
        e1, e2 = idx[a].copy(), idx[b].copy()
        e1[1], e2[1] = idx[b][1], idx[a][1]
        entries = [(tuple(r), m) for r, m in zip(idx.tolist(), plan.masses)]
        entries[a] = (entries[a][0], plan.masses[a] - g)
        entries[b] = (entries[b][0], plan.masses[b] - g)
        entries += [(tuple(e1), g), (tuple(e2), g)]
        bad = TransportPlan.from_entries(prob, [e for e in entries if e[1] > 0])
        if bad.cost > cost + 1e-8 * (1 + cost):
            assert check_cp_monotone(bad).n_violations > 0
            found += 1
    assert found > 0


def test_sampling_is_seeded():
    mu = uniform(np.linspace(0, 1, 30))
    nu = uniform(np.linspace(0, 1, 30)[::-1])
    prob = BarycenterProblem([mu, nu], None, 2.0)
    plan = TransportPlan.from_entries(prob, [((k, k), 1 / 30) for k in range(30)])
    a = check_cp_monotone(plan, pair_budget=50, seed=3)
    b = check_cp_monotone(plan, pair_budget=50, seed=3)
    assert a.sampled and a.pairs_checked == 50
    assert a.to_dict() == b.to_dict()


def test_swap_masks():
    assert len(_swap_masks(3)) == 6
    assert len(_swap_masks(13)) == 13


def test_classify_singular_examples():
    prob = BarycenterProblem([dirac([0.0]), DiscreteMeasure([0.0, 2.0], [0.5, 0.5])], None, 2.0)
    plan, _ = solve_mmot(prob)
    pats = {tuple(ix): s for ix, s in zip(plan.indices.tolist(), classify_singular(plan).patterns)}
    assert pats[(0, 0)] == {0, 1}
    assert pats[(0, 1)] == frozenset()
    mu = DiscreteMeasure([0.0, 1.0], [0.5, 0.5])
    plan, _ = solve_mmot(BarycenterProblem([mu, mu, mu], None, 1.5))
    assert all(s == {0, 1, 2} for s in classify_singular(plan).patterns)


def test_generic_instance_has_no_singular_entries_and_is_stable():
    rng = np.random.default_rng(2)
    margs = [DiscreteMeasure(rng.normal(size=(4, 2)), rng.dirichlet(np.ones(4))) for _ in range(3)]
    plan, _ = solve_mmot(BarycenterProblem(margs, None, 1.5))
    a = classify_singular(plan, 1e-8)
    b = classify_singular(plan, 5e-9)
    assert a.patterns == b.patterns
    assert a.histogram == {"empty": len(plan)}
    assert "threshold" in a.to_dict()["convention"]


def test_graph_diagnostic():
    plan, _ = solve_mmot(BarycenterProblem([dirac([0.0]), dirac([4.0])]))
    assert all(graph_diagnostic(plan, i).is_graph for i in range(2))
    mu = uniform([0.0, 1.0, 2.0])
    plan, _ = solve_mmot(BarycenterProblem([mu, mu]))
    assert all(graph_diagnostic(plan, i).is_graph for i in range(2))
    plan, _ = solve_mmot(BarycenterProblem([dirac([0.0]), uniform([-1.0, 1.0])]))
    rep = graph_diagnostic(plan, 0)
    assert not rep.is_graph and rep.counts == [2] and rep.n_entries <= rep.vertex_bound
    with pytest.raises(IndexError):
        graph_diagnostic(plan, 2)


def test_barycenters_in_convex_hull():
    rng = np.random.default_rng(4)
    for p in (1.5, 2.0, 3.0):
        margs = [DiscreteMeasure(rng.normal(size=(4, 2)), rng.dirichlet(np.ones(4))) for _ in range(3)]
        plan, _ = solve_mmot(BarycenterProblem(margs, None, p))
        assert hull_residuals(plan).max() <= 1e-8
