import numpy as np
import pytest

from oracles import permutation_min_cost
from pwbarycenter import (BarycenterProblem, DiscreteMeasure, coupled_objective, dirac,
                          induced_pair_plan, pushforward_barycenter, solve_mmot, uniform,
                          wp_discrete, wp_1d)


def test_identity_and_translation():
    mu = DiscreteMeasure([0.0, 1.0, 3.0], [0.2, 0.3, 0.5])
    plan, w = wp_discrete(mu, mu, 2.0)
    assert w == 0.0
    assert all(i == j for i, j in plan.pairs)
    _, w = wp_discrete(mu, DiscreteMeasure(mu.points + 1.5, mu.weights), 3.0)
    assert w == pytest.approx(1.5 ** 3)


def test_permutation_oracle():
    rng = np.random.default_rng(4)
    for _ in range(10):
        a, b = rng.normal(size=(3, 2)), rng.normal(size=(3, 2))
        C = np.linalg.norm(a[:, None] - b[None], axis=2) ** 1.5
        _, w = wp_discrete(uniform(a), uniform(b), 1.5)
        assert w == pytest.approx(permutation_min_cost(C), abs=1e-12)


def test_agrees_with_quantile_formula():
    rng = np.random.default_rng(6)
    for _ in range(20):
        mu = DiscreteMeasure(rng.normal(size=5), rng.dirichlet(np.ones(5)))
        nu = DiscreteMeasure(rng.normal(size=4), rng.dirichlet(np.ones(4)))
        plan, w = wp_discrete(mu, nu, 2.5)
        assert w == pytest.approx(wp_1d(mu, nu, 2.5), abs=1e-9)
        assert plan.marginal_error() < 1e-12


def test_coupled_objective_examples():
    mu = DiscreteMeasure([0.0, 2.0], [0.4, 0.6])
    assert coupled_objective(mu, BarycenterProblem([mu, mu])) == 0.0
    prob = BarycenterProblem([dirac([0.0]), dirac([2.0])], None, 2.0)
    assert coupled_objective(dirac([1.0]), prob) == pytest.approx(1.0)


def test_suboptimal_candidate_has_positive_gap():
    prob = BarycenterProblem([uniform([0.0, 1.0]), uniform([4.0, 6.0])], None, 2.0)
    _, cost = solve_mmot(prob)
    assert coupled_objective(dirac([3.0]), prob) > cost + 0.1


def test_induced_pair_plans():
    prob = BarycenterProblem([dirac([0.0]), dirac([3.0])], [0.25, 0.75], 2.0)
    plan, _ = solve_mmot(prob)
    assert len(induced_pair_plan(plan, 0).pairs) == 1
    mu = uniform([0.0, 1.0, 2.0])
    plan, _ = solve_mmot(BarycenterProblem([mu, mu]))
    pp = induced_pair_plan(plan, 1)
    assert pp.cost == 0.0
    with pytest.raises(IndexError):
        induced_pair_plan(plan, 5)


def test_induced_plans_are_optimal_on_random_instance():
    rng = np.random.default_rng(12)
    margs = [DiscreteMeasure(rng.normal(size=(4, 2)), rng.dirichlet(np.ones(4))) for _ in range(3)]
    prob = BarycenterProblem(margs, [0.2, 0.3, 0.5], 2.0)
    plan, cost = solve_mmot(prob)
    nu = pushforward_barycenter(plan)
    shares = []
    for i in range(3):
        pp = induced_pair_plan(plan, i, nu)
        _, w = wp_discrete(prob.marginals[i], nu, 2.0)
        assert pp.cost >= w - 1e-12
        assert pp.cost == pytest.approx(w, abs=1e-7)
        shares.append(pp.cost)
    assert float(np.dot(prob.lam, shares)) == pytest.approx(cost, abs=1e-9)
