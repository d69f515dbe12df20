import io
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import normal_cdf_bisection_ppf
from pwbarycenter import DiscreteMeasure, ValidationError, load_measure
from pwbarycenter.measures import (QuantileGrid, common_dim, dirac, discretize_gaussian,
                                   dump_measure, merge_close_atoms, midpoint_levels,
                                   normal_ppf, quantile, quantile_function, uniform)


def test_csv_parse():
    mu = load_measure(b"0,0.5\n1,0.5", format="csv")
    assert mu.dim == 1
    np.testing.assert_array_equal(mu.points[:, 0], [0.0, 1.0])
    np.testing.assert_array_equal(mu.weights, [0.5, 0.5])


def test_csv_duplicates_merge():
    mu = load_measure(b"0,0.3\n0,0.2\n1,0.5", format="csv")
    np.testing.assert_array_equal(mu.points[:, 0], [0.0, 1.0])
    np.testing.assert_allclose(mu.weights, [0.5, 0.5], atol=1e-15)


def test_weight_sum_rejected():
    with pytest.raises(ValidationError, match="0.8"):
        load_measure(b"0,0.4\n1,0.4", format="csv")


@pytest.mark.parametrize("points, weights", [
    ([0.0, 1.0], [0.5, -0.5 + 1.0 - 1.0]),
    ([[0.0], [np.nan]], [0.5, 0.5]),
    ([], []),
    ([0.0, 1.0], [1.0]),
])
def test_invalid_measures(points, weights):
    with pytest.raises(ValidationError):
        DiscreteMeasure(points, weights)


def test_small_renormalization():
    mu = DiscreteMeasure([0.0, 1.0], [0.5, 0.5 + 5e-7])
    assert abs(mu.weights.sum() - 1.0) < 1e-15


def test_arrays_are_read_only():
    mu = uniform([0.0, 1.0])
    with pytest.raises(ValueError):
        mu.weights[0] = 0.1


def test_json_round_trip_and_sniffing(tmp_path):
    mu = DiscreteMeasure([[0.1, 1 / 3], [2.0, -1e-17]], [1 / 3, 2 / 3])
    buf = io.StringIO()
    dump_measure(mu, buf, "json")
    back = load_measure(buf.getvalue().encode())
    np.testing.assert_array_equal(back.points, mu.points)
    np.testing.assert_array_equal(back.weights, mu.weights)
    path = tmp_path / "m.csv"
    with open(path, "w") as fh:
        dump_measure(mu, fh, "csv")
    back = load_measure(path)
    np.testing.assert_array_equal(back.points, mu.points)
    assert json.loads(buf.getvalue())["dim"] == 2


def test_bad_files():
    with pytest.raises(ValidationError):
        load_measure(b"0,abc\n", format="csv")
    with pytest.raises(ValidationError):
        load_measure(b"0,1\n", format="yaml")


def test_gaussian_discretization():
    one = discretize_gaussian(0.0, 1.0, 1)
    np.testing.assert_array_equal(one.points[:, 0], [0.0])
    two = discretize_gaussian(0.0, 1.0, 2)
    q = normal_cdf_bisection_ppf(0.75)
    np.testing.assert_allclose(np.sort(two.points[:, 0]), [-q, q], atol=1e-11)
    assert abs(q - 0.6744897501960817) < 1e-12
    shifted = discretize_gaussian(3.0, 2.0, 2)
    np.testing.assert_allclose(np.sort(shifted.points[:, 0]), [3 - 2 * q, 3 + 2 * q], atol=1e-11)


def test_normal_ppf_matches_oracle():
    for y in [1e-6, 0.01, 0.3, 0.5, 0.77, 0.999]:
        assert abs(normal_ppf(y) - normal_cdf_bisection_ppf(y)) < 1e-10


@pytest.mark.parametrize("weights, y, expected", [
    ([0.5, 0.5], 0.3, 0.0),
    ([0.5, 0.5], 0.5, 0.0),
    ([0.25, 0.25, 0.5], 0.6, 2.0),
])
def test_quantile_examples(weights, y, expected):
    mu = DiscreteMeasure(np.arange(len(weights), dtype=float), weights)
    assert quantile(mu, y) == expected


def test_quantile_rejects_levels_outside():
    with pytest.raises(ValidationError):
        quantile_function(uniform([0.0, 1.0]), [0.0])
    with pytest.raises(ValidationError):
        quantile(uniform([[0.0, 1.0]]), 0.5)


def test_merge_close_atoms_and_dims():
    mu = merge_close_atoms(np.array([[0.0], [1e-12], [1.0]]), np.array([0.25, 0.25, 0.5]), 1e-9)
    assert mu.n_atoms == 2
    assert common_dim([uniform([0.0]), dirac([1.0])]) == 1
    with pytest.raises(ValidationError):
        common_dim([uniform([0.0]), dirac([1.0, 2.0])])


def test_quantile_grid():
    g = QuantileGrid.of(uniform([2.0, 0.0, 1.0]), 6)
    np.testing.assert_array_equal(g.values, [0, 0, 1, 1, 2, 2])
    assert g.is_monotone()
    np.testing.assert_allclose(g.levels, midpoint_levels(6))
    assert g.to_measure().n_atoms == 3


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=1, max_size=12),
       st.integers(1, 50))
def test_quantiles_monotone_and_in_support(xs, m):
    mu = uniform(np.array(xs))
    g = QuantileGrid.of(mu, m)
    assert g.is_monotone()
    assert set(g.values.tolist()) <= set(mu.points[:, 0].tolist())
