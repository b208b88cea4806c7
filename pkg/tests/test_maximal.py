from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import brute_maximal
from rdfextrap.lattice import Grid, dyadic_basis
from rdfextrap.maximal import (fractional_maximal, iterate_maximal, maximal, op_norm_estimate,
                               rescaling_check, self_improve_series, sharp_maximal)
from rdfextrap.spaces import WeightedLebesgue

positive = st.lists(st.floats(1e-3, 1e3), min_size=8, max_size=8).map(np.array)


def test_point_mass_example():
    b = dyadic_basis(Grid.unit(1, 4))
    np.testing.assert_allclose(maximal(np.array([1.0, 0, 0, 0]), b), [1, 0.5, 0.25, 0.25])


def test_constant_is_fixed():
    b = dyadic_basis(Grid.unit(2, 4))
    np.testing.assert_allclose(maximal(np.full(16, 3.0), b), 3.0)


@given(positive, st.floats(0.5, 3))
def test_matches_brute_force(f, p):
    b = dyadic_basis(Grid.unit(1, 8))
    np.testing.assert_allclose(maximal(f, b, p), brute_maximal(f, 8, p), rtol=1e-12)


def test_nonzero_gives_positive(rng):
    b = dyadic_basis(Grid.unit(1, 16))
    f = np.zeros(16)
    f[rng.integers(16)] = 1.0
    assert np.all(maximal(f, b) > 0)


def test_iterate_composes():
    b = dyadic_basis(Grid.unit(1, 8))
    f = np.arange(1.0, 9.0)
    np.testing.assert_allclose(iterate_maximal(f, b, 2), maximal(maximal(f, b), b))


def test_fractional_limits(rng):
    g = Grid.centered(1, 8)
    b = dyadic_basis(g)
    f = rng.exponential(size=8)
    np.testing.assert_allclose(fractional_maximal(f, b, 1e-14), maximal(f, b), rtol=1e-12)
    np.testing.assert_allclose(fractional_maximal(g.ones(), b, 0.5), 2.0**0.5)
    assert np.all(fractional_maximal(f, b, 0.5) <= 2.0**0.5 * maximal(f, b) * (1 + 1e-12))


def test_sharp_examples(rng):
    b = dyadic_basis(Grid.unit(1, 2))
    np.testing.assert_allclose(sharp_maximal(np.full(2, 4.0), b), 0.0, atol=1e-15)
    np.testing.assert_allclose(sharp_maximal(np.array([1.0, 0.0]), b), 0.5)
    b8 = dyadic_basis(Grid.unit(1, 8))
    for _ in range(100):
        f = rng.normal(size=8)
        assert np.all(sharp_maximal(f, b8) <= 2 * maximal(f, b8) * (1 + 1e-12))


def test_op_norm_linf_is_one():
    g = Grid.unit(1, 8)
    est = op_norm_estimate(WeightedLebesgue(g, np.inf), dyadic_basis(g), starts=2, iters=20)
    assert est.value == 1.0


def test_op_norm_lp_exceeds_one():
    g = Grid.unit(1, 16)
    est = op_norm_estimate(WeightedLebesgue(g, 2.0), dyadic_basis(g), starts=0)
    assert est.value > 1.0
    # the first-cell indicator alone already beats the constant function
    f = np.zeros(16)
    f[0] = 1.0
    X = WeightedLebesgue(g, 2.0)
    assert X.norm(maximal(f, dyadic_basis(g))) / X.norm(f) > 1.0


@pytest.mark.parametrize("q,C1", [(2.0, 1.0), (4.0, 1.5), (np.inf, 2.0)])
def test_self_improve_constant(q, C1):
    b = dyadic_basis(Grid.unit(1, 8))
    qp = 1.0 if np.isinf(q) else q / (q - 1)
    c = C1 * qp
    res = self_improve_series(np.ones(8), b, q, C1)
    np.testing.assert_allclose(res.series, c / (c - 1), rtol=1e-11)
    assert res.c2 == pytest.approx((c - 1) / c, rel=1e-11)


def test_self_improve_guard():
    b = dyadic_basis(Grid.unit(1, 4))
    with pytest.raises(ValueError):
        self_improve_series(np.ones(4), b, 2.0, 0.5)


def test_rescaling_constant_and_random(rng):
    g = Grid.unit(1, 16)
    b = dyadic_basis(g)
    X = WeightedLebesgue(g, 3.0, rng.exponential(size=16))
    (one,) = rescaling_check(X, b, 0.5, [np.ones(16)])
    assert one.lhs == pytest.approx(1.0) and one.rhs == pytest.approx(1.0)
    for rec in rescaling_check(X, b, 0.5, [rng.exponential(size=16) for _ in range(10)]):
        assert rec.rel_err <= 1e-10


def test_rescaled_operator_norm_direction(rng):
    g = Grid.unit(1, 8)
    b = dyadic_basis(g)
    X = WeightedLebesgue(g, 3.0)
    K = op_norm_estimate(X, b, starts=4, iters=50).value
    Xq = X.power(0.5)
    for _ in range(10):
        f = rng.exponential(size=8)
        fq = f**0.5
        assert Xq.norm(maximal(fq, b)) <= K**0.5 * Xq.norm(fq) * (1 + 1e-9)
