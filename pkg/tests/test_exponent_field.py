import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pxnehari.exponent_field import (
    ExponentField,
    conjugate_exponent,
    critical_exponent,
    critical_set,
    inf_sup,
    log_holder_diagnostic,
)
from pxnehari.grid import Grid


def test_grid_masks_geometric_boundary(unit_square):
    g = unit_square
    x, y = g.coords
    on_edge = np.isclose(x, 0) | np.isclose(x, 1) | np.isclose(y, 0) | np.isclose(y, 1)
    assert np.array_equal(g.boundary_mask, on_edge)
    assert len(g.interior) == 31 * 31


def test_grid_rejects_too_few_nodes():
    with pytest.raises(ValueError):
        Grid((1.0,), (2,))


def test_inf_sup_constant(unit_interval):
    assert inf_sup(ExponentField.constant(unit_interval, 2.0)) == (2.0, 2.0)


def test_inf_sup_two_halves(unit_interval):
    x = unit_interval.coords[0]
    e = ExponentField(unit_interval, np.where(x < 0.5, 1.5, 1.8))
    assert inf_sup(e) == (1.5, 1.8)


def test_inf_sup_linear(unit_interval):
    e = ExponentField(unit_interval, 1.5 + 0.3 * unit_interval.coords[0])
    lo, hi = inf_sup(e)
    assert lo == pytest.approx(1.5, abs=1e-15)
    assert hi == pytest.approx(1.8, abs=1e-15)
    assert lo in e.values and hi in e.values


def test_exponent_values_read_only(unit_interval):
    e = ExponentField.constant(unit_interval, 2.0)
    with pytest.raises(ValueError):
        e.values[0] = 3.0


def test_conjugate_examples(unit_interval):
    assert np.all(conjugate_exponent(ExponentField.constant(unit_interval, 2.0)).values == 2.0)
    assert np.allclose(conjugate_exponent(ExponentField.constant(unit_interval, 1.5)).values, 3.0)
    p = ExponentField(unit_interval, 1.5 + 0.3 * unit_interval.coords[0])
    pc = conjugate_exponent(p).values
    assert np.allclose(pc * (p.values - 1.0), p.values, rtol=1e-14)


def test_conjugate_rejects_p_le_1(unit_interval):
    with pytest.raises(ValueError):
        conjugate_exponent(ExponentField.constant(unit_interval, 1.0))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(1.05, 20.0), min_size=3, max_size=3))
def test_conjugate_involution_and_duality(vals):
    g = Grid((1.0,), (3,))
    p = ExponentField(g, vals)
    pc = conjugate_exponent(p)
    assert np.allclose(conjugate_exponent(pc).values, p.values, rtol=0, atol=1e-12 * max(vals))
    assert np.allclose(1 / p.values + 1 / pc.values, 1.0, atol=1e-12)


def test_critical_exponent_examples(unit_square):
    assert np.allclose(critical_exponent(ExponentField.constant(unit_square, 1.5), 2).values, 6.0)
    with pytest.raises(ValueError):
        critical_exponent(ExponentField.constant(unit_square, 1.0), 2)
    with pytest.raises(ValueError):
        critical_exponent(ExponentField.constant(unit_square, 2.0), 2)
    p = ExponentField(unit_square, 1.5 + 0.2 * unit_square.coords[0])
    ps = critical_exponent(p, 2).values
    assert np.allclose(1 / ps, 1 / p.values - 0.5, atol=1e-12)


def test_critical_set_cases(unit_square):
    p = ExponentField.constant(unit_square, 1.5)
    ps = critical_exponent(p)
    full = critical_set(ps, ps, tol=0.0)
    assert full.mask.all() and full.q_minus == 6.0
    sub = critical_set(ExponentField(unit_square, ps.values - 0.5), ps)
    assert sub.empty and sub.q_minus == np.inf
    left = unit_square.coords[0] <= 0.5
    q = ExponentField(unit_square, np.where(left, ps.values, ps.values - 1.0))
    half = critical_set(q, ps)
    assert np.array_equal(half.mask, left)
    assert half.q_minus == 6.0


def test_log_holder_constant_zero(unit_square):
    assert log_holder_diagnostic(ExponentField.constant(unit_square, 2.0)) == 0.0


def test_log_holder_linear_bruteforce():
    g = Grid((1.0,), (17,))
    e = ExponentField(g, 1.5 + 0.3 * g.coords[0])
    x = g.coords[0]
    best = 0.0
    for i in range(17):
        for j in range(17):
            d = abs(x[i] - x[j])
            if 0 < d < 0.5:
                best = max(best, 0.3 * d * np.log(1 / d))
    val = log_holder_diagnostic(e)
    assert 0 < val == pytest.approx(best, rel=1e-12)


def test_log_holder_step_grows_with_refinement():
    vals = []
    for n in (17, 65):
        g = Grid((1.0,), (n,))
        vals.append(log_holder_diagnostic(ExponentField(g, np.where(g.coords[0] < 0.5, 1.5, 1.8))))
    assert vals[1] > vals[0]
