import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pxnehari.exponent_field import ExponentField
from pxnehari.grid import Grid, ScalarField
from pxnehari.modular_space import (
    LuxemburgError,
    gradient_modular,
    gradient_norm,
    holder_check,
    luxemburg_norm,
    modular,
    poincare_ratio,
    sample_luxemburg,
)

# sigma with trapezoid-sum w |x/sigma|^(2+x) = 1 on 65 nodes, by a 40-digit
# mpmath bisection run independently of this package
LUX_X_2PX_65 = 0.63095913004810158135
# int_[0,1]^2 |grad sin(pi x) sin(pi y)|^1.5 by adaptive dblquad (err 3e-13)
GRADMOD_SINSIN_15 = 3.2157067265298034


def const(grid, v):
    return ExponentField.constant(grid, v)


def test_modular_constants(unit_interval, unit_square):
    for g in (unit_interval, unit_square):
        one = ScalarField(g, np.ones(g.size))
        assert modular(one, ExponentField(g, 1.5 + g.coords[0])) == pytest.approx(1.0, rel=1e-14)
        assert modular(2 * one, const(g, 2.0)) == pytest.approx(4.0, rel=1e-14)


def test_modular_linear_quadrature(unit_interval):
    u = ScalarField(unit_interval, unit_interval.coords[0])
    h = unit_interval.spacing[0]
    # trapezoid error for x^2 is h^2/6
    assert modular(u, const(unit_interval, 2.0)) == pytest.approx(1 / 3 + h**2 / 6, rel=1e-13)


def test_luxemburg_examples(unit_interval):
    g = unit_interval
    one = ScalarField(g, np.ones(g.size))
    assert luxemburg_norm(one, ExponentField(g, 2 + g.coords[0])) == pytest.approx(1.0, rel=1e-10)
    assert luxemburg_norm(2 * one, const(g, 2.0)) == pytest.approx(2.0, rel=1e-10)
    assert luxemburg_norm(ScalarField.zeros(g), const(g, 2.0)) == 0.0


def test_luxemburg_bisection_oracle(unit_interval):
    g = unit_interval
    u = ScalarField(g, g.coords[0])
    val = luxemburg_norm(u, ExponentField(g, 2 + g.coords[0]))
    assert val == pytest.approx(LUX_X_2PX_65, rel=1e-10)


def test_luxemburg_extreme_scales(unit_interval):
    g = unit_interval
    e = ExponentField(g, 1.5 + 0.3 * g.coords[0])
    u = ScalarField(g, np.sin(7 * g.coords[0]) + 0.1)
    base = luxemburg_norm(u, e)
    for c in (1e-150, 1e150):
        assert luxemburg_norm(c * u, e) == pytest.approx(c * base, rel=1e-9)


def test_luxemburg_unbracketable_raises():
    with pytest.raises(LuxemburgError):
        sample_luxemburg(np.array([1.0]), np.array([1.0]), np.array([np.nan]))


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.floats(-1e3, 1e3), min_size=9, max_size=9).filter(lambda v: any(abs(a) > 1e-6 for a in v)),
    st.floats(1e-3, 1e3),
)
def test_luxemburg_properties(vals, c):
    g = Grid((1.0,), (9,))
    e = ExponentField(g, 1.2 + 2.0 * g.coords[0])
    u = ScalarField(g, vals)
    n = luxemburg_norm(u, e)
    assert luxemburg_norm(c * u, e) == pytest.approx(c * n, rel=1e-9)
    assert modular(u.with_values(u.values / n), e) == pytest.approx(1.0, abs=1e-8)
    rho = modular(u, e)
    lo, hi = sorted((n ** e.inf_value, n ** e.sup_value))
    assert lo * (1 - 1e-12) <= rho <= hi * (1 + 1e-12)


def test_gradient_modular_examples(unit_interval, unit_square):
    g = unit_interval
    assert gradient_modular(ScalarField(g, np.full(g.size, 3.0)), const(g, 2.0)) == 0.0
    assert gradient_modular(ScalarField(g, g.coords[0]), const(g, 2.0)) == pytest.approx(1.0, rel=1e-13)


def test_gradient_modular_quadrature_oracle():
    errs = []
    for n in (33, 129):
        g = Grid((1.0, 1.0), (n, n))
        u = ScalarField.from_function(g, lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y))
        errs.append(abs(gradient_modular(u, const(g, 1.5)) / GRADMOD_SINSIN_15 - 1))
    assert errs[0] < 1e-3
    assert errs[1] < errs[0] / 10  # 4x refinement, second order


def test_gradient_norm_homogeneous(unit_square):
    u = ScalarField.from_function(unit_square, lambda x, y: x * (1 - x) * y * (1 - y))
    p = ExponentField(unit_square, 1.5 + 0.3 * unit_square.coords[0])
    assert gradient_norm(3 * u, p) == pytest.approx(3 * gradient_norm(u, p), rel=1e-9)


def test_holder_examples(unit_interval):
    g = unit_interval
    p = ExponentField(g, 1.5 + 0.3 * g.coords[0])
    one = ScalarField(g, np.ones(g.size))
    lhs, rhs = holder_check(one, one, p)
    assert lhs == pytest.approx(1.0) and rhs == pytest.approx(2.0)
    assert holder_check(ScalarField.zeros(g), one, p) == (0.0, 0.0)


def test_holder_random(unit_interval, rng):
    g = unit_interval
    p = ExponentField(g, 1.5 + 0.3 * g.coords[0])
    for _ in range(1000):
        f = ScalarField(g, rng.normal(size=g.size) * 10 ** rng.uniform(-3, 3))
        h = ScalarField(g, rng.normal(size=g.size) * 10 ** rng.uniform(-3, 3))
        lhs, rhs = holder_check(f, h, p)
        assert lhs <= rhs


def test_poincare_sine(unit_interval):
    g = unit_interval
    u = ScalarField.from_function(g, lambda x: np.sin(np.pi * x))
    p = const(g, 2.0)
    assert poincare_ratio(u, p) == pytest.approx(1 / np.pi, rel=1e-3)
    assert poincare_ratio(5 * u, p) == pytest.approx(poincare_ratio(u, p), rel=1e-12)


def test_poincare_refinement_converges():
    ratios = []
    for n in (33, 65, 129):
        g = Grid((1.0,), (n,))
        u = ScalarField.from_function(g, lambda x: x * (1 - x) * np.exp(x))
        ratios.append(poincare_ratio(u, ExponentField(g, 1.5 + 0.3 * g.coords[0])))
    d1, d2 = abs(ratios[1] - ratios[0]), abs(ratios[2] - ratios[1])
    assert d2 < d1 / 2


def test_poincare_rejects(unit_interval):
    g = unit_interval
    with pytest.raises(ValueError):
        poincare_ratio(ScalarField.zeros(g), const(g, 2.0))
    with pytest.raises(ValueError):
        poincare_ratio(ScalarField(g, np.ones(g.size)), const(g, 2.0))
