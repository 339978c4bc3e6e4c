import logging

import numpy as np
import pytest

from conftest import line_config
from pxnehari.config import build_problem, desk_config
from pxnehari.grid import ScalarField
from pxnehari.nehari_manifolds import ManifoldTag, fibering_root, membership
from pxnehari.solver import (
    CONVERGED,
    DEGENERATE,
    MAX_ITERS,
    THRESHOLD_EXCEEDED,
    energy_threshold,
    estimate_sobolev_constant,
    initial_point,
    lemma_audit,
    minimize_on_K,
    ps_residual,
    sign_signature,
    sobolev_quotient,
    solve_three,
    threshold_value,
)


@pytest.fixture(scope="module")
def line():
    return build_problem(line_config())


@pytest.fixture(scope="module")
def line_K1(line):
    return minimize_on_K(1, line)


def test_threshold_arithmetic():
    assert threshold_value(1.5, 6.0, 1.0, 2) == pytest.approx(0.5)


def test_threshold_degenerate_flagged(caplog):
    with caplog.at_level(logging.WARNING):
        assert threshold_value(2.0, 2.0, 1.0, 2) == 0.0
    assert "degenerate" in caplog.text


def test_threshold_infinite_without_critical_set(line):
    assert line.critical.empty
    assert energy_threshold(line) == float("inf")


def test_sobolev_poincare_oracle():
    vals = []
    for n in (33, 65):
        prob = build_problem(line_config(resolution=[n]))
        est = estimate_sobolev_constant(prob, exponent=np.full(n, 2.0), starts=4)
        assert est.converged
        vals.append(est.value)
    assert vals[1] == pytest.approx(np.pi, rel=2e-4)
    assert vals[1] <= vals[0] * 1.01


def test_sobolev_quotient_scale_invariant(desk, rng):
    u = rng.normal(size=desk.grid.size)
    u[desk.grid.boundary_mask] = 0
    q = desk.q.values
    base = sobolev_quotient(u, desk, q)
    for c in (1e-3, -7.0, 1e4):
        assert sobolev_quotient(c * u, desk, q) == pytest.approx(base, rel=1e-9)


def test_sobolev_quotient_gradient(desk, rng):
    u = np.maximum(rng.normal(size=desk.grid.size), 0) + 0.1
    u[desk.grid.boundary_mask] = 0
    z = rng.normal(size=desk.grid.size)
    z[desk.grid.boundary_mask] = 0
    _, g = sobolev_quotient(u, desk, desk.q.values, with_grad=True)
    h = 1e-6
    fd = (sobolev_quotient(u + h * z, desk, desk.q.values) - sobolev_quotient(u - h * z, desk, desk.q.values)) / (2 * h)
    assert g @ z == pytest.approx(fd, rel=1e-5)


def test_sign_signature():
    assert sign_signature(np.array([0.0, 1.0])) == "positive"
    assert sign_signature(np.array([0.0, -1.0])) == "negative"
    assert sign_signature(np.array([1.0, -1.0])) == "sign-changing"


def test_K1_subcritical_line(line, line_K1):
    cp = line_K1
    assert cp.status == CONVERGED
    assert cp.residual_norm < 1e-6
    assert np.all(cp.field.values >= 0) and cp.sign_signature == "positive"
    assert membership(cp.field, 1, line)
    assert cp.threshold == float("inf")


def test_descent_is_monotone(line_K1):
    h = np.array(line_K1.energy_history)
    assert len(h) > 1 and np.all(np.diff(h) < 0)


def test_K2_mirrors_K1_for_odd_f():
    seeds = {
        "positive": {"bump": {"center": [0.4], "radius": 0.25, "amplitude": 1.0}},
        "negative": {"bump": {"center": [0.4], "radius": 0.25, "amplitude": -1.0}},
    }
    prob = build_problem(line_config(nonlinearity={"r": 3.5, "s": None}, seeds=seeds))
    k1 = minimize_on_K(1, prob, tol=1e-9)
    k2 = minimize_on_K(2, prob, tol=1e-9)
    assert k1.converged and k2.converged
    assert np.max(np.abs(k2.field.values + k1.field.values)) < 1e-6


def test_ps_residual_seed_and_idempotence(desk):
    u = ScalarField(desk.grid, initial_point(1, desk), True)
    r = ps_residual(u, 1, desk)
    assert r > 1e-2
    t = fibering_root(u, desk)
    assert t == pytest.approx(1.0, abs=1e-12)
    assert ps_residual(t * u, 1, desk) == pytest.approx(r, rel=1e-10)


def test_max_iters_status(line):
    cp = minimize_on_K(1, line, max_iter=2)
    assert cp.status == MAX_ITERS and cp.iterations == 2 and cp.message


def test_degenerate_start(line):
    cp = minimize_on_K(1, line, u0=np.zeros(line.grid.size))
    assert cp.status == DEGENERATE


def test_small_lambda_exceeds_threshold(desk_solution):
    prob = build_problem(desk_config(lam=1.0))
    cp = minimize_on_K(2, prob, threshold=desk_solution.threshold)
    assert cp.status == THRESHOLD_EXCEEDED
    assert "lambda" in cp.message and cp.residual_norm < 1e-6


def test_subcritical_solve_three_passes_gate():
    prob = build_problem(desk_config(resolution=17, q=5.5))
    assert prob.critical.empty
    res = solve_three(prob)
    assert res.threshold == float("inf")
    assert res.statuses == [CONVERGED] * 3
    assert res.success and res.lambda_star == prob.lam


def test_nodal_point(desk, desk_solution):
    cp = desk_solution.points[2]
    u = cp.field.values
    w = desk.energy.w
    assert w @ np.maximum(u, 0) > 0 and w @ np.maximum(-u, 0) > 0
    assert membership(cp.field, ManifoldTag.NODAL, desk_solution_problem(desk_solution))


def desk_solution_problem(res):
    return build_problem(desk_config(lam=res.lam))


def test_converged_points_are_weak_solutions(desk_solution, rng):
    prob = desk_solution_problem(desk_solution)
    disc = prob.disc
    for cp in desk_solution.points:
        g = prob.energy.gradient(cp.field.values)
        R0 = cp.absolute_residual / cp.residual_norm
        for _ in range(100):
            z = rng.normal(size=prob.grid.size)
            z[prob.grid.boundary_mask] = 0
            assert abs(g @ z) <= prob.tol["residual"] * R0 * disc.h1_norm(z)


def test_audit_converged_point(desk_solution):
    prob = desk_solution_problem(desk_solution)
    a = lemma_audit(desk_solution.points[0].field, 1, prob, c=desk_solution.lemma43_c)
    assert a.passed, a.to_dict()


def test_audit_negative_controls(desk, rng):
    zero = ScalarField.zeros(desk.grid)
    a = lemma_audit(zero, 1, desk, c=0.5)
    assert a.nehari_lhs == a.nehari_rhs == 0.0
    assert not a.on_manifold and not a.passed
    u = rng.normal(size=desk.grid.size)
    u[desk.grid.boundary_mask] = 0
    b = lemma_audit(ScalarField(desk.grid, u, True), 3, desk, c=0.5)
    assert not b.on_manifold and not b.nehari_ok and not b.passed
