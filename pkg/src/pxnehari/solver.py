"""Constrained minimization of the energy over K1, K2, K3.

Each run is a projected descent: the energy gradient is mapped to a search
direction by a discrete Riesz map, projected onto the tangent space of the
constraint set, and every trial point is pulled back onto the manifold by
rescaling its positive and negative parts with fibering roots.  Steps are
accepted by Armijo backtracking on the energy.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from dataclasses import field as dc_field

import numpy as np
import scipy.sparse.linalg as spla
from scipy.optimize import brentq

from .energy import EnergyBreakdown, verify_F2
from .grid import ScalarField
from .nehari_manifolds import (
    ManifoldError,
    ManifoldTag,
    SplitFiber,
    _active,
    _grad_modular_arr,
    _solve_scale,
    constraint_gradient_pairing,
    constraint_jacobian,
    constraint_scales,
    fibering_root,
    membership,
    project_split,
    project_to_M3,
    tangent_project_array,
)
from .modular_space import gradient_norm, sample_luxemburg

log = logging.getLogger(__name__)

CONVERGED = "converged"
MAX_ITERS = "max_iters"
THRESHOLD_EXCEEDED = "threshold_exceeded"
DEGENERATE = "degenerate"

ARMIJO_C = 1e-4
BACKTRACK = 0.5


@dataclass
class CriticalPoint:
    field: ScalarField
    energy: EnergyBreakdown
    residual_norm: float  # restricted gradient relative to the seed's
    absolute_residual: float
    constraint_residuals: tuple[float, float]
    sign_signature: str
    iterations: int
    status: str
    manifold: int
    lam: float
    threshold: float = float("inf")
    message: str = ""
    energy_history: list = dc_field(default_factory=list, repr=False)

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED


def sign_signature(u: np.ndarray) -> str:
    pos, neg = bool(np.any(u > 0)), bool(np.any(u < 0))
    if pos and neg:
        return "sign-changing"
    if pos:
        return "positive"
    if neg:
        return "negative"
    return "zero"


# -- Sobolev-type constants ----------------------------------------------------


@dataclass
class SobolevEstimate:
    value: float
    field: np.ndarray = dc_field(repr=False)
    converged: bool = True
    starts: list = dc_field(default_factory=list)


def _lux_and_grad(vals, weights, exps, reg=0.0):
    """Luxemburg norm of samples and its derivative with respect to ``vals``."""
    sigma = sample_luxemburg(vals, weights, exps)
    a = np.sqrt(vals**2 + reg**2) if reg else np.abs(vals)
    nz = a > 0
    t = np.zeros_like(a)
    t[nz] = weights[nz] * exps[nz] * np.exp(exps[nz] * (np.log(a[nz]) - np.log(sigma)))
    denom = float(np.sum(t)) / sigma
    # d(sum w |v/s|^e) / dv = t v / a^2 with t = w e |v/s|^e
    dv = np.zeros_like(a)
    dv[nz] = t[nz] * vals[nz] / a[nz] / a[nz]
    return sigma, dv / denom


def sobolev_quotient(u: np.ndarray, problem, exps: np.ndarray, with_grad=False):
    """``|| |grad u| ||_p / ||u||_e`` and optionally its gradient in u."""
    disc = problem.disc
    pe = problem.energy.pe
    gu = disc.element_gradients(u)
    g = np.sqrt(np.sum(gu**2, axis=1))
    gs = np.repeat(g, disc.nverts).reshape(disc.elements.shape)
    if not with_grad:
        num = sample_luxemburg(gs, disc.sample_weights, pe)
        den = sample_luxemburg(u, disc.weights, exps)
        return num / den
    num, dnum_s = _lux_and_grad(gs, disc.sample_weights, pe, reg=disc.eps)
    den, dden = _lux_and_grad(u, disc.weights, exps)
    # chain rule through g_T = |grad u|_T, regularized at zero gradient
    dg = np.sum(dnum_s, axis=1) / np.sqrt(g**2 + disc.eps**2)
    local = np.einsum("ekd,ed->ek", disc.basis_grads, dg[:, None] * gu)
    dnum = disc.scatter(local)
    R = num / den
    grad = R * (dnum / num - dden / den)
    grad[problem.grid.boundary_mask] = 0.0
    return R, grad


def _random_start(problem, rng):
    g = problem.grid
    x = [c / L for c, L in zip(g.coords, g.extents)]
    if rng.uniform() < 0.5:
        u = np.zeros(g.size)
        for _ in range(4):
            k = rng.integers(1, 4, size=g.dim)
            term = rng.normal()
            for xi, ki in zip(x, k):
                term = term * np.sin(np.pi * ki * xi)
            u += term
    else:
        c = rng.uniform(0.2, 0.8, size=g.dim)
        R = rng.uniform(0.1, 0.4)
        d2 = sum((xi - ci) ** 2 for xi, ci in zip(x, c)) / R**2
        u = np.maximum(1 - d2, 0) ** 2
        if not np.any(u[g.interior]):
            u = np.prod([np.sin(np.pi * xi) for xi in x], axis=0)
    u[g.boundary_mask] = 0.0
    return u / np.max(np.abs(u))


def _minimize_quotient(problem, exps, u, max_iter, rtol):
    disc = problem.disc
    R, grad = sobolev_quotient(u, problem, exps, with_grad=True)
    alpha = 1.0
    converged = False
    for it in range(max_iter):
        d = disc.riesz(grad)
        slope = float(grad @ d)
        if slope <= 0:
            converged = True
            break
        alpha = min(alpha * 2.0, 1e6)
        while True:
            trial = u - alpha * d / max(np.max(np.abs(u)), 1e-300)
            trial /= np.max(np.abs(trial))
            Rt = sobolev_quotient(trial, problem, exps)
            if Rt <= R - ARMIJO_C * alpha * slope / max(np.max(np.abs(u)), 1e-300):
                break
            alpha *= BACKTRACK
            if alpha < 1e-14:
                return u, R, True
        u = trial
        R_old = R
        R, grad = sobolev_quotient(u, problem, exps, with_grad=True)
        if R_old - R <= rtol * R:
            converged = True
            break
    return u, R, converged


def estimate_sobolev_constant(
    problem, exponent=None, starts: int | None = None, rng=None, max_iter=400, rtol=1e-9
) -> SobolevEstimate:
    """Multi-start minimization of ``|| |grad u| ||_p / ||u||_e`` (e = q by default).

    Projected gradient descent with the H^1_0 Riesz map, renormalizing to unit
    max-norm after every step (the quotient is scale invariant).
    """
    exps = problem.q.values if exponent is None else np.asarray(exponent)
    starts = problem.config.sobolev_starts if starts is None else starts
    rng = np.random.default_rng(problem.config.rng_seed) if rng is None else rng
    best = None
    values = []
    all_conv = True
    for _ in range(starts):
        u0 = _random_start(problem, rng)
        u, R, conv = _minimize_quotient(problem, exps, u0, max_iter, rtol)
        values.append(R)
        all_conv &= conv
        if best is None or R < best[1]:
            best = (u, R)
    if not all_conv:
        log.warning("Sobolev quotient minimization hit the iteration cap")
    return SobolevEstimate(best[1], best[0], all_conv, values)


def embedding_constant(problem, exponent, **kw) -> float:
    """Estimate of ``sup ||u||_e / || |grad u| ||_p`` on the grid."""
    return 1.0 / estimate_sobolev_constant(problem, exponent, **kw).value


def sobolev_constant(problem, **kw) -> float:
    S = problem.config.sobolev_constant
    if S == "estimate":
        return estimate_sobolev_constant(problem, **kw).value
    return float(S)


def threshold_value(p_plus: float, q_minus_A: float, S: float, N: int) -> float:
    """``(1/p+ - 1/q-_A) S^N``, clipped to 0 (with a warning) when p+ >= q-_A."""
    gap = 1.0 / p_plus - 1.0 / q_minus_A
    if gap <= 0:
        log.warning("energy threshold degenerate: p+ >= q-_A")
        return 0.0
    return gap * S**N


def energy_threshold(problem, S: float | None = None) -> float:
    """Concentration gate; +inf when the critical set is empty."""
    if problem.critical.empty:
        return float("inf")
    S = sobolev_constant(problem) if S is None else S
    return threshold_value(problem.p.sup_value, problem.critical.q_minus, S, problem.dim)


# -- restricted gradient -----------------------------------------------------------


def _ps_from(problem, m, g, jac) -> float:
    disc = problem.disc
    v = disc.riesz(g)
    (d1, d2), _, _ = jac
    D = [(d1, d2)[i] for i in _active(m)]
    N = [disc.riesz(d) for d in D]
    G = np.array([[di @ nj for nj in N] for di in D])
    c = np.array([di @ v for di in D])
    val = float(g @ v) - float(c @ np.linalg.solve(G, c))
    return float(np.sqrt(max(val, 0.0)))


def ps_residual(u: ScalarField, m, problem) -> float:
    """Dual norm of the energy gradient restricted to the tangent space.

    Equals ``max <Phi'(u), z>`` over tangent ``z`` with unit discrete H^1_0
    norm, computed by an orthogonal projection in that inner product.
    """
    g = problem.energy.gradient(u.values)
    jac = constraint_jacobian(u.values, problem, g)
    return _ps_from(problem, m, g, jac)


# -- descent -----------------------------------------------------------------------


class _Metric:
    """Riesz map for the search direction.

    ``laplace`` uses the fixed H^1_0 Gram matrix.  ``adaptive`` uses the
    Dirichlet Hessian at the current iterate with the gradient floor raised
    to a fraction of its maximum, which keeps the metric positive definite
    and uniformly elliptic.
    """

    def __init__(self, problem, kind="adaptive", floor=1e-3):
        self.problem = problem
        self.kind = kind
        self.floor = floor

    def __call__(self, u, g):
        disc = self.problem.disc
        if self.kind == "laplace":
            return disc.riesz(g)
        pe = self.problem.energy.pe
        g2 = np.sum(disc.element_gradients(u) ** 2, axis=1)
        delta2 = (self.floor**2) * max(float(g2.max()), 1e-300)
        coef = np.mean((pe - 1.0) * (g2[:, None] + delta2) ** ((pe - 2.0) / 2.0), axis=1)
        K = disc.interior_block(disc.stiffness(coef))
        return disc.riesz(g, spla.splu(K))


def _reproject(problem, trial, m, scales):
    e = problem.energy
    bmask = problem.grid.boundary_mask
    if m == 1:
        w = np.maximum(trial, 0.0)
        w[bmask] = 0.0
        fib_a = _scalar_fiber(e, w, 1)
        a = _solve_scale(fib_a, scales[0], local=True)
        return a * w, (a, 0.0)
    if m == 2:
        w = np.maximum(-trial, 0.0)
        w[bmask] = 0.0
        fib_b = _scalar_fiber(e, w, 2)
        b = _solve_scale(fib_b, scales[1], local=True)
        return -b * w, (0.0, b)
    Up = np.maximum(trial, 0.0)
    Um = np.maximum(-trial, 0.0)
    Up[bmask] = Um[bmask] = 0.0
    a, b = project_split(e, Up, Um, guess=scales, local=True)
    return a * Up - b * Um, (a, b)


def _scalar_fiber(energy, w, which):
    zero = np.zeros_like(w)
    if which == 1:
        fib = SplitFiber(energy, w, zero)
        return lambda t: fib.constraints(t, 0.0)[0]
    fib = SplitFiber(energy, zero, w)
    return lambda t: fib.constraints(0.0, t)[1]


def initial_point(m, problem) -> np.ndarray:
    m = ManifoldTag(m)
    g = problem.grid
    if m == ManifoldTag.POSITIVE:
        w0 = ScalarField(g, problem.seeds["positive"], True)
        return fibering_root(w0, problem) * w0.values
    if m == ManifoldTag.NEGATIVE:
        w1 = ScalarField(g, problem.seeds["negative"], True)
        return fibering_root(w1, problem) * w1.values
    w0 = ScalarField(g, problem.seeds["positive"], True)
    w1 = ScalarField(g, problem.seeds["negative"], True)
    a, b = project_to_M3(w0, w1, problem)
    return a * w0.values + b * w1.values


def minimize_on_K(
    m,
    problem,
    threshold: float | None = None,
    tol: float | None = None,
    max_iter: int | None = None,
    metric: str = "adaptive",
    u0: np.ndarray | None = None,
) -> CriticalPoint:
    """Minimize the energy over K_m; see the module docstring for the scheme.

    ``tol`` is relative to the restricted gradient of the starting point.
    ``threshold`` is the concentration gate (computed when None).
    """
    m = ManifoldTag(m)
    e = problem.energy
    tol = problem.tol["residual"] if tol is None else tol
    max_iter = problem.config.max_iterations if max_iter is None else max_iter
    if threshold is None:
        threshold = energy_threshold(problem)
    riesz = _Metric(problem, metric)

    def finish(u, status, it, res, res0, history, message=""):
        phis = e.constraints(u)
        br = e.breakdown(u)
        if status == CONVERGED and not br.total < threshold:
            status = THRESHOLD_EXCEEDED
            message = (
                f"energy {br.total:.6g} is not below the threshold {threshold:.6g}; "
                f"increase lambda (lambda = {problem.lam:g})"
            )
        return CriticalPoint(
            field=ScalarField(problem.grid, u, True),
            energy=br,
            residual_norm=res / res0 if res0 > 0 else (0.0 if res == 0 else float("nan")),
            absolute_residual=res,
            constraint_residuals=(float(phis[0]), float(phis[1])),
            sign_signature=sign_signature(u),
            iterations=it,
            status=status,
            manifold=int(m),
            lam=problem.lam,
            threshold=threshold,
            message=message,
            energy_history=history,
        )

    try:
        u = initial_point(m, problem) if u0 is None else np.asarray(u0, dtype=float).copy()
    except ManifoldError as exc:
        return finish(np.zeros(problem.grid.size), DEGENERATE, 0, np.nan, np.nan, [], str(exc))
    start_tol = max(problem.tol["constraint"], 1e-6)
    if not membership(ScalarField(problem.grid, u, True), m, problem, tol=start_tol):
        return finish(u, DEGENERATE, 0, np.nan, np.nan, [], "starting point is not in K_m")

    scales = (1.0, 1.0)
    energy = e.value(u)
    history = [energy]
    alpha = 1.0
    res0 = None
    it = 0
    for it in range(max_iter + 1):
        g = e.gradient(u)
        jac = constraint_jacobian(u, problem, g)
        res = _ps_from(problem, m, g, jac)
        if res0 is None:
            res0 = res
        if res <= tol * res0:
            return finish(u, CONVERGED, it, res, res0, history)
        if it == max_iter:
            break
        try:
            d = tangent_project_array(u, riesz(u, g), m, problem, jac)
        except ManifoldError as exc:
            return finish(u, DEGENERATE, it, res, res0, history, str(exc))
        slope = float(g @ d)
        if slope <= 0:
            return finish(u, DEGENERATE, it, res, res0, history, "not a descent direction")
        alpha = min(alpha * 2.0, 1e3)
        accepted = False
        while alpha > 1e-12:
            try:
                trial, tscales = _reproject(problem, u - alpha * d, m, (1.0, 1.0))
            except ManifoldError:
                alpha *= BACKTRACK
                continue
            et = e.value(trial)
            if et <= energy - ARMIJO_C * alpha * slope and et < energy:
                accepted = True
                break
            alpha *= BACKTRACK
        if not accepted:
            return finish(
                u, MAX_ITERS, it, res, res0, history, "line search stalled before tolerance"
            )
        u, energy = trial, et
        history.append(energy)
    return finish(u, MAX_ITERS, it, res, res0, history, f"no convergence in {max_iter} iterations")


# -- three solutions ---------------------------------------------------------------


def lemma43_constant(problem, embeddings: dict | None = None, **kw) -> float:
    """Lower bound ``c`` for ``|| |grad u_+-| ||_p`` at manifold points.

    On the manifold ``rho_p(grad v) = lam int f(u) v + rho_q(v)`` for each
    sign part v.  Bounding the right side through the embedding constants
    ``E_e`` (``||v||_e <= E_e ||grad v||_p``) and the norm-modular bracket
    gives ``min(x^p-, x^p+) <= lam sum_k a_k max((E x)^{e-}, (E x)^{e+}) +
    max((E_q x)^{q-}, (E_q x)^{q+})`` for ``x = ||grad v||_p``.  ``c`` is the
    smallest positive x where that inequality can first hold.
    """
    terms = problem.nl.growth_terms()
    if embeddings is None:
        embeddings = {}
    ests = []
    for exps, coef in terms:
        key = (float(np.min(exps)), float(np.max(exps)))
        E = embeddings.get(key)
        if E is None:
            E = embedding_constant(problem, exps, **kw)
            embeddings[key] = E
        ests.append((key, E, coef))
    qkey = (problem.q.inf_value, problem.q.sup_value)
    if qkey not in embeddings:
        embeddings[qkey] = embedding_constant(problem, problem.q.values, **kw)
    Eq = embeddings[qkey]
    pm, pp = problem.p.inf_value, problem.p.sup_value
    lam = problem.lam

    def h(x):
        lhs = min(x**pm, x**pp)
        rhs = max((Eq * x) ** qkey[0], (Eq * x) ** qkey[1])
        for (em, ep), E, coef in ests:
            rhs += lam * coef * max((E * x) ** em, (E * x) ** ep)
        return lhs - rhs

    # h > 0 near 0 because every exponent on the right exceeds p+
    hi = 1e-12
    while h(hi) <= 0 and hi > 1e-300:
        hi *= 1e-3
    lo = hi
    while h(hi) > 0:
        lo, hi = hi, hi * 1.5
        if hi > 1e12:
            return float("inf")
    return float(brentq(h, lo, hi, rtol=1e-12))


@dataclass
class LemmaAudit:
    manifold: int
    on_manifold: bool
    nehari_lhs: float
    nehari_rhs: float
    nehari_rel_error: float
    energy: float
    sandwich_lower: float
    sandwich_upper: float
    sandwich_ok: bool
    pairing: float
    pairing_ok: bool
    lemma43_c: float
    gradient_norms: tuple[float, float]
    lemma43_ok: bool
    nehari_tol: float = 1e-6

    @property
    def nehari_ok(self) -> bool:
        return self.nehari_rel_error <= self.nehari_tol

    @property
    def passed(self) -> bool:
        return (
            self.on_manifold
            and self.nehari_ok
            and self.sandwich_ok
            and self.pairing_ok
            and self.lemma43_ok
        )

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["gradient_norms"] = list(self.gradient_norms)
        d["nehari_ok"] = self.nehari_ok
        d["passed"] = self.passed
        return d


def lemma_audit(
    u: ScalarField, m, problem, c: float | None = None, nehari_tol: float = 1e-6
) -> LemmaAudit:
    """Report the Nehari identity, the energy sandwich, the sign of the
    constraint pairing and the gradient lower bound at ``u``.

    The sandwich uses ``C1^-1 = min(1/p+ - 1/q-, 1/p+ - 1/c2)`` and the upper
    constant ``1/p-``.  ``c`` defaults to :func:`lemma43_constant`.
    """
    m = ManifoldTag(m)
    e = problem.energy
    v = u.values
    br = e.breakdown(v)
    rho_grad = float(_grad_modular_arr(e, v))
    rho_q = float(np.sum(e.w * np.abs(v) ** e.qv))
    lam_fu = e.lam * float(np.sum(e.w * problem.nl.f(v) * v))
    rhs = rho_q + lam_fu
    rel = abs(rho_grad - rhs) / max(rho_grad, rhs, np.finfo(float).tiny)
    pp, pm = problem.p.sup_value, problem.p.inf_value
    c2 = problem.nl.constants[1]
    inv_c1 = min(1 / pp - 1 / problem.q.inf_value, 1 / pp - 1 / c2)
    lower, upper = inv_c1 * rho_grad, rho_grad / pm
    tol = 1e-12 * max(abs(br.total), rho_grad, 1.0)
    sandwich_ok = lower - tol <= br.total <= upper + tol
    on = membership(u, m, problem)
    try:
        pairing = constraint_gradient_pairing(u, m, problem)
    except Exception:  # noqa: BLE001 - report-only
        pairing = float("nan")
    c = lemma43_constant(problem) if c is None else c
    norms = tuple(
        gradient_norm(u.with_values(np.maximum(sgn * v, 0.0)), problem.p) for sgn in (1.0, -1.0)
    )
    need = {ManifoldTag.POSITIVE: (0,), ManifoldTag.NEGATIVE: (1,), ManifoldTag.NODAL: (0, 1)}[m]
    lemma43_ok = all(norms[i] >= c for i in need)
    return LemmaAudit(
        manifold=int(m),
        on_manifold=on,
        nehari_lhs=rho_grad,
        nehari_rhs=rhs,
        nehari_rel_error=float(rel),
        energy=br.total,
        sandwich_lower=lower,
        sandwich_upper=upper,
        sandwich_ok=bool(sandwich_ok),
        pairing=pairing,
        pairing_ok=bool(pairing < 0),
        lemma43_c=c,
        gradient_norms=norms,
        lemma43_ok=bool(lemma43_ok),
        nehari_tol=nehari_tol,
    )


@dataclass
class ThreeSolutions:
    points: tuple
    lam: float
    lambdas_tried: list
    threshold: float
    sobolev: float
    distances: dict
    distinct: bool
    lemma43_c: float
    nontrivial: bool
    lambda_star: float | None
    f2_passed: bool
    audits: list = dc_field(default_factory=list)
    timings: dict = dc_field(default_factory=dict)

    @property
    def statuses(self) -> list[str]:
        return [cp.status for cp in self.points]

    @property
    def success(self) -> bool:
        expected = ("positive", "negative", "sign-changing")
        return (
            all(cp.status == CONVERGED for cp in self.points)
            and tuple(cp.sign_signature for cp in self.points) == expected
            and self.distinct
            and self.nontrivial
        )


def pairwise_distances(points, problem) -> dict:
    out = {}
    for i in range(len(points)):
        for j in range(i + 1, len(points)):
            d = points[i].field.values - points[j].field.values
            out[f"{points[i].manifold}-{points[j].manifold}"] = gradient_norm(
                points[i].field.with_values(d), problem.p
            )
    return out


def solve_three(
    problem,
    escalate: bool = False,
    max_decades: int = 3,
    f2_samples: int = 200,
    metric: str = "adaptive",
    audit: bool = True,
) -> ThreeSolutions:
    """Minimize over K1, K2, K3 and check distinctness and nontriviality.

    When a run stops at THRESHOLD_EXCEEDED and ``escalate`` is set, lambda is
    multiplied by 10 (at most ``max_decades`` times) and all three runs are
    repeated.  The smallest tested lambda at which all three pass the gate is
    reported as ``lambda_star``.
    """
    t0 = time.perf_counter()
    timings = {}
    f2 = verify_F2(problem.nl, problem.p, problem.q, samples=f2_samples)
    if not f2.passed:
        log.warning("(F2) verification failed: %s", f2.to_dict())
    if problem.critical.empty:
        S = float("nan")
        threshold = float("inf")
    else:
        S = sobolev_constant(problem)
        threshold = energy_threshold(problem, S)
    timings["threshold"] = time.perf_counter() - t0
    lambdas = []
    current = problem
    lambda_star = None
    for k in range(max_decades + 1):
        lambdas.append(current.lam)
        pts = []
        for m in ManifoldTag:
            t = time.perf_counter()
            pts.append(minimize_on_K(m, current, threshold=threshold, metric=metric))
            timings[f"K{int(m)}@{current.lam:g}"] = time.perf_counter() - t
        gate_failed = any(cp.status == THRESHOLD_EXCEEDED for cp in pts)
        if all(cp.status == CONVERGED for cp in pts):
            lambda_star = current.lam
            break
        if not (gate_failed and escalate) or k == max_decades:
            break
        log.info("threshold gate failed at lambda = %g; raising lambda", current.lam)
        current = current.with_lambda(current.lam * 10.0)
    dists = pairwise_distances(pts, current)
    dist_tol = 10.0 * current.tol["residual"]
    distinct = all(d > dist_tol for d in dists.values())
    embeddings = {(current.q.inf_value, current.q.sup_value): 1.0 / S} if np.isfinite(S) else {}
    c = lemma43_constant(current, embeddings)
    audits = []
    nontrivial = True
    for cp in pts:
        if not cp.converged:
            continue
        if audit:
            a = lemma_audit(cp.field, cp.manifold, current, c=c)
            audits.append(a)
            nontrivial &= a.lemma43_ok
        else:
            norms = [
                gradient_norm(cp.field.with_values(np.maximum(sg * cp.field.values, 0)), current.p)
                for sg in (1.0, -1.0)
            ]
            need = {1: (0,), 2: (1,), 3: (0, 1)}[cp.manifold]
            nontrivial &= all(norms[i] >= c for i in need)
    timings["total"] = time.perf_counter() - t0
    return ThreeSolutions(
        points=tuple(pts),
        lam=current.lam,
        lambdas_tried=lambdas,
        threshold=threshold,
        sobolev=S,
        distances=dists,
        distinct=distinct,
        lemma43_c=c,
        nontrivial=nontrivial,
        lambda_star=lambda_star,
        f2_passed=f2.passed,
        audits=audits,
        timings=timings,
    )
