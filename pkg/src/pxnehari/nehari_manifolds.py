"""Sign decomposition, fibering projections and tangent geometry of M1, M2, M3.

On the grid the constraints are ``phi1(u) = dPhi(u)[u_+]`` and
``phi2(u) = -dPhi(u)[u_-]``.  They coincide with the integral forms whenever
no element carries both signs, and make every constrained critical point an
exact critical point of the discrete energy.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np
from scipy.optimize import brentq

from .grid import ScalarField
from .modular_space import gradient_modular, modular, sample_modular


class ManifoldTag(IntEnum):
    POSITIVE = 1
    NEGATIVE = 2
    NODAL = 3


class ManifoldError(RuntimeError):
    """Raised with ``code`` in {"degenerate", "no_sign_change", "bad_seed"}."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


MAX_DOUBLINGS = 60


def sign_split(u: ScalarField) -> tuple[ScalarField, ScalarField]:
    up = np.maximum(u.values, 0.0)
    um = np.maximum(-u.values, 0.0)
    return u.with_values(up), u.with_values(um)


@dataclass(frozen=True)
class FiberCoefficients:
    A: float
    B: float
    C: float


def fiber_coefficients(w0: ScalarField, problem) -> FiberCoefficients:
    return FiberCoefficients(
        gradient_modular(w0, problem.p),
        modular(w0, problem.q),
        modular(w0, problem.nl.r),
    )


def t1_bounds(A, C, c3, lam, p_minus, p_plus, r_minus, r_plus) -> tuple[float, float]:
    """Both candidate upper bounds ``(A / (c3 lam C))^{1/(r+ - p-)}`` and
    ``(A / (c3 lam C))^{1/(r- - p+)}`` for the fibering root."""
    base = A / (c3 * lam * C)
    return base ** (1.0 / (r_plus - p_minus)), base ** (1.0 / (r_minus - p_plus))


class SplitFiber:
    """Constraint values along ``a U_+ - b U_-`` for fixed one-signed parts.

    Element gradients of both parts are cached so each evaluation costs a
    single pass over the elements.
    """

    def __init__(self, energy, Up: np.ndarray, Um: np.ndarray):
        self.energy = energy
        disc = energy.disc
        self.Up, self.Um = Up, Um
        self.gP = disc.element_gradients(Up)
        self.gM = disc.element_gradients(Um)
        self.pos = Up > 0
        self.neg = Um > 0
        self.wP = energy.w[self.pos]
        self.wM = energy.w[self.neg]
        self.qP, self.qM = energy.qv[self.pos], energy.qv[self.neg]

    def field(self, a: float, b: float) -> np.ndarray:
        return a * self.Up - b * self.Um

    def constraints(self, a: float, b: float) -> tuple[float, float]:
        e = self.energy
        gu = a * self.gP - b * self.gM
        coef, _ = e.disc._weight(np.sum(gu**2, axis=1), e.pe)
        ca = e.disc.areas * coef
        d1 = float(np.sum(ca * np.sum(gu * self.gP, axis=1))) * a
        d2 = -float(np.sum(ca * np.sum(gu * self.gM, axis=1))) * b
        u = self.field(a, b)
        up = u[self.pos]
        um = u[self.neg]
        low1 = float(self.wP @ ((np.abs(up) ** self.qP + e.lam * _f_at(e, up, self.pos) * up)))
        low2 = float(self.wM @ ((np.abs(um) ** self.qM + e.lam * _f_at(e, um, self.neg) * um)))
        return d1 - low1, d2 - low2

    def scale_coefficients(self, which: int) -> float:
        """``max(A, B)`` of the unscaled part, used to scale tolerances."""
        e = self.energy
        U = self.Up if which == 1 else self.Um
        A = _grad_modular_arr(e, U)
        B = sample_modular(U, e.w, e.qv)
        return max(A, B)


def _f_at(energy, vals, mask):
    """Evaluate f on a subset of nodes."""
    nl = energy.nl
    full = np.zeros(energy.disc.grid.size)
    full[mask] = vals
    return nl.f(full)[mask]


def _grad_modular_arr(energy, U):
    disc = energy.disc
    g = np.sqrt(np.sum(disc.element_gradients(U) ** 2, axis=1))
    gs = np.repeat(g, disc.nverts).reshape(disc.elements.shape)
    return sample_modular(gs, disc.sample_weights, energy.pe)


def _bracket_root(fn, guess: float, local: bool):
    """Bracket the smallest positive root of ``fn`` (positive near 0).

    With ``local`` the bracket grows geometrically around ``guess``; otherwise
    an upper point with ``fn < 0`` is found by doubling and the first sign
    change is located by a geometric scan upward from near zero.
    """
    hi = guess
    f_hi = fn(hi)
    k = 0
    while f_hi >= 0:
        if k >= MAX_DOUBLINGS:
            raise ManifoldError(
                "no_sign_change",
                f"fibering map has no sign change within {MAX_DOUBLINGS} doublings",
            )
        hi *= 2.0
        f_hi = fn(hi)
        k += 1
    if local:
        lo = hi / 1.5
        f_lo = fn(lo)
        k = 0
        while f_lo <= 0:
            hi, f_hi = lo, f_lo
            lo /= 1.5
            f_lo = fn(lo)
            k += 1
            if k > 200:
                raise ManifoldError("no_sign_change", "fibering map is not positive near 0")
        return lo, hi
    ts = hi * 2.0 ** -np.arange(48, -1, -1)
    prev = None
    for t in ts:
        ft = fn(t) if t != hi else f_hi
        if ft <= 0:
            if prev is None:
                raise ManifoldError("no_sign_change", "fibering map is not positive near 0")
            return prev, t
        prev = t
    return prev, hi  # unreachable: fn(hi) < 0


def _solve_scale(fn, guess, local):
    lo, hi = _bracket_root(fn, guess, local)
    return brentq(fn, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=200)


def _one_signed(w: np.ndarray) -> int:
    if np.any(w > 0) and not np.any(w < 0):
        return 1
    if np.any(w < 0) and not np.any(w > 0):
        return 2
    raise ManifoldError("bad_seed", "fibering seed must be nonzero and of one sign")


def fibering_root(w0: ScalarField, problem, guess: float | None = None) -> float:
    """Smallest ``t > 0`` with ``t w0`` on M1 (w0 >= 0) or M2 (w0 <= 0)."""
    w = np.asarray(w0.values, dtype=float)
    which = _one_signed(w)
    e = problem.energy
    fib = SplitFiber(e, np.maximum(w, 0), np.maximum(-w, 0))
    if which == 1:
        fn = lambda t: fib.constraints(t, 0.0)[0]
    else:
        fn = lambda t: fib.constraints(0.0, t)[1]
    if guess is None:
        cf = fiber_coefficients(w0.with_values(np.abs(w)), problem)
        pm, pp = problem.p.inf_value, problem.p.sup_value
        rm, rp = problem.nl.r.inf_value, problem.nl.r.sup_value
        guess = max(t1_bounds(cf.A, cf.C, problem.nl.c3, problem.lam, pm, pp, rm, rp))
        return _solve_scale(fn, guess, local=False)
    return _solve_scale(fn, guess, local=True)


def project_split(energy, Up, Um, guess=(1.0, 1.0), local=True, sweeps=100, tol=1e-10):
    """Scales ``(a, b)`` putting ``a Up - b Um`` on M3.

    The two scalar problems decouple when no element touches both parts;
    otherwise they are solved alternately until both residuals are below
    ``tol`` times the part scales.
    """
    fib = SplitFiber(energy, Up, Um)
    a, b = guess
    sa, sb = fib.scale_coefficients(1), fib.scale_coefficients(2)
    for _ in range(sweeps):
        a = _solve_scale(lambda t: fib.constraints(t, b)[0], a, local)
        b = _solve_scale(lambda t: fib.constraints(a, t)[1], b, local)
        c1, c2 = fib.constraints(a, b)
        if abs(c1) <= tol * sa and abs(c2) <= tol * sb:
            break
        local = True
    else:
        raise ManifoldError("no_sign_change", "coupled M3 projection did not converge")
    return a, b


def project_to_M3(w0: ScalarField, w1: ScalarField, problem) -> tuple[float, float]:
    """Scales ``(t_bar, t_under)`` with ``t_bar w0 + t_under w1`` on M3."""
    a, b = np.asarray(w0.values), np.asarray(w1.values)
    if _one_signed(a) != 1 or _one_signed(b) != 2:
        raise ManifoldError("bad_seed", "need w0 >= 0 and w1 <= 0, both nonzero")
    if np.any((a > 0) & (b < 0)):
        raise ManifoldError("bad_seed", "seeds must have disjoint supports")
    t_bar = fibering_root(w0, problem)
    t_under = fibering_root(w1, problem)
    return project_split(problem.energy, a, -b, guess=(t_bar, t_under))


def constraint_scales(u: np.ndarray, problem) -> tuple[float, float]:
    """``max(A, B)`` for each sign part of ``u``."""
    e = problem.energy
    out = []
    for part in (np.maximum(u, 0), np.maximum(-u, 0)):
        A = _grad_modular_arr(e, part)
        B = sample_modular(part, e.w, e.qv)
        out.append(max(A, B))
    return out[0], out[1]


def membership(u: ScalarField, m, problem, tol: float | None = None, sign_condition: bool = True) -> bool:
    """Whether ``u`` lies on M_m (and in K_m when ``sign_condition``)."""
    m = ManifoldTag(m)
    tol = problem.tol["constraint"] if tol is None else tol
    v = u.values
    w = problem.energy.w
    phis = problem.energy.constraints(v)
    scales = constraint_scales(v, problem)
    need = {ManifoldTag.POSITIVE: (0,), ManifoldTag.NEGATIVE: (1,), ManifoldTag.NODAL: (0, 1)}[m]
    for i in need:
        part = np.maximum(v, 0) if i == 0 else np.maximum(-v, 0)
        if not w @ part > 0:
            return False
        if abs(phis[i]) > tol * scales[i]:
            return False
    if sign_condition:
        if m == ManifoldTag.POSITIVE and np.any(v < 0):
            return False
        if m == ManifoldTag.NEGATIVE and np.any(v > 0):
            return False
    return True


def _directions(u):
    """Scaling directions ``(u_+, -u_-)`` whose sum is ``u``."""
    return np.maximum(u, 0.0), np.minimum(u, 0.0)


def constraint_jacobian(u: np.ndarray, problem, g=None):
    """Constraint gradients and the matrix ``<grad phi_i, e_j>`` with
    ``e = (u_+, -u_-)``."""
    d1, d2 = problem.energy.constraint_gradients(u, g)
    e1, e2 = _directions(u)
    M = np.array([[d1 @ e1, d1 @ e2], [d2 @ e1, d2 @ e2]])
    return (d1, d2), (e1, e2), M


DEGENERACY_RTOL = 1e-12


def _active(m):
    return {ManifoldTag.POSITIVE: [0], ManifoldTag.NEGATIVE: [1], ManifoldTag.NODAL: [0, 1]}[
        ManifoldTag(m)
    ]


def tangent_project_array(u: np.ndarray, v: np.ndarray, m, problem, jac=None) -> np.ndarray:
    (d1, d2), (e1, e2), M = constraint_jacobian(u, problem) if jac is None else jac
    idx = _active(m)
    D = [d1, d2]
    E = [e1, e2]
    Msub = M[np.ix_(idx, idx)]
    scale = max(
        np.max(np.abs(Msub)),
        max(np.linalg.norm(D[i]) * np.linalg.norm(E[i]) for i in idx),
    )
    diag = np.abs(np.diag(Msub))
    if np.any(diag <= DEGENERACY_RTOL * scale) or abs(np.linalg.det(Msub)) <= (
        DEGENERACY_RTOL * scale
    ) ** len(idx):
        raise ManifoldError("degenerate", "constraint gradient pairing is degenerate")
    rhs = np.array([D[i] @ v for i in idx])
    alpha = np.linalg.solve(Msub, rhs)
    out = v.copy()
    for a, i in zip(alpha, idx):
        out -= a * E[i]
    return out


def tangent_project(u: ScalarField, v: ScalarField, m, problem) -> ScalarField:
    """Oblique projection of ``v`` onto ``{z: <grad phi_i(u), z> = 0}`` along
    the sign parts of ``u``."""
    jac = constraint_jacobian(u.values, problem)
    out = tangent_project_array(u.values, v.values, m, problem, jac)
    (d1, d2), _, _ = jac
    for i in _active(m):
        d = (d1, d2)[i]
        ref = np.abs(d) @ (np.abs(v.values) + np.abs(out - v.values))
        if abs(d @ out) > 1e-8 * max(ref, np.finfo(float).tiny):
            raise ManifoldError("degenerate", "tangent projection lost accuracy")
    return v.with_values(out)


def constraint_gradient_pairing(u: ScalarField, m, problem) -> float:
    """``<grad phi_i(u), e_i>`` for the scaling direction ``e_i`` of the tag.

    Negative on the manifold; for M3 the larger of the two diagonal entries
    is returned.
    """
    _, _, M = constraint_jacobian(u.values, problem)
    idx = _active(m)
    return float(max(M[i, i] for i in idx))
