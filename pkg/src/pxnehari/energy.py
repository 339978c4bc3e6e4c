"""Perturbation f, its primitive F, the (F2) chain, and the energy functional.

The discrete energy is

    Phi(u) = sum_T int_T |grad u|^p / p  -  sum_i w_i |u_i|^{q_i} / q_i
             - lam sum_i w_i F(x_i, u_i)

with the Dirichlet part regularized as in :mod:`pxnehari.discretization`.
Gradients are nodal vectors ``g`` with ``dPhi(u)[z] = g . z``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .discretization import Discretization, discretization_for
from .exponent_field import ExponentField
from .grid import ScalarField
from .modular_space import gradient_modular, modular, sample_modular


def _spow(u, e):
    """Odd power ``|u|^(e-1) sign(u)``, i.e. ``|u|^(e-2) u``."""
    return np.abs(u) ** (e - 1.0) * np.sign(u)


def _pos(u):
    return np.maximum(u, 0.0)


def _abspow(u, e):
    """``|u|^e`` with the convention ``0^e = 0`` for any exponent."""
    a = np.abs(u)
    with np.errstate(divide="ignore"):
        return np.where(a > 0, a ** np.where(a > 0, e, 1.0), 0.0)


@dataclass
class Nonlinearity:
    """``f(x,u) = |u|^{r-2} u + (u_+)^{s-1}``; ``s=None`` drops the second term."""

    r: ExponentField
    s: ExponentField | None
    c1: float
    c2: float
    c3: float
    c4: float

    def __post_init__(self):
        if np.any(self.r.values <= 2.0) or (
            self.s is not None and np.any(self.s.values <= 2.0)
        ):
            raise ValueError("need r, s > 2 so that f_u exists at u = 0")
        if self.s is not None and np.any(self.s.values >= self.r.values):
            raise ValueError("need s(x) < r(x) at every node")

    @property
    def constants(self) -> tuple[float, float, float, float]:
        return self.c1, self.c2, self.c3, self.c4

    def f(self, u):
        out = _spow(u, self.r.values)
        if self.s is not None:
            out = out + _pos(u) ** (self.s.values - 1.0)
        return out

    def F(self, u):
        out = np.abs(u) ** self.r.values / self.r.values
        if self.s is not None:
            out = out + _pos(u) ** self.s.values / self.s.values
        return out

    def f_u(self, u):
        out = (self.r.values - 1.0) * np.abs(u) ** (self.r.values - 2.0)
        if self.s is not None:
            out = out + (self.s.values - 1.0) * _pos(u) ** (self.s.values - 2.0)
        return out

    def growth_terms(self):
        """Pairs ``(exponents, coef)`` with ``f(x,u) u <= sum coef |u|^e``."""
        terms = [(self.r.values, 1.0)]
        if self.s is not None:
            terms.append((self.s.values, 1.0))
        return terms


@dataclass
class PluginNonlinearity:
    """Any ``(f, F, f_u)`` triple; usable once :func:`verify_F2` passes."""

    r: ExponentField
    f_fn: Callable
    F_fn: Callable
    f_u_fn: Callable
    c1: float
    c2: float
    c3: float
    c4: float

    @property
    def constants(self):
        return self.c1, self.c2, self.c3, self.c4

    def f(self, u):
        return self.f_fn(u)

    def F(self, u):
        return self.F_fn(u)

    def f_u(self, u):
        return self.f_u_fn(u)

    def growth_terms(self):
        return [(self.r.values, self.c4)]


def check_exponent_chain(p: ExponentField, q: ExponentField, r: ExponentField, s=None):
    """Orderings required of the exponents; raises ``ValueError``."""
    pp, qm, rm, rp = p.sup_value, q.inf_value, r.inf_value, r.sup_value
    if not (p.inf_value <= pp < rm <= rp < qm):
        raise ValueError(
            f"need p- <= p+ < r- <= r+ < q-, got p+={pp}, r-={rm}, r+={rp}, q-={qm}"
        )
    if np.any(r.values > q.values):
        raise ValueError("need r(x) <= q(x) at every node")
    if s is not None:
        sm = s.inf_value
        if not (qm - 1.0 > sm > pp):
            raise ValueError(f"need q- - 1 > s- > p+, got s-={sm}")


def default_constants(p: ExponentField, q: ExponentField, r: ExponentField, s=None):
    """(F2) constants for the example nonlinearity.

    Termwise, ``c2 F <= f u`` needs ``c2 <= min(r-, s-)`` and
    ``f u <= c1 f_u u^2`` needs ``c1 >= 1/(e - 1)`` for both powers.
    """
    pp, qm = p.sup_value, q.inf_value
    low = min(r.inf_value, qm) if s is None else min(r.inf_value, s.inf_value, qm)
    c2 = pp + 0.9 * (low - pp)
    c1 = 1.1 * max(
        1.0 / (r.inf_value - 1.0), 0.0 if s is None else 1.0 / (s.inf_value - 1.0)
    )
    c3 = 0.9 * c2 / r.sup_value
    c4 = 2.0 * (1.0 + (r.sup_value - 1.0))
    return c1, c2, c3, c4


def check_constants(nl, p: ExponentField, q: ExponentField):
    c1, c2, c3, c4 = nl.constants
    qm = q.inf_value
    if not c1 > 1.0 / (qm - 1.0):
        raise ValueError(f"need c1 > 1/(q- - 1) = {1 / (qm - 1)}, got {c1}")
    if not p.sup_value < c2 < qm:
        raise ValueError(f"need p+ < c2 < q-, got c2={c2}")
    if not 0.0 < c3 < c4:
        raise ValueError(f"need 0 < c3 < c4, got c3={c3}, c4={c4}")


def example_nonlinearity(p, q, r, s=None, constants=None) -> Nonlinearity:
    check_exponent_chain(p, q, r, s)
    c = default_constants(p, q, r, s) if constants is None else tuple(constants)
    nl = Nonlinearity(r, s, *map(float, c))
    check_constants(nl, p, q)
    return nl


def f_eval(u: ScalarField, nl) -> ScalarField:
    return ScalarField(u.grid, nl.f(u.values))


def F_eval(u: ScalarField, nl) -> ScalarField:
    return ScalarField(u.grid, nl.F(u.values))


def f_u_eval(u: ScalarField, nl) -> ScalarField:
    return ScalarField(u.grid, nl.f_u(u.values))


# -- (F2) verification -----------------------------------------------------------

F2_LABELS = (
    "c3*rho_r <= c2*int F",
    "c2*int F <= int f u",
    "int f u <= c1*int f_u u^2",
    "c1*int f_u u^2 <= c4*rho_r",
)


@dataclass
class F2Report:
    passed: bool
    samples: int
    amplitude_range: tuple[float, float]
    constants: tuple[float, float, float, float]
    worst_slack: list[float]  # min over samples of (rhs - lhs) / scale
    violations: list[int]

    def to_dict(self):
        d = asdict(self)
        d["inequalities"] = list(F2_LABELS)
        return d


def F2_chain(u: np.ndarray, nl, weights: np.ndarray) -> np.ndarray:
    """The five members of the chain for one field, in order."""
    c1, c2, c3, c4 = nl.constants
    rho_r = sample_modular(u, weights, nl.r.values)
    return np.array(
        [
            c3 * rho_r,
            c2 * float(weights @ nl.F(u)),
            float(weights @ (nl.f(u) * u)),
            c1 * float(weights @ (nl.f_u(u) * u**2)),
            c4 * rho_r,
        ]
    )


def random_fields(grid, rng, count, amplitude_range=(0.5, 2.0)):
    """Random Dirichlet fields: iid uniform nodal values in [-1, 1] (with a
    random sign bias) times a log-uniform amplitude."""
    lo, hi = amplitude_range
    out = []
    for _ in range(count):
        amp = np.exp(rng.uniform(np.log(lo), np.log(hi)))
        shift = rng.uniform(-0.5, 0.5)
        u = amp * np.clip(rng.uniform(-1.0, 1.0, grid.size) + shift, -1.0, 1.0)
        u[grid.boundary_mask] = 0.0
        out.append(u)
    return out


def verify_F2(
    nl,
    p: ExponentField,
    q: ExponentField,
    samples: int = 1000,
    rng=None,
    amplitude_range=(0.5, 2.0),
    fields=None,
    rtol: float = 1e-12,
) -> F2Report:
    """Check the integrated (F2) chain on random fields and report worst slacks.

    The example nonlinearity satisfies the last inequality only for fields of
    moderate amplitude (its ``u_+^s`` term beats ``|u|^r`` as ``u -> 0``), so
    the sampled amplitudes are explicit.  ``fields`` overrides sampling.
    """
    check_exponent_chain(p, q, nl.r, getattr(nl, "s", None))
    grid = nl.r.grid
    weights = discretization_for(grid).weights
    rng = np.random.default_rng(0) if rng is None else rng
    if fields is None:
        fields = random_fields(grid, rng, samples, amplitude_range)
    worst = np.full(4, np.inf)
    violations = np.zeros(4, dtype=int)
    for u in fields:
        chain = F2_chain(np.asarray(u, dtype=float), nl, weights)
        scale = max(np.max(np.abs(chain)), np.finfo(float).tiny)
        slack = (chain[1:] - chain[:-1]) / scale
        worst = np.minimum(worst, slack)
        violations += slack < -rtol
    return F2Report(
        passed=bool(not violations.any()),
        samples=len(fields),
        amplitude_range=tuple(amplitude_range),
        constants=tuple(nl.constants),
        worst_slack=[float(w) for w in worst],
        violations=[int(v) for v in violations],
    )


# -- energy functional -----------------------------------------------------------


@dataclass
class EnergyBreakdown:
    dirichlet_term: float
    critical_term: float
    perturbation_term: float
    total: float = field(init=False)

    def __post_init__(self):
        self.total = self.dirichlet_term - self.critical_term - self.perturbation_term


class EnergyFunctional:
    """Discrete Phi with exact gradient, Hessian-vector products and the
    Nehari constraint functionals."""

    def __init__(self, disc: Discretization, p: ExponentField, q: ExponentField, nl, lam: float):
        self.disc = disc
        self.p, self.q, self.nl = p, q, nl
        self.lam = float(lam)
        self.pe = disc.vertex_values(p.values)
        self.qv = q.values
        self.w = disc.weights
        self.bmask = disc.grid.boundary_mask

    def breakdown(self, u) -> EnergyBreakdown:
        return EnergyBreakdown(
            self.disc.dirichlet_energy(u, self.pe),
            float(self.w @ (np.abs(u) ** self.qv / self.qv)),
            self.lam * float(self.w @ self.nl.F(u)),
        )

    def value(self, u) -> float:
        return self.breakdown(u).total

    def lower_order(self, u):
        """Nodal derivative of the critical and perturbation terms."""
        return self.w * (_spow(u, self.qv) + self.lam * self.nl.f(u))

    def gradient(self, u) -> np.ndarray:
        g = self.disc.dirichlet_gradient(u, self.pe) - self.lower_order(u)
        g[self.bmask] = 0.0
        return g

    def pairing(self, u, z) -> float:
        """``dPhi(u)[z]``."""
        return self.disc.dirichlet_pairing(u, self.pe, z) - float(self.lower_order(u) @ z)

    def hessvec(self, u, v) -> np.ndarray:
        diag = self.w * (
            (self.qv - 1.0) * _abspow(u, self.qv - 2.0) + self.lam * self.nl.f_u(u)
        )
        h = self.disc.dirichlet_hessvec(u, self.pe, v) - diag * v
        h[self.bmask] = 0.0
        return h

    def constraints(self, u) -> tuple[float, float]:
        """``(phi1, phi2) = (dPhi(u)[u_+], -dPhi(u)[u_-])``.

        For fields whose sign parts have disjoint element supports these are
        exactly ``int |grad u_+|^p - |u_+|^q - lam f(x,u) u_+`` and its mirror.
        """
        up, um = _pos(u), _pos(-u)
        return self.pairing(u, up), -self.pairing(u, um)

    def constraint_gradients(self, u, g=None):
        g = self.gradient(u) if g is None else g
        up, um = _pos(u), _pos(-u)
        d1 = self.hessvec(u, up) + g * (u > 0)
        d2 = -self.hessvec(u, um) + g * (u < 0)
        return d1, d2


def phi(u: ScalarField, problem) -> EnergyBreakdown:
    return problem.energy.breakdown(u.values)


def phi_gradient(u: ScalarField, problem) -> ScalarField:
    return ScalarField(u.grid, problem.energy.gradient(u.values))


def J(v: ScalarField, problem) -> float:
    return gradient_modular(v, problem.p) - modular(v, problem.q)


def constraint_values(u: ScalarField, problem) -> tuple[float, float]:
    return problem.energy.constraints(u.values)
