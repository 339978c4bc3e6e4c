"""Modulars and Luxemburg norms on discrete variable-exponent spaces.

A discrete modular is a weighted sum ``sum_j w_j |v_j|^{e_j}``.  Nodal fields
use the trapezoidal weights; gradient magnitudes use the per-element vertex
samples of :class:`~pxnehari.discretization.Discretization`, which is the same
quadrature as the Dirichlet energy.
"""

from __future__ import annotations

import numpy as np

from .discretization import discretization_for
from .exponent_field import ExponentField, conjugate_exponent
from .grid import ScalarField

HOLDER_CONSTANT = 2.0


class LuxemburgError(RuntimeError):
    pass


def sample_modular(vals, weights, exps, scale: float = 1.0) -> float:
    """``sum w |v / scale|^e`` over samples."""
    a = np.abs(vals)
    nz = a > 0
    if not nz.any():
        return 0.0
    return float(np.sum(weights[nz] * np.exp(exps[nz] * (np.log(a[nz]) - np.log(scale)))))


def sample_luxemburg(vals, weights, exps, rtol: float = 1e-10) -> float:
    """Unique ``sigma > 0`` with ``sum w |v/sigma|^e = 1`` (0 for v = 0).

    The map sigma -> modular(v/sigma) is strictly decreasing, so the root is
    bracketed from the norm-modular inequalities, bisected to ``rtol``
    relative width and polished by two safeguarded secant steps.
    """
    vals = np.asarray(vals, dtype=float).ravel()
    weights = np.asarray(weights, dtype=float).ravel()
    exps = np.asarray(exps, dtype=float).ravel()
    a = np.abs(vals)
    keep = (a > 0) & (weights > 0)
    if not keep.any():
        return 0.0
    loga, w, e = np.log(a[keep]), weights[keep], exps[keep]

    def rho_at(sigma):
        return float(np.sum(w * np.exp(e * (loga - np.log(sigma)))))

    def m(sigma):
        return rho_at(sigma) - 1.0

    rho = rho_at(1.0)
    e_lo, e_hi = float(e.min()), float(e.max())
    cands = (rho ** (1.0 / e_lo), rho ** (1.0 / e_hi))
    lo, hi = min(cands) * (1 - 1e-12), max(cands) * (1 + 1e-12)
    f_lo, f_hi = m(lo), m(hi)
    # guard against rounding in the bracket derivation
    for _ in range(200):
        if f_lo >= 0:
            break
        lo *= 0.5
        f_lo = m(lo)
    for _ in range(200):
        if f_hi <= 0:
            break
        hi *= 2.0
        f_hi = m(hi)
    if f_lo < 0 or f_hi > 0:
        raise LuxemburgError("could not bracket the Luxemburg norm")
    if f_lo == 0:
        return lo
    if f_hi == 0:
        return hi

    for _ in range(400):
        if hi - lo <= rtol * hi:
            break
        mid = 0.5 * (lo + hi)
        f_mid = m(mid)
        if f_mid == 0:
            return mid
        if f_mid > 0:
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
    else:
        raise LuxemburgError("bisection did not reach the requested width")

    x = 0.5 * (lo + hi)
    for _ in range(2):
        if f_lo == f_hi:
            break
        s = lo - f_lo * (hi - lo) / (f_hi - f_lo)
        if not lo < s < hi:
            break
        f_s = m(s)
        x = s
        if f_s == 0:
            break
        if f_s > 0:
            lo, f_lo = s, f_s
        else:
            hi, f_hi = s, f_s
    return x


def _check(u: ScalarField, e: ExponentField):
    if u.grid != e.grid:
        raise ValueError("field and exponent live on different grids")


def modular(u: ScalarField, e: ExponentField) -> float:
    _check(u, e)
    disc = discretization_for(u.grid)
    return sample_modular(u.values, disc.weights, e.values)


def luxemburg_norm(u: ScalarField, e: ExponentField) -> float:
    _check(u, e)
    disc = discretization_for(u.grid)
    return sample_luxemburg(u.values, disc.weights, e.values)


def _gradient_samples(u: ScalarField, e: ExponentField):
    disc = discretization_for(u.grid)
    g = np.sqrt(np.sum(disc.element_gradients(u.values) ** 2, axis=1))
    gs = np.repeat(g, disc.nverts).reshape(disc.elements.shape)
    return gs, disc.sample_weights, disc.vertex_values(e.values)


def gradient_modular(u: ScalarField, p: ExponentField) -> float:
    """``int |grad u|^p`` with the element vertex rule."""
    _check(u, p)
    return sample_modular(*_gradient_samples(u, p))


def gradient_norm(u: ScalarField, p: ExponentField) -> float:
    """Luxemburg norm of ``|grad u|`` in ``L^{p(x)}``."""
    _check(u, p)
    return sample_luxemburg(*_gradient_samples(u, p))


def holder_check(
    f: ScalarField, g: ScalarField, p: ExponentField, conjugate=conjugate_exponent
) -> tuple[float, float]:
    """Return ``(int |f g|, 2 ||f||_p ||g||_p')``; the first should not exceed the second.

    ``conjugate`` is injectable so that a broken conjugate map can be
    exercised as a negative control.
    """
    _check(f, p)
    _check(g, p)
    disc = discretization_for(f.grid)
    lhs = disc.integrate(np.abs(f.values * g.values))
    rhs = HOLDER_CONSTANT * luxemburg_norm(f, p) * luxemburg_norm(g, conjugate(p))
    return lhs, rhs


def poincare_ratio(u: ScalarField, p: ExponentField) -> float:
    """``||u||_p / || |grad u| ||_p`` for a nonzero Dirichlet field."""
    if not u.dirichlet:
        raise ValueError("poincare ratio needs a field with the Dirichlet mask")
    if not np.any(u.values):
        raise ValueError("poincare ratio is undefined for u = 0")
    return luxemburg_norm(u, p) / gradient_norm(u, p)
