"""Variable exponents on a grid: conjugate and critical exponents, critical set."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid


@dataclass
class ExponentField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(-1)
        if self.values.shape != (self.grid.size,):
            raise ValueError(
                f"expected {self.grid.size} nodal exponents, got {self.values.size}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("exponent values must be finite")
        self.values.setflags(write=False)

    @classmethod
    def constant(cls, grid: Grid, value: float) -> "ExponentField":
        return cls(grid, np.full(grid.size, float(value)))

    @property
    def inf_value(self) -> float:
        return float(self.values.min())

    @property
    def sup_value(self) -> float:
        return float(self.values.max())

    def is_constant(self) -> bool:
        return self.inf_value == self.sup_value


def inf_sup(e: ExponentField) -> tuple[float, float]:
    return e.inf_value, e.sup_value


def conjugate_exponent(p: ExponentField) -> ExponentField:
    """Nodewise ``p / (p - 1)``."""
    if np.any(p.values <= 1.0):
        raise ValueError("conjugate exponent requires p > 1 at every node")
    return ExponentField(p.grid, p.values / (p.values - 1.0))


def critical_exponent(p: ExponentField, N: int | None = None) -> ExponentField:
    """Nodewise Sobolev exponent ``N p / (N - p)``; N defaults to the grid dimension.

    Only the finite branch ``p < N`` is represented.
    """
    N = p.grid.dim if N is None else int(N)
    if np.any(p.values <= 1.0):
        raise ValueError("critical exponent requires p > 1 at every node")
    if np.any(p.values >= N):
        raise ValueError(f"critical exponent requires p < N = {N} at every node")
    return ExponentField(p.grid, N * p.values / (N - p.values))


@dataclass(frozen=True)
class CriticalSet:
    mask: np.ndarray
    q_minus: float  # inf of q over the set; +inf when the set is empty

    @property
    def empty(self) -> bool:
        return not bool(self.mask.any())


def critical_set(q: ExponentField, p_star: ExponentField, tol: float = 1e-9) -> CriticalSet:
    """Nodes where ``|q - p*| <= tol`` together with the inf of q there.

    An empty set is legal and means the problem is subcritical.
    """
    if q.grid != p_star.grid:
        raise ValueError("exponent fields live on different grids")
    mask = np.abs(q.values - p_star.values) <= tol
    q_minus = float(q.values[mask].min()) if mask.any() else float("inf")
    return CriticalSet(mask, q_minus)


def log_holder_diagnostic(e: ExponentField, chunk: int = 2048) -> float:
    """Max of ``|e(x) - e(y)| log(1/|x - y|)`` over node pairs closer than 1/2.

    Diagnostic only: a discontinuous field gives a value that grows under
    refinement but is never rejected.
    """
    pts = e.grid.points
    vals = e.values
    n = len(vals)
    if n < 2:
        raise ValueError("need at least two nodes")
    best = 0.0
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        d = np.sqrt(((pts[start:stop, None, :] - pts[None, :, :]) ** 2).sum(-1))
        osc = np.abs(vals[start:stop, None] - vals[None, :])
        ok = (d > 0) & (d < 0.5)
        if ok.any():
            best = max(best, float((osc[ok] * np.log(1.0 / d[ok])).max()))
    return best
