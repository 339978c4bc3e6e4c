"""P1 weak-form discretization of the p(x)-Laplacian on tensor grids.

Each grid cell is split into two right triangles (2D) so that the linear
(p = 2) stiffness matrix is the classical 5-point stencil; in 1D the elements
are the grid intervals.  Gradients are constant per element.  Integrals of
nodal quantities use the trapezoidal rule on the tensor grid, and integrals
of gradient quantities use the vertex rule on each element with the exponent
interpolated linearly, so the Dirichlet energy, its gradient and its Hessian
are mutually exact derivatives of one another.
"""

from __future__ import annotations

import logging
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exponent_field import ExponentField
from .grid import Grid, ScalarField, VectorField

log = logging.getLogger(__name__)

DEFAULT_EPS = 1e-10


def _trapezoid_weights(grid: Grid) -> np.ndarray:
    ws = []
    for h, n in zip(grid.spacing, grid.resolution):
        w = np.full(n, h)
        w[0] = w[-1] = 0.5 * h
        ws.append(w)
    if grid.dim == 1:
        return ws[0]
    return np.outer(ws[0], ws[1]).ravel()


def _mesh(grid: Grid):
    if grid.dim == 1:
        (n,) = grid.resolution
        (h,) = grid.spacing
        elems = np.column_stack([np.arange(n - 1), np.arange(1, n)])
        grads = np.empty((n - 1, 2, 1))
        grads[:, 0, 0] = -1.0 / h
        grads[:, 1, 0] = 1.0 / h
        areas = np.full(n - 1, h)
        return elems, grads, areas

    nx, ny = grid.resolution
    i, j = np.meshgrid(np.arange(nx - 1), np.arange(ny - 1), indexing="ij")
    i, j = i.ravel(), j.ravel()
    n00 = i * ny + j
    n10 = (i + 1) * ny + j
    n01 = i * ny + j + 1
    n11 = (i + 1) * ny + j + 1
    elems = np.concatenate(
        [np.column_stack([n00, n10, n11]), np.column_stack([n00, n11, n01])]
    )
    P = grid.points[elems]  # (nE, 3, 2)
    B = np.stack([P[:, 1] - P[:, 0], P[:, 2] - P[:, 0]], axis=2)  # columns
    Binv = np.linalg.inv(B)  # rows are gradients of barycentrics 1, 2
    grads = np.empty((len(elems), 3, 2))
    grads[:, 1] = Binv[:, 0]
    grads[:, 2] = Binv[:, 1]
    grads[:, 0] = -grads[:, 1] - grads[:, 2]
    areas = 0.5 * np.abs(np.linalg.det(B))
    return elems, grads, areas


class Discretization:
    """Quadrature weights, element stencils and the weak-form operators."""

    def __init__(self, grid: Grid, eps: float = DEFAULT_EPS):
        self.grid = grid
        self.eps = float(eps)
        self.weights = _trapezoid_weights(grid)
        self.elements, self.basis_grads, self.areas = _mesh(grid)
        self.nverts = self.elements.shape[1]
        # per (element, vertex) sample weight of the vertex rule
        self.sample_weights = np.repeat(self.areas / self.nverts, self.nverts).reshape(
            self.elements.shape
        )
        self.interior = grid.interior
        self._laplace = None

    # -- quadrature -----------------------------------------------------------

    def integrate(self, w) -> float:
        return float(self.weights @ np.asarray(w))

    def vertex_values(self, e: np.ndarray) -> np.ndarray:
        """Nodal exponent values gathered per element vertex, shape (nE, k)."""
        return np.asarray(e)[self.elements]

    # -- gradients ------------------------------------------------------------

    def nodal_gradient(self, u: np.ndarray) -> np.ndarray:
        """Central differences inside, one-sided at the boundary; shape (n, dim)."""
        arr = self.grid.as_array(u)
        if self.grid.dim == 1:
            return np.gradient(arr, self.grid.spacing[0], edge_order=1)[:, None]
        parts = np.gradient(arr, *self.grid.spacing, edge_order=1)
        return np.column_stack([g.ravel() for g in parts])

    def element_gradients(self, u: np.ndarray) -> np.ndarray:
        return np.einsum("ekd,ek->ed", self.basis_grads, np.asarray(u)[self.elements])

    def scatter(self, local: np.ndarray) -> np.ndarray:
        """Sum per-(element, vertex) contributions onto nodes."""
        return np.bincount(
            self.elements.ravel(), weights=local.ravel(), minlength=self.grid.size
        )

    # -- Dirichlet energy sum_T int |grad u|^p / p ----------------------------

    def _weight(self, g2: np.ndarray, pe: np.ndarray):
        """Element coefficient a_T = mean_k (|grad u|^2 + eps^2)^((p_k - 2)/2)."""
        s = g2[:, None] + self.eps**2
        return np.mean(s ** ((pe - 2.0) / 2.0), axis=1), s

    def dirichlet_energy(self, u: np.ndarray, pe: np.ndarray) -> float:
        gu = self.element_gradients(u)
        s = np.sum(gu**2, axis=1)[:, None] + self.eps**2
        dens = (s ** (pe / 2.0) - self.eps**pe) / pe
        return float(np.sum(self.sample_weights * dens))

    def dirichlet_gradient(self, u: np.ndarray, pe: np.ndarray) -> np.ndarray:
        gu = self.element_gradients(u)
        a, _ = self._weight(np.sum(gu**2, axis=1), pe)
        flux = (self.areas * a)[:, None] * gu  # (nE, d)
        local = np.einsum("ekd,ed->ek", self.basis_grads, flux)
        r = self.scatter(local)
        r[self.grid.boundary_mask] = 0.0
        return r

    def dirichlet_pairing(self, u: np.ndarray, pe: np.ndarray, z: np.ndarray) -> float:
        """``<D'(u), z>`` evaluated elementwise without assembly."""
        gu = self.element_gradients(u)
        gz = self.element_gradients(z)
        a, _ = self._weight(np.sum(gu**2, axis=1), pe)
        return float(np.sum(self.areas * a * np.sum(gu * gz, axis=1)))

    def dirichlet_hessvec(self, u: np.ndarray, pe: np.ndarray, v: np.ndarray) -> np.ndarray:
        gu = self.element_gradients(u)
        gv = self.element_gradients(v)
        g2 = np.sum(gu**2, axis=1)
        a, s = self._weight(g2, pe)
        b = np.mean((pe - 2.0) * s ** ((pe - 4.0) / 2.0), axis=1)
        flux = a[:, None] * gv + (b * np.sum(gu * gv, axis=1))[:, None] * gu
        local = np.einsum("ekd,ed->ek", self.basis_grads, self.areas[:, None] * flux)
        r = self.scatter(local)
        r[self.grid.boundary_mask] = 0.0
        return r

    def singular_elements(self, u: np.ndarray, pe: np.ndarray) -> int:
        """Elements with zero gradient where some vertex exponent is below 2."""
        g2 = np.sum(self.element_gradients(u) ** 2, axis=1)
        return int(np.count_nonzero((g2 == 0.0) & np.any(pe < 2.0, axis=1)))

    # -- sparse matrices --------------------------------------------------------

    def stiffness(self, coef: np.ndarray | None = None) -> sp.csr_matrix:
        """Assemble ``sum_T coef_T |T| grad(phi_i) . grad(phi_j)`` on all nodes."""
        coef = np.ones(len(self.areas)) if coef is None else np.asarray(coef)
        local = np.einsum("ekd,eld->ekl", self.basis_grads, self.basis_grads)
        local *= (coef * self.areas)[:, None, None]
        k = self.nverts
        rows = np.repeat(self.elements, k, axis=1).ravel()
        cols = np.tile(self.elements, (1, k)).ravel()
        n = self.grid.size
        return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()

    def interior_block(self, K: sp.spmatrix) -> sp.csc_matrix:
        idx = self.interior
        return K[idx][:, idx].tocsc()

    @property
    def laplace(self):
        """Factorized interior p = 2 stiffness (the H^1_0 Gram matrix)."""
        if self._laplace is None:
            self._laplace = spla.splu(self.interior_block(self.stiffness()))
        return self._laplace

    def riesz(self, g: np.ndarray, solver=None) -> np.ndarray:
        """Solve ``K v = g`` on interior nodes; v vanishes on the boundary."""
        solver = self.laplace if solver is None else solver
        v = np.zeros(self.grid.size)
        v[self.interior] = solver.solve(np.asarray(g)[self.interior])
        return v

    def h1_norm(self, v: np.ndarray) -> float:
        """Discrete ``||grad v||_2`` of a Dirichlet field."""
        gv = self.element_gradients(v)
        return float(np.sqrt(np.sum(self.areas * np.sum(gv**2, axis=1))))

    def dual_norm(self, g: np.ndarray) -> float:
        """Norm of the functional ``z -> <g, z>`` dual to ``h1_norm``."""
        v = self.riesz(g)
        return float(np.sqrt(max(float(g @ v), 0.0)))


@lru_cache(maxsize=32)
def discretization_for(grid: Grid, eps: float = DEFAULT_EPS) -> Discretization:
    return Discretization(grid, eps)


# -- field-level operations ----------------------------------------------------


def gradient(u: ScalarField) -> VectorField:
    return VectorField(u.grid, discretization_for(u.grid).nodal_gradient(u.values))


def integrate(w: ScalarField) -> float:
    return discretization_for(w.grid).integrate(w.values)


def p_laplacian_residual(
    u: ScalarField, p: ExponentField, rhs: ScalarField, eps: float = DEFAULT_EPS
) -> ScalarField:
    """Weak residual ``<|grad u|^(p-2) grad u, grad phi_i> - <rhs, phi_i>``.

    Boundary entries are zero.  The load uses the trapezoidal (lumped) rule.
    """
    disc = discretization_for(u.grid, eps)
    pe = disc.vertex_values(p.values)
    nsing = disc.singular_elements(u.values, pe)
    if nsing:
        log.debug("%d elements with zero gradient and p < 2 (regularized)", nsing)
    r = disc.dirichlet_gradient(u.values, pe) - disc.weights * rhs.values
    r[u.grid.boundary_mask] = 0.0
    return ScalarField(u.grid, r)
