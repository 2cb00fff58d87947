"""One-dimensional GLL nodal and edge polynomial bases.

Nodal (primal 0-form) polynomials ``h_i`` interpolate at the Gauss-Lobatto-
Legendre points; edge (primal 1-form) polynomials ``e_j`` are built from their
derivatives so that the integral of ``e_j`` over the GLL sub-interval
``[xi_{k-1}, xi_k]`` is ``delta_jk``. Dual degrees of freedom are the mass
matrix images of primal ones, which turns duality pairings into dot products.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import numpy.typing as npt
from numpy.polynomial import legendre

from .errors import InvalidDegreeError

FloatArray = npt.NDArray[np.float64]

_NEWTON_TOL = 1e-15
_NEWTON_MAXITER = 100
_NODE_SNAP = 1e-14


def _legendre_coeffs(n: int) -> FloatArray:
    c = np.zeros(n + 1)
    c[n] = 1.0
    return c


def gll_nodes(n: int) -> FloatArray:
    """Return the ``n + 1`` Gauss-Lobatto-Legendre points on [-1, 1], ascending.

    Interior points are the roots of ``L_n'``, found by Newton iteration
    started from the Chebyshev-Gauss-Lobatto points.
    """
    if int(n) != n or n < 1:
        raise InvalidDegreeError(f"polynomial degree must be >= 1, got {n}")
    n = int(n)
    nodes = np.empty(n + 1)
    nodes[0], nodes[-1] = -1.0, 1.0
    if n == 1:
        return nodes
    d1 = legendre.legder(_legendre_coeffs(n))
    d2 = legendre.legder(d1)
    x = -np.cos(np.pi * np.arange(1, n) / n)
    for _ in range(_NEWTON_MAXITER):
        dx = legendre.legval(x, d1) / legendre.legval(x, d2)
        x -= dx
        if np.max(np.abs(dx)) < _NEWTON_TOL:
            break
    # the node set is symmetric about 0; enforce it exactly
    x = 0.5 * (x - x[::-1])
    nodes[1:-1] = x
    return nodes


def gauss_rule(q: int) -> tuple[FloatArray, FloatArray]:
    """Gauss-Legendre nodes and weights with ``q`` points."""
    if q < 1:
        raise ValueError(f"quadrature needs at least one point, got {q}")
    return legendre.leggauss(q)


def _barycentric_weights(nodes: FloatArray) -> FloatArray:
    # For GLL points (x^2 - 1) L_N'(x) is the node polynomial, whose derivative
    # at xi_i is proportional to L_N(xi_i); the constant cancels.
    n = len(nodes) - 1
    return 1.0 / legendre.legval(nodes, _legendre_coeffs(n))


def lagrange_values(nodes: FloatArray, x: npt.ArrayLike) -> FloatArray:
    """Evaluate all nodal polynomials at ``x``; returns shape ``(N+1, len(x))``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    w = _barycentric_weights(nodes)
    diff = x[None, :] - nodes[:, None]
    exact = np.abs(diff) < _NODE_SNAP
    diff[exact] = 1.0
    terms = w[:, None] / diff
    values = terms / terms.sum(axis=0)
    hit = exact.any(axis=0)
    if hit.any():
        values[:, hit] = exact[:, hit].astype(float)
    return values


def derivative_matrix(nodes: FloatArray) -> FloatArray:
    """``D[m, k] = h_k'(xi_m)``, the exact GLL differentiation matrix."""
    n = len(nodes) - 1
    ln = legendre.legval(nodes, _legendre_coeffs(n))
    d = np.zeros((n + 1, n + 1))
    for m in range(n + 1):
        for k in range(n + 1):
            if m != k:
                d[m, k] = ln[m] / (ln[k] * (nodes[m] - nodes[k]))
    d[0, 0] = -n * (n + 1) / 4.0
    d[n, n] = n * (n + 1) / 4.0
    return d


def lagrange_derivative_values(nodes: FloatArray, x: npt.ArrayLike) -> FloatArray:
    """Derivatives ``h_k'(x)``, shape ``(N+1, len(x))``.

    ``h_k'`` has degree ``N - 1`` so it is reproduced exactly by interpolating
    its nodal values with the degree ``N`` basis.
    """
    return derivative_matrix(nodes).T @ lagrange_values(nodes, x)


def edge_values(nodes: FloatArray, x: npt.ArrayLike) -> FloatArray:
    """Evaluate ``e_1 .. e_N`` at ``x``; returns shape ``(N, len(x))``."""
    dh = lagrange_derivative_values(nodes, x)
    return -np.cumsum(dh[:-1], axis=0)


@dataclass(frozen=True)
class BasisSet1D:
    """GLL bases of one degree, tabulated on a Gauss quadrature rule."""

    degree: int
    nodes: FloatArray
    quad_nodes: FloatArray
    quad_weights: FloatArray
    h_table: FloatArray = field(repr=False)
    e_table: FloatArray = field(repr=False)
    mass0: FloatArray = field(repr=False)
    mass1: FloatArray = field(repr=False)

    @classmethod
    def build(cls, degree: int, quad_points: int | None = None) -> BasisSet1D:
        nodes = gll_nodes(degree)
        q = degree + 4 if quad_points is None else int(quad_points)
        qx, qw = gauss_rule(q)
        h = lagrange_values(nodes, qx)
        e = edge_values(nodes, qx)
        for a in (nodes, qx, qw, h, e):
            a.setflags(write=False)
        basis = cls(
            degree=degree,
            nodes=nodes,
            quad_nodes=qx,
            quad_weights=qw,
            h_table=h,
            e_table=e,
            mass0=mass_matrix_0_from(h, qw),
            mass1=mass_matrix_1_from(e, qw),
        )
        basis.mass0.setflags(write=False)
        basis.mass1.setflags(write=False)
        return basis

    @property
    def n_quad(self) -> int:
        return len(self.quad_nodes)

    def lagrange(self, x: npt.ArrayLike) -> FloatArray:
        return lagrange_values(self.nodes, x)

    def edge(self, x: npt.ArrayLike) -> FloatArray:
        return edge_values(self.nodes, x)


def mass_matrix_0_from(h_table: FloatArray, weights: FloatArray) -> FloatArray:
    m = (h_table * weights) @ h_table.T
    return 0.5 * (m + m.T)


def mass_matrix_1_from(e_table: FloatArray, weights: FloatArray) -> FloatArray:
    m = (e_table * weights) @ e_table.T
    return 0.5 * (m + m.T)


def mass_matrix_0(basis: BasisSet1D) -> FloatArray:
    """Nodal mass matrix ``M0[i, j] = int h_i h_j``."""
    return basis.mass0.copy()


def mass_matrix_1(basis: BasisSet1D) -> FloatArray:
    """Edge mass matrix ``M1[i, j] = int e_i e_j``."""
    return basis.mass1.copy()


def eval_lagrange(basis: BasisSet1D, i: int, xi: float) -> float:
    if not 0 <= i <= basis.degree:
        raise IndexError(f"nodal index {i} outside 0..{basis.degree}")
    return float(lagrange_values(basis.nodes, [xi])[i, 0])


def eval_edge(basis: BasisSet1D, j: int, xi: float) -> float:
    """Edge polynomial ``e_j`` at ``xi``; edges are numbered 1..N."""
    if not 1 <= j <= basis.degree:
        raise IndexError(f"edge index {j} outside 1..{basis.degree}")
    return float(edge_values(basis.nodes, [xi])[j - 1, 0])


DofKind = Literal["primal-nodal", "primal-edge", "dual-nodal", "dual-edge"]

_DUAL_OF = {"primal-nodal": "dual-nodal", "primal-edge": "dual-edge"}


@dataclass(frozen=True)
class DofVector1D:
    kind: DofKind
    values: FloatArray

    def __post_init__(self):
        if self.kind not in ("primal-nodal", "primal-edge", "dual-nodal", "dual-edge"):
            raise ValueError(f"unknown dof kind {self.kind!r}")
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))

    @property
    def degree(self) -> int:
        n = len(self.values)
        return n - 1 if self.kind.endswith("nodal") else n


def to_dual(primal: DofVector1D, mass: FloatArray) -> DofVector1D:
    """Map primal coefficients to dual ones, ``a_dual = M a``."""
    if primal.kind not in _DUAL_OF:
        raise ValueError(f"expected primal dofs, got {primal.kind}")
    mass = np.asarray(mass)
    if mass.shape != (len(primal.values), len(primal.values)):
        raise ValueError(
            f"mass matrix of shape {mass.shape} does not match "
            f"{len(primal.values)} {primal.kind} dofs"
        )
    return DofVector1D(_DUAL_OF[primal.kind], mass @ primal.values)


def diff_1d(nodal_dofs: npt.ArrayLike) -> FloatArray:
    """Edge coefficients of the derivative of a nodal expansion."""
    return np.diff(np.asarray(nodal_dofs, dtype=float))
