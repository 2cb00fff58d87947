"""Metric-free integer operators and degree-of-freedom bookkeeping.

Local layout of one element of degree N (all indices 0-based in the arrays):

* ``u_x[i, j]``, i = 0..N (vertical GLL line), j = 1..N (segment), at column
  ``i * N + (j - 1)``;
* ``u_y[i, j]``, i = 1..N (segment), j = 0..N (horizontal GLL line), at column
  ``N (N + 1) + (i - 1) + N * j``;
* ``p[i, j]``, i, j = 1..N, at row ``(i - 1) + N * (j - 1)`` of E21 and at
  column ``2 N (N + 1) + row`` of the element vector ``[u; p]``.

With this layout the degree-3 incidence matrix is reproduced entry for entry.
Global vectors stack ``[u; p]`` element by element, followed by the interface
multipliers. Interface dofs run over vertical interfaces (row by row, left to
right), then horizontal ones, N per interface, ordered along the interface.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import InvalidDegreeError
from .mesh import SIDES, Mesh, Side


def _check_degree(n: int) -> int:
    if int(n) != n or n < 1:
        raise InvalidDegreeError(f"polynomial degree must be >= 1, got {n}")
    return int(n)


@dataclass(frozen=True)
class LocalDofLayout:
    N: int

    @property
    def n_u(self) -> int:
        return 2 * self.N * (self.N + 1)

    @property
    def n_p(self) -> int:
        return self.N * self.N

    @property
    def n_local(self) -> int:
        return self.n_u + self.n_p

    @property
    def n_face(self) -> int:
        return self.N

    def ux(self, i: int, j: int) -> int:
        return i * self.N + (j - 1)

    def uy(self, i: int, j: int) -> int:
        return self.N * (self.N + 1) + (i - 1) + self.N * j

    def p(self, i: int, j: int) -> int:
        return (i - 1) + self.N * (j - 1)

    def side_dofs(self, side: Side) -> list[int]:
        """Velocity columns on one side, ordered along the positive axis."""
        N = self.N
        if side == "left":
            return [self.ux(0, j) for j in range(1, N + 1)]
        if side == "right":
            return [self.ux(N, j) for j in range(1, N + 1)]
        if side == "bottom":
            return [self.uy(i, 0) for i in range(1, N + 1)]
        return [self.uy(i, N) for i in range(1, N + 1)]


SIDE_SIGN: dict[Side, int] = {"left": -1, "right": 1, "bottom": -1, "top": 1}


def incidence_e21(N: int) -> sp.csr_matrix:
    """Discrete divergence: ``N^2 x 2N(N+1)`` matrix with entries in {-1, 0, 1}."""
    lay = LocalDofLayout(_check_degree(N))
    rows, cols, vals = [], [], []
    for j in range(1, N + 1):
        for i in range(1, N + 1):
            r = lay.p(i, j)
            for c, v in (
                (lay.ux(i - 1, j), -1),
                (lay.ux(i, j), 1),
                (lay.uy(i, j - 1), -1),
                (lay.uy(i, j), 1),
            ):
                rows.append(r)
                cols.append(c)
                vals.append(v)
    return sp.csr_matrix(
        (np.array(vals, dtype=np.int64), (rows, cols)), shape=(lay.n_p, lay.n_u)
    )


def trace_matrix(N: int) -> sp.csr_matrix:
    """Per-element trace ``4N x (n_u + n_p)``; rows run left, right, bottom, top."""
    lay = LocalDofLayout(_check_degree(N))
    rows, cols, vals = [], [], []
    r = 0
    for side in SIDES:
        for c in lay.side_dofs(side):
            rows.append(r)
            cols.append(c)
            vals.append(SIDE_SIGN[side])
            r += 1
    return sp.csr_matrix(
        (np.array(vals, dtype=np.int64), (rows, cols)), shape=(4 * N, lay.n_local)
    )


@dataclass(frozen=True)
class Interface:
    """Interior interface between a negative-side and a positive-side element."""

    index: int
    minus: int
    plus: int
    vertical: bool

    @property
    def minus_side(self) -> Side:
        return "right" if self.vertical else "top"

    @property
    def plus_side(self) -> Side:
        return "left" if self.vertical else "bottom"


def interior_interfaces(mesh: Mesh) -> list[Interface]:
    out: list[Interface] = []
    kx, ky = mesh.kx, mesh.ky
    for iy in range(ky):
        for ix in range(kx - 1):
            out.append(Interface(len(out), mesh.element_index(ix, iy), mesh.element_index(ix + 1, iy), True))
    for iy in range(ky - 1):
        for ix in range(kx):
            out.append(Interface(len(out), mesh.element_index(ix, iy), mesh.element_index(ix, iy + 1), False))
    return out


def element_trace_entries(mesh: Mesh, N: int) -> list[list[tuple[int, int, int]]]:
    """For each element, the ``(lambda row, local column, sign)`` triplets of E_N."""
    lay = LocalDofLayout(N)
    per_element: list[list[tuple[int, int, int]]] = [[] for _ in range(mesh.n_elements)]
    for itf in interior_interfaces(mesh):
        base = itf.index * N
        for k, (cm, cp) in enumerate(zip(lay.side_dofs(itf.minus_side), lay.side_dofs(itf.plus_side))):
            per_element[itf.minus].append((base + k, cm, 1))
            per_element[itf.plus].append((base + k, cp, -1))
    return per_element


def connectivity_en(mesh: Mesh, N: int) -> sp.csr_matrix:
    """Assembled trace over interior interfaces, ``n_lambda x K (n_u + n_p)``."""
    lay = LocalDofLayout(_check_degree(N))
    n_lambda = N * mesh.n_interior_interfaces
    rows, cols, vals = [], [], []
    for e, entries in enumerate(element_trace_entries(mesh, N)):
        for r, c, v in entries:
            rows.append(r)
            cols.append(e * lay.n_local + c)
            vals.append(v)
    return sp.csr_matrix(
        (np.array(vals, dtype=np.int64), (np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64))),
        shape=(n_lambda, mesh.n_elements * lay.n_local),
    )


def count_dofs(dim: int, kx: int, ky: int, kz: int | None = None, *, N: int) -> tuple[int, int]:
    """Sizes ``(full system, interface system)`` of the hybrid method.

    The 3D count uses face dofs N^2, cell velocity dofs 3 N^2 (N+1) and
    pressure dofs N^3 per element.
    """
    N = _check_degree(N)
    if dim == 2:
        K = kx * ky
        n_lambda = N * (ky * (kx - 1) + kx * (ky - 1))
        return K * (2 * N * (N + 1) + N * N) + n_lambda, n_lambda
    if dim == 3:
        if kz is None:
            raise ValueError("3D counts need kz")
        K = kx * ky * kz
        faces = ky * kz * (kx - 1) + kx * kz * (ky - 1) + kx * ky * (kz - 1)
        n_lambda = N * N * faces
        return K * (3 * N * N * (N + 1) + N**3) + n_lambda, n_lambda
    raise ValueError(f"dimension must be 2 or 3, got {dim}")
