"""Metric-dependent element matrices, load vectors and the global saddle system.

Velocities are pulled back with the contravariant Piola map ``u = J u_ref / det J``
and pressures/sources as 2-forms, so the divergence and continuity constraints
keep their integer form on any mesh and the geometry only enters the weighted
mass matrix and the load vectors.

Sign convention. Darcy's law ``u = -A grad p`` tested with ``v`` gives

    (v, u)_{A^-1} - <div v, p> + <v.n, lambda> = -<v.n, p_hat>_{Gamma_D}

To keep the symmetric block form ``[[M, E21^T], [E21, 0]]`` the pressure unknown
stored in the system vector is the negated dual pressure; ``lambda`` is the
interface pressure and the velocity load is ``-<v.n, p_hat>``.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt
import scipy.sparse as sp
from scipy.linalg import lapack

from .errors import AssemblyError, IllPosedSystemError
from .mesh import ElementMap, Mesh, Side
from .parallel import element_map
from .polybasis import BasisSet1D
from .topology import SIDE_SIGN, LocalDofLayout, connectivity_en, incidence_e21

FloatArray = npt.NDArray[np.float64]
ScalarField = Callable[[FloatArray, FloatArray], FloatArray]
TensorField = Callable[[FloatArray, FloatArray], FloatArray]


@dataclass(frozen=True)
class PermeabilitySpec:
    """Evaluator ``(x, y) -> A`` returning arrays of shape ``x.shape + (2, 2)``."""

    evaluate: TensorField
    name: str = "A"

    def __call__(self, x, y) -> FloatArray:
        return self.evaluate(np.asarray(x, float), np.asarray(y, float))

    def inverse(self, x, y) -> FloatArray:
        A = self(x, y)
        a, b, c, d = A[..., 0, 0], A[..., 0, 1], A[..., 1, 0], A[..., 1, 1]
        scale = np.maximum(np.abs(A).max(axis=(-2, -1)), 1e-300)
        bad_sym = np.abs(b - c) > 1e-13 * scale
        det = a * d - b * c
        bad_pd = (a <= 0) | (det <= 0)
        bad = bad_sym | bad_pd
        if np.any(bad):
            k = np.argwhere(bad)[0]
            xb, yb = np.broadcast_to(x, bad.shape)[tuple(k)], np.broadcast_to(y, bad.shape)[tuple(k)]
            what = "not symmetric" if bad_sym[tuple(k)] else "not positive definite"
            raise AssemblyError(f"{self.name} is {what} at (x, y) = ({xb:.6g}, {yb:.6g})")
        inv = np.empty_like(A)
        inv[..., 0, 0] = d / det
        inv[..., 1, 1] = a / det
        inv[..., 0, 1] = -b / det
        inv[..., 1, 0] = -c / det
        return inv


def isotropic(scale: float = 1.0) -> PermeabilitySpec:
    def ev(x, y):
        A = np.zeros(np.broadcast(x, y).shape + (2, 2))
        A[..., 0, 0] = A[..., 1, 1] = scale
        return A

    return PermeabilitySpec(ev, name=f"{scale}*I")


@dataclass(frozen=True)
class DarcyProblem:
    """Coefficient, source and Dirichlet pressure on the whole boundary."""

    perm: PermeabilitySpec
    source: ScalarField
    pressure_bc: ScalarField


def _reference_bases(basis: BasisSet1D) -> tuple[FloatArray, FloatArray]:
    # u_x column i*N + (j-1) -> h_i(xi) e_j(eta); u_y column (i-1) + N*j -> e_i(xi) h_j(eta)
    h, e = basis.h_table, basis.e_table
    Q = basis.n_quad
    bx = np.einsum("ia,jb->ijab", h, e).reshape(-1, Q * Q)
    by = np.einsum("ia,jb->jiab", e, h).reshape(-1, Q * Q)
    return bx, by


def weighted_mass_matrix(elem: ElementMap, basis: BasisSet1D, perm: PermeabilitySpec) -> FloatArray:
    """``M[a, b] = int (Piola phi_a)^T A^-1 (Piola phi_b) dx`` by tensor Gauss quadrature."""
    qx, qw = basis.quad_nodes, basis.quad_weights
    XI, ETA = np.meshgrid(qx, qx, indexing="ij")
    W = np.outer(qw, qw)
    J, det = elem.jacobian(XI, ETA)
    if np.min(det) <= 0:
        raise AssemblyError(f"element {elem.index}: non-positive det J at a quadrature point")
    x, y = elem.map(XI, ETA)
    Ainv = perm.inverse(x, y)
    # J^T A^-1 J / det J, the pulled-back metric for contravariant fields
    G = np.einsum("...ki,...kl,...lj->...ij", J, Ainv, J) / det[..., None, None]
    G = (G * W[..., None, None]).reshape(-1, 2, 2)
    bx, by = _reference_bases(basis)
    mxx = (bx * G[:, 0, 0]) @ bx.T
    mxy = (bx * G[:, 0, 1]) @ by.T
    myy = (by * G[:, 1, 1]) @ by.T
    M = np.block([[mxx, mxy], [mxy.T, myy]])
    return 0.5 * (M + M.T)


def _subcell_points(basis: BasisSet1D) -> tuple[FloatArray, FloatArray]:
    """Gauss points mapped into each GLL sub-interval: shape ``(N, Q)`` and weights."""
    n = basis.nodes
    mid, half = (n[1:] + n[:-1]) / 2, (n[1:] - n[:-1]) / 2
    pts = mid[:, None] + half[:, None] * basis.quad_nodes[None, :]
    wts = half[:, None] * basis.quad_weights[None, :]
    return pts, wts


def project_source(elem: ElementMap, basis: BasisSet1D, f: ScalarField) -> FloatArray:
    """Cell-integral dofs ``f_ij = int_{cell ij} f dx`` in pressure ordering."""
    pts, wts = _subcell_points(basis)
    XI = pts[:, :, None, None]
    ETA = pts[None, None, :, :]
    x, y = elem.map(XI, ETA)
    _, det = elem.jacobian(XI, ETA)
    vals = np.asarray(f(x, y), float) * det
    F = np.einsum("iajb,ia,jb->ij", np.broadcast_to(vals, x.shape), wts, wts)
    return F.ravel(order="F")


def side_points(side: Side, s: npt.ArrayLike) -> tuple[FloatArray, FloatArray]:
    s = np.asarray(s, float)
    one = np.ones_like(s)
    return {
        "left": (-one, s),
        "right": (one, s),
        "bottom": (s, -one),
        "top": (s, one),
    }[side]


def project_dirichlet(elem: ElementMap, side: Side, basis: BasisSet1D, p_hat: ScalarField) -> FloatArray:
    """Flux pairings ``<v_k . n, p_hat>`` of the N normal-flux dofs on ``side``."""
    qx, qw = basis.quad_nodes, basis.quad_weights
    xi, eta = side_points(side, qx)
    x, y = elem.map(xi, eta)
    vals = np.broadcast_to(np.asarray(p_hat(x, y), float), qx.shape)
    return SIDE_SIGN[side] * (basis.e_table @ (qw * vals))


@dataclass(frozen=True)
class LocalSaddle:
    """One diagonal block ``[[M, E21^T], [E21, 0]]`` with its load vector."""

    element: int
    M: FloatArray = field(repr=False)
    E21: sp.csr_matrix = field(repr=False)
    rhs_u: FloatArray = field(repr=False)
    rhs_f: FloatArray = field(repr=False)
    _factor: list = field(default_factory=list, repr=False, compare=False)

    @property
    def n_u(self) -> int:
        return self.M.shape[0]

    @property
    def n_local(self) -> int:
        return self.M.shape[0] + self.E21.shape[0]

    @property
    def rhs(self) -> FloatArray:
        return np.concatenate([self.rhs_u, self.rhs_f])

    def block(self) -> FloatArray:
        E = self.E21.toarray().astype(float)
        n_p = E.shape[0]
        return np.block([[self.M, E.T], [E, np.zeros((n_p, n_p))]])

    def factorize(self):
        """Bunch-Kaufman factorization of the block, computed once."""
        if not self._factor:
            lu, ipiv, info = lapack.dsytrf(self.block(), lower=1)
            if info != 0:
                raise IllPosedSystemError(f"element {self.element}: local saddle block is singular (info={info})")
            self._factor.append((lu, ipiv))
        return self._factor[0]

    def solve(self, b: npt.ArrayLike) -> FloatArray:
        lu, ipiv = self.factorize()
        x, info = lapack.dsytrs(lu, ipiv, np.asarray(b, float), lower=1)
        if info != 0:
            raise IllPosedSystemError(f"element {self.element}: local solve failed (info={info})")
        return x


def build_local(elem: ElementMap, mesh: Mesh, basis: BasisSet1D, problem: DarcyProblem) -> LocalSaddle:
    N = basis.degree
    lay = LocalDofLayout(N)
    M = weighted_mass_matrix(elem, basis, problem.perm)
    rhs_u = np.zeros(lay.n_u)
    for side in mesh.boundary_sides(elem.index):
        rhs_u[lay.side_dofs(side)] -= project_dirichlet(elem, side, basis, problem.pressure_bc)
    return LocalSaddle(
        element=elem.index,
        M=M,
        E21=incidence_e21(N),
        rhs_u=rhs_u,
        rhs_f=project_source(elem, basis, problem.source),
    )


def assemble_locals(mesh: Mesh, basis: BasisSet1D, problem: DarcyProblem, threads: int = 1) -> list[LocalSaddle]:
    return element_map(lambda el: build_local(el, mesh, basis, problem), mesh.elements, threads)


@dataclass(frozen=True)
class GlobalSaddle:
    """``[[A, E_N^T], [E_N, 0]] [X; lambda] = [F; 0]`` with block-diagonal A."""

    matrix: sp.csr_matrix = field(repr=False)
    rhs: FloatArray = field(repr=False)
    locals: list[LocalSaddle] = field(repr=False)
    E_N: sp.csr_matrix = field(repr=False)
    n_local: int
    n_elements: int

    @property
    def n_x(self) -> int:
        return self.n_local * self.n_elements

    @property
    def n_lambda(self) -> int:
        return self.E_N.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    @property
    def nnz(self) -> int:
        """Structural nonzeros; dense element blocks are counted in full."""
        return int(self.matrix.nnz)


def assemble_global(
    mesh: Mesh,
    basis: BasisSet1D,
    problem: DarcyProblem,
    threads: int = 1,
    locals: list[LocalSaddle] | None = None,
) -> GlobalSaddle:
    N = basis.degree
    lay = LocalDofLayout(N)
    if locals is None:
        locals = assemble_locals(mesh, basis, problem, threads)
    E21 = incidence_e21(N).tocoo()
    E_N = connectivity_en(mesh, N)
    nl, nu = lay.n_local, lay.n_u
    K = mesh.n_elements
    iu = np.repeat(np.arange(nu), nu)
    ju = np.tile(np.arange(nu), nu)
    rows, cols, vals = [], [], []
    for e, loc in enumerate(locals):
        o = e * nl
        rows += [o + iu, o + nu + E21.row, o + E21.col]
        cols += [o + ju, o + E21.col, o + nu + E21.row]
        vals += [loc.M.ravel(), E21.data.astype(float), E21.data.astype(float)]
    en = E_N.tocoo()
    rows += [K * nl + en.row, en.col]
    cols += [en.col, K * nl + en.row]
    vals += [en.data.astype(float), en.data.astype(float)]
    n = K * nl + E_N.shape[0]
    matrix = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    ).tocsr()
    rhs = np.concatenate([loc.rhs for loc in locals] + [np.zeros(E_N.shape[0])])
    return GlobalSaddle(matrix, rhs, locals, E_N, nl, K)


def structural_nnz(K: int, N: int, n_interfaces: int) -> int:
    """Closed-form pattern size of the global hybrid system."""
    return K * ((2 * N * (N + 1)) ** 2 + 8 * N * N) + 4 * N * n_interfaces


def write_coordinate(matrix: sp.spmatrix, path) -> None:
    """Write ``row col value`` triplets (0-based), one per line, row-major."""
    m = sp.csr_matrix(matrix)
    m.sort_indices()
    coo = m.tocoo()
    cast = int if np.issubdtype(coo.data.dtype, np.integer) else float
    with open(path, "w") as fh:
        for r, c, v in zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist()):
            fh.write(f"{r} {c} {cast(v)!r}\n")
