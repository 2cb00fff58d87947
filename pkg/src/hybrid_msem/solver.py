"""Monolithic and Schur-complement solves of the hybrid saddle system."""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import GlobalSaddle, LocalSaddle
from .errors import IllPosedSystemError
from .parallel import element_map

FloatArray = npt.NDArray[np.float64]

RESIDUAL_TOL = 1e-10


@dataclass
class SolutionFields:
    """Element velocity fluxes, dual pressures and interface pressures.

    ``p`` holds the physical dual pressure dofs ``int p e_i e_j``; the system
    vector stores their negatives (see :mod:`hybrid_msem.assembly`).
    """

    u: FloatArray
    p: FloatArray
    lam: FloatArray
    stats: dict = field(default_factory=dict)
    schur: SchurSystem | None = field(default=None, repr=False)

    @classmethod
    def from_vector(cls, X: FloatArray, n_u: int, n_local: int, n_elements: int, lam: FloatArray) -> SolutionFields:
        blocks = X[: n_local * n_elements].reshape(n_elements, n_local)
        return cls(u=blocks[:, :n_u].copy(), p=-blocks[:, n_u:].copy(), lam=np.asarray(lam, float).copy())

    def system_vector(self) -> FloatArray:
        return np.concatenate([np.hstack([self.u, -self.p]).ravel(), self.lam])


def solve_monolithic(system: GlobalSaddle) -> SolutionFields:
    """Direct sparse LU solve of the full saddle system."""
    t0 = time.perf_counter()
    A = system.matrix.tocsc()
    with warnings.catch_warnings():
        warnings.simplefilter("error", spla.MatrixRankWarning)
        try:
            x = spla.spsolve(A, system.rhs)
        except (RuntimeError, spla.MatrixRankWarning) as exc:
            raise IllPosedSystemError(f"global saddle system is singular: {exc}") from exc
    t_solve = time.perf_counter() - t0
    bnorm = np.linalg.norm(system.rhs)
    res = np.linalg.norm(A @ x - system.rhs) / (bnorm if bnorm > 0 else 1.0)
    if not np.isfinite(res) or res > RESIDUAL_TOL:
        raise IllPosedSystemError(f"monolithic solve residual {res:.3e} exceeds {RESIDUAL_TOL:g}")
    n_u = system.locals[0].n_u
    sol = SolutionFields.from_vector(x, n_u, system.n_local, system.n_elements, x[system.n_x :])
    sol.stats.update(path="monolithic", relative_residual=float(res), t_solve_s=t_solve)
    return sol


@dataclass
class SchurSystem:
    """Interface system ``S lambda = g`` with ``S = E_N A^-1 E_N^T``, ``g = E_N A^-1 F``."""

    S: sp.csr_matrix
    rhs: FloatArray
    locals: list[LocalSaddle] = field(repr=False)
    entries: list[list[tuple[int, int, int]]] = field(repr=False)

    @property
    def n_lambda(self) -> int:
        return self.S.shape[0]


def _element_entries(E_N: sp.csr_matrix, n_elements: int, n_local: int) -> list[list[tuple[int, int, int]]]:
    coo = E_N.tocoo()
    out: list[list[tuple[int, int, int]]] = [[] for _ in range(n_elements)]
    order = np.lexsort((coo.row, coo.col))
    for r, c, v in zip(coo.row[order].tolist(), coo.col[order].tolist(), coo.data[order].tolist()):
        e, local = divmod(c, n_local)
        out[e].append((r, local, int(v)))
    return out


def _element_contribution(loc: LocalSaddle, entries: list[tuple[int, int, int]]):
    loc.factorize()
    Ainv_F = loc.solve(loc.rhs)
    if not entries:
        return np.zeros(0, int), np.zeros((0, 0)), np.zeros(0)
    rows = np.array([r for r, _, _ in entries])
    cols = np.array([c for _, c, _ in entries])
    signs = np.array([s for _, _, s in entries], float)
    Ct = np.zeros((loc.n_local, len(entries)))
    Ct[cols, np.arange(len(entries))] = signs
    Z = loc.solve(Ct)
    S_e = signs[:, None] * Z[cols, :]
    g_e = signs * Ainv_F[cols]
    return rows, 0.5 * (S_e + S_e.T), g_e


def build_schur(locals: list[LocalSaddle], E_N: sp.csr_matrix, threads: int = 1) -> SchurSystem:
    """Factorize every element block and accumulate the interface system."""
    n_local = locals[0].n_local
    entries = _element_entries(E_N, len(locals), n_local)
    parts = element_map(lambda k: _element_contribution(locals[k], entries[k]), range(len(locals)), threads)
    n_lambda = E_N.shape[0]
    rows, cols, vals = [], [], []
    g = np.zeros(n_lambda)
    for r, S_e, g_e in parts:
        if len(r) == 0:
            continue
        rows.append(np.repeat(r, len(r)))
        cols.append(np.tile(r, len(r)))
        vals.append(S_e.ravel())
        np.add.at(g, r, g_e)
    if rows:
        S = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n_lambda, n_lambda)
        ).tocsr()
    else:
        S = sp.csr_matrix((n_lambda, n_lambda))
    return SchurSystem(S, g, locals, entries)


def solve_interface(schur: SchurSystem, method: str = "direct", tol: float = 1e-12) -> FloatArray:
    if schur.n_lambda == 0:
        return np.zeros(0)
    if method == "cg":
        lam, info = spla.cg(schur.S, schur.rhs, rtol=tol, maxiter=10 * schur.n_lambda)
        if info != 0:
            raise IllPosedSystemError(f"conjugate gradient did not converge (info={info})")
        return lam
    try:
        factor = spla.splu(schur.S.tocsc())
    except RuntimeError as exc:
        raise IllPosedSystemError(f"interface system is singular: {exc}") from exc
    return factor.solve(schur.rhs)


def recover(schur: SchurSystem, lam: FloatArray, threads: int = 1) -> FloatArray:
    """Element solutions ``X_e = A_e^-1 (F_e - C_e^T lambda)`` stacked row-wise."""

    def one(k: int) -> FloatArray:
        loc = schur.locals[k]
        b = loc.rhs.copy()
        for r, c, s in schur.entries[k]:
            b[c] -= s * lam[r]
        return loc.solve(b)

    return np.vstack(element_map(one, range(len(schur.locals)), threads))


def solve_schur(
    locals: list[LocalSaddle],
    E_N: sp.csr_matrix,
    threads: int = 1,
    method: str = "direct",
) -> SolutionFields:
    """Condense onto the interface multipliers, solve, then recover per element."""
    t0 = time.perf_counter()
    schur = build_schur(locals, E_N, threads)
    t1 = time.perf_counter()
    lam = solve_interface(schur, method)
    t2 = time.perf_counter()
    X = recover(schur, lam, threads)
    t3 = time.perf_counter()
    n_u = locals[0].n_u
    sol = SolutionFields.from_vector(X.ravel(), n_u, locals[0].n_local, len(locals), lam)
    sol.stats.update(
        path="schur",
        n_lambda=schur.n_lambda,
        nnz_S=int(schur.S.nnz),
        t_factor_s=t1 - t0,
        t_solve_s=t2 - t1,
        t_recover_s=t3 - t2,
    )
    sol.schur = schur
    return sol


def condition_number(M, method: str = "dense-eigen", tol: float = 1e-10) -> float:
    """Ratio of the largest to the smallest eigenvalue magnitude of a symmetric matrix."""
    if sp.issparse(M):
        diff = abs(M - M.T)
        asym = diff.max() if diff.nnz else 0.0
        scale = abs(M).max() if M.nnz else 0.0
    else:
        M = np.asarray(M, float)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {M.shape}")
        asym = np.max(np.abs(M - M.T)) if M.size else 0.0
        scale = np.max(np.abs(M)) if M.size else 0.0
    if asym > 1e-11 * max(scale, 1e-300):
        raise ValueError(f"matrix is not symmetric (max asymmetry {asym:.3e})")
    n = M.shape[0]
    if n == 0:
        raise ValueError("condition number of an empty matrix")
    if method == "dense-eigen" or n <= 3:
        dense = M.toarray() if sp.issparse(M) else M
        ev = np.abs(la.eigvalsh(dense))
        return float(ev.max() / ev.min()) if ev.min() > 0 else float("inf")
    if method == "iterative-estimate":
        A = sp.csc_matrix(M)
        lmax = abs(spla.eigsh(A, k=1, which="LM", tol=tol, return_eigenvectors=False)[0])
        # shift-invert about zero picks out the eigenvalue of smallest magnitude
        lmin = abs(spla.eigsh(A, k=1, sigma=0.0, which="LM", tol=tol, return_eigenvectors=False)[0])
        return float(lmax / lmin)
    raise ValueError(f"unknown method {method!r}")
