"""Multilevel linear algebra: Galerkin-coarsened hierarchies, V-cycle
preconditioning, and the two outer Krylov loops.

Coarse operators come from triple products A_coarse = P^T A_fine P with the
prolongations refinement itself induces (identity rows for surviving vertices,
half/half rows for edge midpoints).  The V-cycle smooths with Gauss-Seidel,
forward before coarsening and backward after, so the preconditioner is
symmetric whenever A is; conjugate gradients runs outside it for symmetric
systems, a transpose-free QMR loop otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.io
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class MultilevelError(Exception):
    """Linear solve failure; carries the best iterate seen and the history."""

    def __init__(self, msg, x=None, iterations=0, residuals=None):
        super().__init__(msg)
        self.x = x
        self.iterations = iterations
        self.residuals = residuals or []


@dataclass
class SolveReport:
    method: str
    iterations: int
    residuals: list
    converged: bool


@dataclass
class MultilevelConfig:
    pre_sweeps: int = 1
    post_sweeps: int = 1
    direct_threshold: int = 500
    max_iterations: int = 500
    tolerance: float = 1e-8
    symmetry_tolerance: float = 1e-12


def smoother_sweep(a: sp.csr_matrix, x: np.ndarray, b: np.ndarray,
                   direction: str = "forward") -> np.ndarray:
    """One Gauss-Seidel sweep.  Computed as the exact triangular-solve form of
    the sequential update, so results are bit-reproducible.
    """
    diag = a.diagonal()
    if np.any(diag == 0.0):
        raise MultilevelError(f"zero diagonal entry at row {int(np.argmin(diag != 0.0))}")
    if direction == "forward":
        m = sp.tril(a, 0, format="csr")
        rest = a - m
    elif direction == "backward":
        m = sp.triu(a, 0, format="csr")
        rest = a - m
    else:
        raise ValueError(f"unknown sweep direction {direction!r}")
    rhs = b - rest @ x
    return spla.spsolve_triangular(m, rhs, lower=(direction == "forward"))


class MultilevelHierarchy:
    """Finest-first stack of operators with the prolongations between them."""

    def __init__(self, matrices, prolongations, config: MultilevelConfig):
        self.matrices = matrices          # [A_0 (finest), ..., A_{L-1} (coarsest)]
        self.prolongations = prolongations  # P_k maps level k+1 -> level k
        self.config = config
        self._splits = [None] * len(matrices)
        self._coarse_factor = None

    @property
    def n_levels(self) -> int:
        return len(self.matrices)

    def _split(self, k):
        # cache the GS triangular parts per level
        if self._splits[k] is None:
            a = self.matrices[k]
            diag = a.diagonal()
            if np.any(diag == 0.0):
                raise MultilevelError(f"zero diagonal on level {k}")
            lower = sp.tril(a, 0, format="csr")
            upper = sp.triu(a, 0, format="csr")
            self._splits[k] = (lower, a - lower, upper, a - upper)
        return self._splits[k]

    def _sweep(self, k, x, b, direction):
        lower, ur, upper, lr = self._split(k)
        if direction == "forward":
            return spla.spsolve_triangular(lower, b - ur @ x, lower=True)
        return spla.spsolve_triangular(upper, b - lr @ x, lower=False)

    def coarse_solve(self, b: np.ndarray) -> np.ndarray:
        a = self.matrices[-1]
        n = a.shape[0]
        if n <= self.config.direct_threshold:
            try:
                return np.linalg.solve(a.toarray(), b)
            except np.linalg.LinAlgError as e:
                raise MultilevelError(f"coarsest solve failed: {e}") from e
        if self._coarse_factor is None:
            try:
                self._coarse_factor = spla.splu(a.tocsc(), permc_spec="NATURAL")
            except RuntimeError as e:
                raise MultilevelError(f"coarsest factorization failed: {e}") from e
        return self._coarse_factor.solve(b)

    def v_cycle(self, b: np.ndarray, level: int = 0) -> np.ndarray:
        """One V-cycle for A_level x = b from a zero initial guess."""
        if level == self.n_levels - 1:
            return self.coarse_solve(b)
        a = self.matrices[level]
        p = self.prolongations[level]
        x = np.zeros_like(b)
        for _ in range(self.config.pre_sweeps):
            x = self._sweep(level, x, b, "forward")
        coarse_b = p.T @ (b - a @ x)
        x = x + p @ self.v_cycle(coarse_b, level + 1)
        for _ in range(self.config.post_sweeps):
            x = self._sweep(level, x, b, "backward")
        return x

    def is_symmetric(self) -> bool:
        a = self.matrices[0]
        gap = abs(a - a.T).max()
        scale = abs(a).max()
        return gap <= self.config.symmetry_tolerance * max(scale, 1.0)

    def solve(self, b: np.ndarray, tol: float = None, method: str = "auto"):
        cfg = self.config
        tol = cfg.tolerance if tol is None else tol
        if method == "auto":
            method = "cg" if self.is_symmetric() else "tfqmr"
        if method == "cg":
            return self._pcg(b, tol)
        if method == "tfqmr":
            return self._tfqmr(b, tol)
        raise ValueError(f"unknown method {method!r}")

    def _pcg(self, b: np.ndarray, tol: float):
        a = self.matrices[0]
        bnorm = float(np.linalg.norm(b))
        if bnorm == 0.0:
            return np.zeros_like(b), SolveReport("cg", 0, [0.0], True)
        x = np.zeros_like(b)
        r = b.copy()
        residuals = [1.0]
        z = self.v_cycle(r)
        p = z.copy()
        rz = float(r @ z)
        best = (1.0, x.copy(), 0)
        for it in range(1, self.config.max_iterations + 1):
            q = a @ p
            pq = float(p @ q)
            if pq <= 0.0:
                raise MultilevelError(
                    f"cg breakdown: direction with curvature {pq:.3e} (matrix not SPD?)",
                    x=best[1], iterations=it, residuals=residuals)
            alpha = rz / pq
            x = x + alpha * p
            r = r - alpha * q
            rel = float(np.linalg.norm(r)) / bnorm
            residuals.append(rel)
            if rel < best[0]:
                best = (rel, x.copy(), it)
            if rel <= tol:
                return x, SolveReport("cg", it, residuals, True)
            z = self.v_cycle(r)
            rz_new = float(r @ z)
            p = z + (rz_new / rz) * p
            rz = rz_new
        raise MultilevelError(
            f"cg did not reach {tol:.1e} within {self.config.max_iterations} iterations "
            f"(best {best[0]:.3e} at iteration {best[2]})",
            x=best[1], iterations=self.config.max_iterations, residuals=residuals)

    def _tfqmr(self, b: np.ndarray, tol: float):
        """Transpose-free QMR on the left V-cycle preconditioned system.

        The quasi-minimized quantity lives in the preconditioned space, so the
        stopping test uses the true unpreconditioned residual instead (one
        extra product per half-step, immaterial at the sizes this code runs).
        """
        a = self.matrices[0]
        bnorm = float(np.linalg.norm(b))
        if bnorm == 0.0:
            return np.zeros_like(b), SolveReport("tfqmr", 0, [0.0], True)

        def amul(vec):
            return self.v_cycle(a @ vec)

        x = np.zeros_like(b)
        r = self.v_cycle(b)
        u = r.copy()
        w = r.copy()
        rstar = r.copy()
        v = amul(u)
        d = np.zeros_like(b)
        tau = float(np.linalg.norm(r))
        theta = 0.0
        eta = 0.0
        rho = float(rstar @ r)
        alpha = 0.0
        residuals = [1.0]
        best = (1.0, x.copy(), 0)
        for m in range(self.config.max_iterations):
            if m % 2 == 0:
                sigma = float(rstar @ v)
                if sigma == 0.0 or rho == 0.0:
                    raise MultilevelError(
                        "tfqmr breakdown (vanishing inner product)",
                        x=best[1], iterations=m, residuals=residuals)
                alpha = rho / sigma
                u_next = u - alpha * v
            au = amul(u)
            w = w - alpha * au
            d = u + (theta * theta * eta / alpha) * d
            theta = float(np.linalg.norm(w)) / tau
            c = 1.0 / np.sqrt(1.0 + theta * theta)
            tau = tau * theta * c
            eta = c * c * alpha
            x = x + eta * d
            rel = float(np.linalg.norm(b - a @ x)) / bnorm
            residuals.append(rel)
            if rel < best[0]:
                best = (rel, x.copy(), m + 1)
            if rel <= tol:
                return x, SolveReport("tfqmr", m + 1, residuals, True)
            if m % 2 == 1:
                rho_next = float(rstar @ w)
                if rho == 0.0:
                    raise MultilevelError(
                        "tfqmr breakdown (rho collapsed)",
                        x=best[1], iterations=m, residuals=residuals)
                beta = rho_next / rho
                rho = rho_next
                u_next = w + beta * u
                v = amul(u_next) + beta * (au + beta * v)
            u = u_next
        raise MultilevelError(
            f"tfqmr did not reach {tol:.1e} within {self.config.max_iterations} iterations "
            f"(best {best[0]:.3e} at iteration {best[2]})",
            x=best[1], iterations=self.config.max_iterations, residuals=residuals)


def galerkin_product(a: sp.csr_matrix, p: sp.csr_matrix) -> sp.csr_matrix:
    out = (p.T @ a @ p).tocsr()
    out.sort_indices()
    return out


def build_hierarchy(a_fine: sp.csr_matrix, prolongations_coarse_to_fine,
                    config: MultilevelConfig = None) -> MultilevelHierarchy:
    """Stack Galerkin triple products under the fine operator.

    prolongations_coarse_to_fine lists P in mesh-construction order: element j
    maps level-j vertices (coarser) into level-(j+1) vertices.  An empty list
    builds a one-level hierarchy (direct/coarse solves only).
    """
    config = config or MultilevelConfig()
    if a_fine.shape[0] == 0:
        raise MultilevelError("empty system")
    mats = [a_fine.tocsr()]
    prols = []
    for p in reversed(list(prolongations_coarse_to_fine)):
        mats.append(galerkin_product(mats[-1], p))
        prols.append(p.tocsr())
    return MultilevelHierarchy(mats, prols, config)


def prolongation_from_refinement(n_coarse_vertices: int, mesh,
                                 n_components: int = 1) -> sp.csr_matrix:
    """Linear interpolation operator from the first n_coarse_vertices onto all
    of mesh's vertices, expanded through the vertex-parent genealogy.

    Surviving coarse vertices map by identity; a midpoint averages its parents,
    recursively resolved when a parent is itself newer than the coarse level.
    """
    nv = mesh.n_vertices
    if n_coarse_vertices > nv:
        raise MultilevelError("coarse level has more vertices than the mesh")
    rows_data = {}
    indptr = [0]
    indices = []
    data = []
    for v in range(nv):
        if v < n_coarse_vertices:
            row = ((v, 1.0),)
        else:
            pa, pb = (int(p) for p in mesh.vparents[v])
            if pa < 0 or pb < 0:
                raise MultilevelError(f"vertex {v} has no parent edge; cannot prolongate")
            acc = {}
            for p in (pa, pb):
                if p < n_coarse_vertices:
                    acc[p] = acc.get(p, 0.0) + 0.5
                else:
                    for col, wt in rows_data[p]:
                        acc[col] = acc.get(col, 0.0) + 0.5 * wt
            row = tuple(sorted(acc.items()))
        rows_data[v] = row
        for col, wt in row:
            indices.append(col)
            data.append(wt)
        indptr.append(len(indices))
    p = sp.csr_matrix((data, indices, indptr), shape=(nv, n_coarse_vertices))
    if n_components > 1:
        p = sp.kron(p, sp.eye(n_components), format="csr")
    p.sort_indices()
    return p


def write_matrix(path, a: sp.spmatrix) -> None:
    scipy.io.mmwrite(path, a.tocoo(), precision=17)


def read_matrix(path) -> sp.csr_matrix:
    a = scipy.io.mmread(path).tocsr()
    a.sort_indices()
    return a
