"""Residual, Jacobian, and functional assembly over simplex meshes.

Everything here walks elements (and flagged boundary faces), evaluates the
problem's pointwise integrand callbacks at quadrature points, and scatters
into global vectors/matrices.  Dofs are interleaved per vertex: the dof of
component c at vertex v is v * n_components + c.  Dirichlet vertices get
identity rows and columns in Jacobians and zeroed residual entries; solution
fields are expected to carry the dirichlet values themselves.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .elements import ElementGeometry, face_rule, fine_rule, linear_element
from .mesh import DIRICHLET, NEUMANN
from .problem import ProblemDefinition, SolutionField

_INTERIOR_T = 0
_BOUNDARY_T = 1


def _test_grads(grads: np.ndarray, nc: int) -> np.ndarray:
    """(n_basis, nc, nc, d) test gradients matching _test_values."""
    nb, d = grads.shape
    out = np.zeros((nb, nc, nc, d))
    for i in range(nb):
        for c in range(nc):
            out[i, c, c] = grads[i]
    return out


def free_dof_mask(problem: ProblemDefinition, mesh) -> np.ndarray:
    """True where a dof is unconstrained (vertex not dirichlet)."""
    free_v = mesh.vclass != DIRICHLET
    return np.repeat(free_v, problem.n_components)


def apply_dirichlet(problem: ProblemDefinition, u: SolutionField) -> SolutionField:
    """Overwrite u's values at dirichlet vertices with the boundary data."""
    mesh = u.mesh
    for v in np.flatnonzero(mesh.vclass == DIRICHLET):
        u.values[v] = problem.dirichlet_vec(mesh.coords[v])
    return u


def dirichlet_start(problem: ProblemDefinition, mesh) -> SolutionField:
    """Zero field lifted by the dirichlet data, the standard initial iterate."""
    return apply_dirichlet(problem, SolutionField.zeros(mesh, problem.n_components))


def interpolate(mesh, fn, n_components: int = 1) -> SolutionField:
    u = SolutionField.zeros(mesh, n_components)
    for v in range(mesh.n_vertices):
        u.values[v] = np.atleast_1d(fn(mesh.coords[v]))
    return u


def _element_data(mesh, sid, element):
    geom = ElementGeometry.of(mesh.coords[mesh.sverts[sid]])
    grads = element.grad_ref() @ geom.inv_t.T
    return geom, grads


def assemble_residual(problem: ProblemDefinition, u: SolutionField) -> np.ndarray:
    mesh = u.mesh
    nc = problem.n_components
    el = linear_element(mesh.dim)
    rule = el.rule
    bas = el.basis_at(rule.points)
    bary = rule.barycentric
    coeffs = problem.coefficients
    r = np.zeros(mesh.n_vertices * nc)

    for s in mesh.live_simplices():
        s = int(s)
        geom, grads = _element_data(mesh, s, el)
        verts = mesh.sverts[s]
        uloc = u.values[verts]
        gu = uloc.T @ grads  # (nc, d), constant on the element
        xq = geom.to_physical(rule.points)
        gvals = _test_grads(grads, nc)
        for q in range(len(rule.weights)):
            w = rule.weights[q] * abs(geom.det)
            x = xq[q]
            uq = bas[q] @ uloc
            c = coeffs.at(x, mesh, s, bary[q], grads)
            for i in range(el.n_basis):
                phi = bas[q, i]
                for comp in range(nc):
                    v = np.zeros(nc)
                    v[comp] = phi
                    r[int(verts[i]) * nc + comp] += w * problem.Ft(
                        _INTERIOR_T, x, None, uq, gu, v, gvals[i, comp], c)

    _boundary_residual(problem, u, r)
    r[~free_dof_mask(problem, mesh)] = 0.0
    return r


def _face_frame(mesh, bf, n_points: int = 3):
    """Quadrature points, weights, and basis values on a boundary face."""
    rule = face_rule(mesh.dim, n_points)
    verts = mesh.sverts[bf.simplex]
    flocal = [k for k in range(mesh.dim + 1) if k != bf.local_index]
    fpts = mesh.coords[[int(verts[k]) for k in flocal]]
    ref = rule.points
    xq = fpts[0] + np.atleast_2d(ref) @ (fpts[1:] - fpts[0])
    ref_vol = 1.0 if mesh.dim == 2 else 0.5
    wq = rule.weights * (bf.measure / ref_vol)
    # face barycentric -> element basis: the opposite vertex's basis vanishes
    nb = mesh.dim + 1
    bas = np.zeros((len(wq), nb))
    mu0 = 1.0 - np.atleast_2d(ref).sum(axis=1)
    for k, lf in enumerate(flocal):
        bas[:, lf] = mu0 if k == 0 else ref[:, k - 1]
    return xq, wq, bas


def _boundary_residual(problem, u, r):
    mesh = u.mesh
    nc = problem.n_components
    el = linear_element(mesh.dim)
    coeffs = problem.coefficients
    for bf in mesh.boundary_faces():
        if bf.bclass != NEUMANN:
            continue
        s = bf.simplex
        geom, grads = _element_data(mesh, s, el)
        verts = mesh.sverts[s]
        uloc = u.values[verts]
        gu = uloc.T @ grads
        xq, wq, bas = _face_frame(mesh, bf)
        gvals = _test_grads(grads, nc)
        for q in range(len(wq)):
            x = xq[q]
            uq = bas[q] @ uloc
            c = coeffs.at(x, mesh, s, None, grads)
            for i in range(el.n_basis):
                phi = bas[q, i]
                for comp in range(nc):
                    v = np.zeros(nc)
                    v[comp] = phi
                    r[int(verts[i]) * nc + comp] += wq[q] * problem.Ft(
                        _BOUNDARY_T, x, bf.normal, uq, gu, v, gvals[i, comp], c)


def assemble_jacobian(problem: ProblemDefinition, u: SolutionField) -> sp.csr_matrix:
    mesh = u.mesh
    nc = problem.n_components
    el = linear_element(mesh.dim)
    rule = el.rule
    bas = el.basis_at(rule.points)
    bary = rule.barycentric
    coeffs = problem.coefficients
    rows, cols, vals = [], [], []

    for s in mesh.live_simplices():
        s = int(s)
        geom, grads = _element_data(mesh, s, el)
        verts = [int(v) for v in mesh.sverts[s]]
        uloc = u.values[verts]
        gu = uloc.T @ grads
        xq = geom.to_physical(rule.points)
        gvals = _test_grads(grads, nc)
        nb = el.n_basis
        local = np.zeros((nb * nc, nb * nc))
        for q in range(len(rule.weights)):
            w = rule.weights[q] * abs(geom.det)
            x = xq[q]
            uq = bas[q] @ uloc
            c = coeffs.at(x, mesh, s, bary[q], grads)
            for i in range(nb):
                for ci in range(nc):
                    v = np.zeros(nc)
                    v[ci] = bas[q, i]
                    gv = gvals[i, ci]
                    for j in range(nb):
                        for cj in range(nc):
                            wdir = np.zeros(nc)
                            wdir[cj] = bas[q, j]
                            local[i * nc + ci, j * nc + cj] += w * problem.DFt(
                                _INTERIOR_T, x, None, uq, gu, wdir, gvals[j, cj], v, gv, c)
        for i in range(nb):
            for ci in range(nc):
                for j in range(nb):
                    for cj in range(nc):
                        rows.append(verts[i] * nc + ci)
                        cols.append(verts[j] * nc + cj)
                        vals.append(local[i * nc + ci, j * nc + cj])

    _boundary_jacobian(problem, u, rows, cols, vals)

    n = mesh.n_vertices * nc
    a = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    free = free_dof_mask(problem, mesh).astype(float)
    df = sp.diags(free)
    dd = sp.diags(1.0 - free)
    a = (df @ a @ df + dd).tocsr()
    a.sort_indices()
    return a


def _boundary_jacobian(problem, u, rows, cols, vals):
    mesh = u.mesh
    nc = problem.n_components
    el = linear_element(mesh.dim)
    coeffs = problem.coefficients
    for bf in mesh.boundary_faces():
        if bf.bclass != NEUMANN:
            continue
        s = bf.simplex
        geom, grads = _element_data(mesh, s, el)
        verts = [int(v) for v in mesh.sverts[s]]
        uloc = u.values[verts]
        gu = uloc.T @ grads
        xq, wq, bas = _face_frame(mesh, bf)
        gvals = _test_grads(grads, nc)
        nb = el.n_basis
        for q in range(len(wq)):
            x = xq[q]
            uq = bas[q] @ uloc
            c = coeffs.at(x, mesh, s, None, grads)
            for i in range(nb):
                for ci in range(nc):
                    v = np.zeros(nc)
                    v[ci] = bas[q, i]
                    for j in range(nb):
                        for cj in range(nc):
                            wdir = np.zeros(nc)
                            wdir[cj] = bas[q, j]
                            contrib = wq[q] * problem.DFt(
                                _BOUNDARY_T, x, bf.normal, uq, gu,
                                wdir, gvals[j, cj], v, gvals[i, ci], c)
                            if contrib != 0.0:
                                rows.append(verts[i] * nc + ci)
                                cols.append(verts[j] * nc + cj)
                                vals.append(contrib)


def evaluate_functional(mesh, u, psi, n_components: int = None) -> float:
    """Integral of u . psi over the mesh; u is a SolutionField or a callable."""
    rule = fine_rule(mesh.dim)
    lam = rule.barycentric
    total = 0.0
    for s in mesh.live_simplices():
        s = int(s)
        geom = ElementGeometry.of(mesh.coords[mesh.sverts[s]])
        xq = geom.to_physical(rule.points)
        for q in range(len(rule.weights)):
            w = rule.weights[q] * abs(geom.det)
            if isinstance(u, SolutionField):
                uq = u.eval_in(s, lam[q])
            else:
                uq = np.atleast_1d(u(xq[q]))
            pq = np.atleast_1d(psi(xq[q]))
            total += w * float(uq @ pq)
    return total


def measure_error(mesh, u: SolutionField, exact, exact_grad=None):
    """L2 and H1 errors of u against callbacks, by high-order quadrature.

    Returns (l2, h1) with h1 the full norm; h1 is NaN when exact_grad is
    missing.  The measurement rule is deliberately finer than the assembly
    rule so observed convergence rates are not quadrature artifacts.
    """
    el = linear_element(mesh.dim)
    rule = fine_rule(mesh.dim)
    bas = el.basis_at(rule.points)
    l2sq = 0.0
    h1sq = 0.0
    for s in mesh.live_simplices():
        s = int(s)
        geom = ElementGeometry.of(mesh.coords[mesh.sverts[s]])
        grads = el.grad_ref() @ geom.inv_t.T
        verts = mesh.sverts[s]
        uloc = u.values[verts]
        gu = uloc.T @ grads
        xq = geom.to_physical(rule.points)
        for q in range(len(rule.weights)):
            w = rule.weights[q] * abs(geom.det)
            diff = bas[q] @ uloc - np.atleast_1d(exact(xq[q]))
            l2sq += w * float(diff @ diff)
            if exact_grad is not None:
                gdiff = gu - np.atleast_2d(exact_grad(xq[q]))
                h1sq += w * float((gdiff * gdiff).sum())
    l2 = np.sqrt(l2sq)
    h1 = np.sqrt(l2sq + h1sq) if exact_grad is not None else float("nan")
    return l2, h1
