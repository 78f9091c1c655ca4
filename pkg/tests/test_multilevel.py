"""Multilevel hierarchy: smoother, transfer operators, preconditioned Krylov."""
import numpy as np
import pytest
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from afem.assembly import assemble_jacobian, assemble_residual
from afem.multilevel import (MultilevelConfig, build_hierarchy, galerkin_product,
                             prolongation_from_refinement, read_matrix,
                             smoother_sweep, write_matrix)
from afem.problem import SolutionField
from afem.problems import benchmark_poisson


def poisson_chain(levels, n0=2, nc=1):
    """Uniformly refined square with the prolongation of every refinement."""
    prob = benchmark_poisson("square_sine")
    mesh = prob.mesh_factory(n0)
    prolongs = []
    for _ in range(levels - 1):
        nv = mesh.n_vertices
        mesh.uniform_refine()
        prolongs.append(prolongation_from_refinement(nv, mesh, nc))
    u = SolutionField.zeros(mesh)
    a = assemble_jacobian(prob, u)
    b = -assemble_residual(prob, u)
    return mesh, a, b, prolongs


def test_gauss_seidel_oracle():
    # one forward sweep on [[2,1],[1,2]] x = (3,3) from x=0:
    # x0 = 3/2, then x1 = (3 - 1*1.5)/2 = 3/4
    a = sp.csr_matrix(np.array([[2.0, 1.0], [1.0, 2.0]]))
    out = smoother_sweep(a, np.zeros(2), np.array([3.0, 3.0]), "forward")
    assert np.allclose(out, [1.5, 0.75])
    back = smoother_sweep(a, np.zeros(2), np.array([3.0, 3.0]), "backward")
    assert np.allclose(back, [0.75, 1.5])


def test_gauss_seidel_fixed_point():
    a = sp.csr_matrix(np.array([[2.0, 1.0], [1.0, 2.0]]))
    x = np.array([1.0, 1.0])  # exact solution of a x = (3,3)
    out = smoother_sweep(a, x, np.array([3.0, 3.0]), "forward")
    assert np.allclose(out, x)


def test_prolongation_structure():
    # coarse vertices keep their value; every new vertex averages its two
    # parent vertices, so rows are either a single 1 or two entries of 1/2
    mesh = benchmark_poisson("square_sine").mesh_factory(2)
    nvc = mesh.n_vertices
    mesh.uniform_refine()
    p = sp.csr_matrix(prolongation_from_refinement(nvc, mesh, 1)).toarray()
    assert np.allclose(p[:nvc], np.eye(nvc))
    for r in range(nvc, mesh.n_vertices):
        nz = np.flatnonzero(p[r])
        assert np.allclose(p[r, nz], [0.5, 0.5])


def test_prolongation_reproduces_linears():
    mesh = benchmark_poisson("square_sine").mesh_factory(2)
    nvc = mesh.n_vertices
    mesh.uniform_refine()
    p = prolongation_from_refinement(nvc, mesh, 1)
    lin = lambda c: 2.0 * c[:, 0] - 3.0 * c[:, 1] + 1.0
    assert np.allclose(p @ lin(mesh.coords[:nvc]), lin(mesh.coords))


def test_prolongation_vector_components():
    mesh = benchmark_poisson("square_sine").mesh_factory(2)
    nvc = mesh.n_vertices
    mesh.uniform_refine()
    p1 = sp.csr_matrix(prolongation_from_refinement(nvc, mesh, 1))
    p3 = sp.csr_matrix(prolongation_from_refinement(nvc, mesh, 3))
    assert p3.shape == (3 * p1.shape[0], 3 * p1.shape[1])
    # component c of the vector operator is the scalar operator
    d1, d3 = p1.toarray(), p3.toarray()
    for c in range(3):
        assert np.array_equal(d3[c::3][:, c::3], d1)
    assert d3[0::3][:, 1::3].max() == 0.0  # no cross-component coupling


def test_galerkin_product_matches_dense():
    rng = np.random.default_rng(7)
    a = sp.random(30, 30, density=0.3, random_state=0).tocsr() + sp.eye(30) * 5.0
    p = sp.random(30, 12, density=0.4, random_state=1).tocsr()
    g = galerkin_product(a, p)
    assert np.allclose(g.toarray(), p.T.toarray() @ a.toarray() @ p.toarray(), atol=1e-13)


def test_hierarchy_galerkin_identity():
    # stored coarse operators are exactly the triple products of their parents
    _, a, _, prolongs = poisson_chain(3)
    hier = build_hierarchy(a, prolongs, MultilevelConfig(direct_threshold=10))
    assert hier.n_levels == 3
    for k in range(hier.n_levels - 1):
        a_fine = hier.matrices[k]
        p = hier.prolongations[k]
        dense = p.T.toarray() @ a_fine.toarray() @ p.toarray()
        assert np.abs(hier.matrices[k + 1].toarray() - dense).max() < 1e-13


def test_solve_matches_direct():
    for levels in (3, 5):
        _, a, b, prolongs = poisson_chain(levels)
        hier = build_hierarchy(a, prolongs, MultilevelConfig(direct_threshold=30))
        assert hier.is_symmetric()
        x, rep = hier.solve(b, tol=1e-10)
        ref = spla.spsolve(a.tocsc(), b)
        assert rep.converged and rep.method == "cg"
        assert np.abs(x - ref).max() < 1e-7


def test_iteration_count_level_independent():
    # optimal preconditioning: iteration counts may not blow up with depth
    _, a3, b3, pr3 = poisson_chain(3)
    _, a6, b6, pr6 = poisson_chain(6)
    h3 = build_hierarchy(a3, pr3, MultilevelConfig(direct_threshold=30))
    h6 = build_hierarchy(a6, pr6, MultilevelConfig(direct_threshold=30))
    _, r3 = h3.solve(b3, tol=1e-8)
    _, r6 = h6.solve(b6, tol=1e-8)
    assert r6.iterations <= 2 * max(1, r3.iterations)


def test_nonsymmetric_falls_back_to_tfqmr():
    _, a, b, prolongs = poisson_chain(4)
    s = sp.random(a.shape[0], a.shape[0], density=0.001, random_state=3) * 0.05
    an = (a + s - s.T).tocsr()
    hier = build_hierarchy(an, prolongs, MultilevelConfig(direct_threshold=30))
    assert not hier.is_symmetric()
    x, rep = hier.solve(b, tol=1e-10)
    assert rep.method == "tfqmr" and rep.converged
    assert np.abs(x - spla.spsolve(an.tocsc(), b)).max() < 1e-6


def test_single_level_is_exact_preconditioner():
    # one level below the direct threshold: every V-cycle is a direct solve,
    # so the Krylov wrapper converges immediately
    _, a, b, _ = poisson_chain(2, n0=2)
    hier = build_hierarchy(a, [], MultilevelConfig(direct_threshold=10 ** 6))
    assert hier.n_levels == 1
    x, rep = hier.solve(b, tol=1e-12)
    assert rep.converged and rep.iterations <= 2
    assert np.abs(a @ x - b).max() < 1e-10


def test_matrix_market_round_trip(tmp_path):
    _, a, _, _ = poisson_chain(2)
    path = str(tmp_path / "a.mtx")
    write_matrix(path, a)
    back = read_matrix(path)
    assert np.abs((back - a).toarray()).max() < 1e-15
