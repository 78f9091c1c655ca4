"""
-lap(u) = 0 on the L-shaped domain (-1,1)^2 minus the fourth quadrant,
u = r^(2/3) sin(2 theta / 3) on the boundary.

The exact solution has unbounded gradient at the reentrant corner, so
uniform refinement converges at a reduced rate while residual-driven
adaptive refinement recovers the optimal rate. This script runs both and
prints the vertex-count / H1-error table side by side.
"""
import os

from afem.assembly import apply_dirichlet, dirichlet_start, measure_error
from afem.indicators import mark, residual_indicator
from afem.multilevel import prolongation_from_refinement
from afem.newton import newton_solve
from afem.problem import SolutionField
from afem.problems import benchmark_poisson
from afem.vtk import export_vtk

out_dir = os.path.join(os.path.dirname(__file__), "out", "adaptive_poisson")
os.makedirs(out_dir, exist_ok=True)

prob = benchmark_poisson("corner_singularity")

# Uniform baseline: halve the mesh size three times (two bisection passes
# per halving) and record the error at each level.
uniform = []
mesh = prob.mesh_factory(2)
for level in range(4):
    if level > 0:
        mesh.uniform_refine()
        mesh.uniform_refine()
    u, _ = newton_solve(prob, dirichlet_start(prob, mesh))
    _, h1 = measure_error(mesh, u, prob.exact, prob.exact_grad)
    uniform.append((mesh.n_vertices, h1))
target = mesh.n_vertices

# Adaptive loop: solve, estimate, mark the largest indicators, bisect,
# carry the solution to the refined mesh as the next Newton start.
adaptive = []
mesh = prob.mesh_factory(2)
u, _ = newton_solve(prob, dirichlet_start(prob, mesh))
while True:
    _, h1 = measure_error(mesh, u, prob.exact, prob.exact_grad)
    adaptive.append((mesh.n_vertices, h1))
    if mesh.n_vertices >= target:
        break
    field = residual_indicator(prob, u)
    marks = mark(field, "maximum", 0.3)
    if not marks:
        break
    old = mesh.n_vertices
    mesh.refine_marked(marks)
    u = apply_dirichlet(prob, SolutionField.from_flat(
        mesh, 1, prolongation_from_refinement(old, mesh, 1) @ u.flat))
    u, _ = newton_solve(prob, u)

print("uniform refinement          adaptive refinement")
print("vertices   H1 error         vertices   H1 error")
rows = max(len(uniform), len(adaptive))
for k in range(rows):
    left = "%8d   %.6f" % uniform[k] if k < len(uniform) else " " * 19
    right = "%8d   %.6f" % adaptive[k] if k < len(adaptive) else ""
    print(f"{left}         {right}")

print()
print(f"uniform  H1 error at {uniform[-1][0]:5d} vertices: {uniform[-1][1]:.6f}")
print(f"adaptive H1 error at {adaptive[-1][0]:5d} vertices: {adaptive[-1][1]:.6f}")
print(f"ratio: {adaptive[-1][1] / uniform[-1][1]:.3f}")

path = os.path.join(out_dir, "corner.vtk")
export_vtk(mesh, {"u": u}, residual_indicator(prob, u), path)
print(f"wrote final adaptive mesh and solution to {path}")
