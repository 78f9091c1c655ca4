"""Run configuration parsing and the adaptive driver."""
import numpy as np
import pytest

from afem.config import (ConfigError, RunConfig, build_mesh, build_problem,
                         load_config, parse_config, validate)
from afem.driver import DriverError, run_adaptive, run_ppum


# ------------------------------------------------------------------- config

def test_parse_config_basic():
    cfg = parse_config("""
# a comment
problem = square_sine
mesh_n = 4
max_vertices = 600
strategy = hybrid
theta = 0.5
""")
    assert cfg.problem == "square_sine"
    assert cfg.mesh_n == 4 and cfg.max_vertices == 600
    assert cfg.strategy == "hybrid" and cfg.theta == 0.5


@pytest.mark.parametrize("text,fieldname", [
    ("problem = nope", "problem"),
    ("theta = 1.5", "theta"),
    ("newton_tolerance = -1", "newton_tolerance"),
    ("indicator = wild", "indicator"),
    ("linear = qr", "linear"),
    ("ppum_subdomains = 0", "ppum_subdomains"),
    ("zzz = 1", "zzz"),
])
def test_errors_name_the_field(text, fieldname):
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    assert fieldname in str(err.value)


def test_parse_reports_line_number():
    with pytest.raises(ConfigError) as err:
        parse_config("problem = square_sine\nmesh_n = not_a_number\n")
    assert "line 2" in str(err.value)


def test_load_config_file(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("problem = cube_sine\nmesh_n = 3\n")
    cfg = load_config(str(p))
    assert cfg.problem == "cube_sine" and cfg.mesh_n == 3


def test_theta_zero_means_strategy_default():
    cfg = parse_config("problem = square_sine\ntheta = 0\n")
    assert cfg.theta_or_none is None
    cfg2 = parse_config("problem = square_sine\ntheta = 0.4\n")
    assert cfg2.theta_or_none == 0.4


def test_coefficient_specs():
    cfg = parse_config("""
problem = hamiltonian
dim = 2
mesh = unit_square
coeff.Rhat = const:8.0
coeff.rho = gaussian:amp=0.05,width=0.5,center=0.5 0.5
""")
    prob = build_problem(cfg)
    assert prob.n_components == 1
    # the gaussian peaks at its center and decays away from it
    rho = prob.constraint_coefficients.rho
    assert rho(np.array([0.5, 0.5])) > rho(np.array([0.0, 0.0]))


def test_bad_coefficient_spec_rejected():
    # specs are parsed when the problem is built, so errors surface there
    with pytest.raises(ConfigError) as err:
        build_problem(parse_config("problem = hamiltonian\ndim = 2\n"
                                   "coeff.rho = lookup:table\n"))
    assert "coeff.rho" in str(err.value)
    with pytest.raises(ConfigError):
        build_problem(parse_config("problem = hamiltonian\ndim = 2\n"
                                   "coeff.unknown_name = const:1\n"))


def test_build_mesh_modes(tmp_path):
    cfg = parse_config("problem = square_sine\nmesh_n = 3\n")
    # auto defers to the problem's own generator
    assert build_mesh(cfg, build_problem(cfg)).n_vertices == 16
    cfg2 = parse_config("problem = square_sine\nmesh = l_shape\nmesh_n = 2\n")
    assert build_mesh(cfg2).n_vertices == 21
    # file: round trip through the text format
    from afem.generators import unit_square
    from afem.mesh_io import write_mesh
    path = tmp_path / "m.txt"
    write_mesh(unit_square(2), path)
    cfg3 = parse_config(f"problem = square_sine\nmesh = file:{path}\n")
    assert build_mesh(cfg3).n_vertices == 9


# ------------------------------------------------------------------- driver

def test_run_adaptive_square_sine(tmp_path):
    out = tmp_path / "r1"
    rep = run_adaptive(RunConfig(problem="square_sine", mesh_n=4,
                                 max_vertices=500, out=str(out)))
    assert rep.status == "vertex_cap"
    nvs = [r.n_vertices for r in rep.levels]
    assert nvs == sorted(nvs) and nvs[-1] >= 500
    h1s = [r.h1_error for r in rep.levels]
    assert h1s[-1] < h1s[0]
    assert (out / "levels.csv").exists()
    assert (out / "report.json").exists()
    assert (out / "level00.vtk").exists()


def test_run_adaptive_respects_tiny_cap():
    rep = run_adaptive(RunConfig(problem="square_sine", mesh_n=4, max_vertices=25))
    assert len(rep.levels) == 1 and rep.status == "vertex_cap"


def test_run_adaptive_rejects_impossible_cap():
    with pytest.raises(ConfigError):
        run_adaptive(RunConfig(problem="square_sine", mesh_n=4, max_vertices=10))


def test_csv_reproducible_byte_for_byte(tmp_path):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        run_adaptive(RunConfig(problem="square_sine", mesh_n=4,
                               max_vertices=400, out=str(out)))
        outs.append((out / "levels.csv").read_bytes())
    assert outs[0] == outs[1]


def test_run_adaptive_multilevel_linear():
    rep = run_adaptive(RunConfig(problem="square_sine", mesh_n=4,
                                 max_vertices=400, linear="multilevel"))
    assert rep.levels[-1].h1_error < 0.3
    assert any(r.linear_iterations > 0 for r in rep.levels[1:])


def test_run_adaptive_dual_indicator():
    rep = run_adaptive(RunConfig(problem="square_sine", mesh_n=4,
                                 max_vertices=300, indicator="dual"))
    assert len(rep.extras["dual_estimate"]) == len(rep.levels)


def test_run_adaptive_target_eta_stop():
    rep = run_adaptive(RunConfig(problem="square_sine", mesh_n=4,
                                 max_vertices=100000, target_eta=0.5))
    assert rep.status == "target_met"
    assert rep.levels[-1].eta_total <= 0.5


def test_run_adaptive_constraint_problem():
    rep = run_adaptive(RunConfig(problem="hamiltonian_manufactured",
                                 mesh_n=4, max_vertices=400))
    assert rep.levels[-1].h1_error < rep.levels[0].h1_error
    assert all(r.newton_iterations <= 8 for r in rep.levels)


def test_run_ppum_blends_and_writes(tmp_path):
    out = tmp_path / "pp"
    rep = run_ppum(RunConfig(problem="square_sine", mesh_n=4, max_vertices=400,
                             ppum_subdomains=4, threads=4, out=str(out)))
    assert rep.status == "blended"
    assert rep.extras["ppum"]["pou_sum_deviation"] <= 1e-12
    assert rep.extras["ppum"]["max_cover"] <= 4
    assert len(rep.levels) == 2  # coarse record plus the blended record
    for i in range(4):
        assert (out / f"sub{i}" / "mesh.txt").exists()
    assert (out / "blend.vtk").exists()


def test_run_ppum_thread_count_invisible_in_output(tmp_path):
    csvs = []
    for threads, name in ((1, "t1"), (4, "t4")):
        out = tmp_path / name
        run_ppum(RunConfig(problem="square_sine", mesh_n=4, max_vertices=400,
                           ppum_subdomains=4, threads=threads, out=str(out)))
        csvs.append((out / "levels.csv").read_bytes())
    assert csvs[0] == csvs[1]
