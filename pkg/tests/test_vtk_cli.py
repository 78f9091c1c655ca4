"""VTK export format and the command line entry points."""
import numpy as np
import pytest

from afem import generators
from afem.cli import main
from afem.indicators import IndicatorField
from afem.vtk import export_vtk


# ---------------------------------------------------------------------- vtk

def cell_types(txt):
    lines = txt.splitlines()
    at = next(i for i, ln in enumerate(lines) if ln.startswith("CELL_TYPES"))
    n = int(lines[at].split()[1])
    return lines[at + 1:at + 1 + n]


def test_vtk_transcribes_square(tmp_path):
    mesh = generators.unit_square(1)
    path = tmp_path / "two.vtk"
    export_vtk(mesh, {"u": np.ones(mesh.n_vertices)}, None, str(path))
    txt = path.read_text()
    assert txt.startswith("# vtk DataFile Version 3.0")
    assert "POINTS 4 double" in txt
    assert "CELLS 2 8" in txt          # two triangles, 2 * (1 + 3) ints
    assert cell_types(txt) == ["5", "5"]  # VTK type code for a triangle
    assert "POINT_DATA 4" in txt and "SCALARS u double 1" in txt


def test_vtk_pads_2d_points_with_zero_z(tmp_path):
    mesh = generators.unit_square(1)
    path = tmp_path / "pad.vtk"
    export_vtk(mesh, None, None, str(path))
    txt = path.read_text()
    start = txt.index("POINTS")
    rows = txt[start:].splitlines()[1:1 + mesh.n_vertices]
    for row in rows:
        parts = row.split()
        assert len(parts) == 3 and float(parts[2]) == 0.0


def test_vtk_tets_use_type_10(tmp_path):
    mesh = generators.unit_cube(1)
    path = tmp_path / "cube.vtk"
    export_vtk(mesh, None, None, str(path))
    txt = path.read_text()
    n = len(mesh.live_simplices())
    assert cell_types(txt) == ["10"] * n


def test_vtk_vector_fields_and_indicators(tmp_path):
    mesh = generators.unit_square(2)
    vals = np.column_stack([np.arange(mesh.n_vertices, dtype=float),
                            np.ones(mesh.n_vertices)])
    live = [int(s) for s in mesh.live_simplices()]
    ind = IndicatorField(mesh, {s: float(s) for s in live})
    path = tmp_path / "vec.vtk"
    export_vtk(mesh, {"w": vals}, ind, str(path))
    txt = path.read_text()
    assert "SCALARS w_0 double 1" in txt and "SCALARS w_1 double 1" in txt
    assert f"CELL_DATA {len(live)}" in txt and "SCALARS eta double 1" in txt


# ---------------------------------------------------------------------- cli

def write_cfg(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_cli_solve(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "problem = square_sine\nmesh_n = 4\nmax_vertices = 300\n")
    rc = main(["solve", "--config", cfg, "--out", str(tmp_path / "out")])
    assert rc == 0
    printed = capsys.readouterr().out
    assert printed.startswith("level,n_vertices,n_simplices,eta_total,")
    assert "status: vertex_cap" in printed
    assert (tmp_path / "out" / "levels.csv").exists()


def test_cli_mesh_info(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "problem = square_sine\nmesh_n = 2\n")
    assert main(["mesh-info", "--config", cfg]) == 0
    rows = {ln.split()[0]: ln.split()[1:] for ln in
            capsys.readouterr().out.splitlines() if ln.strip()}
    assert rows["dimension"] == ["2"]
    assert rows["vertices"] == ["9"] and rows["simplices"] == ["8"]
    assert rows["conformity"] == ["ok"]


def test_cli_mesh_refine(tmp_path):
    cfg = write_cfg(tmp_path, "problem = square_sine\nmesh_n = 2\n")
    out = tmp_path / "ref"
    assert main(["mesh-refine", "--config", cfg, "--out", str(out), "--rounds", "2"]) == 0
    assert (out / "mesh.txt").exists() and (out / "mesh.vtk").exists()
    from afem.mesh_io import read_mesh
    m = read_mesh(str(out / "mesh.txt"))
    assert len(m.live_simplices()) == 8 * 4  # two quadrupling rounds


def test_cli_ppum(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "problem = square_sine\nmesh_n = 4\nmax_vertices = 300\n"
                              "ppum_subdomains = 2\n")
    rc = main(["ppum", "--config", cfg, "--out", str(tmp_path / "pp"), "--threads", "2"])
    assert rc == 0
    assert "status: blended" in capsys.readouterr().out


def test_cli_config_error_exit_2(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "problem = nonsense\n")
    assert main(["solve", "--config", cfg]) == 2
    assert "config error" in capsys.readouterr().err


def test_cli_missing_config_exit_2(tmp_path, capsys):
    assert main(["solve", "--config", str(tmp_path / "absent.cfg")]) == 2


def test_cli_solver_failure_exit_3(tmp_path, capsys):
    # strong source with a tiny boundary value: Newton cannot converge in two
    # steps, and the driver reports the failure as exit code 3
    cfg = write_cfg(tmp_path,
                    "problem = hamiltonian\ndim = 2\nmesh = unit_square\nmesh_n = 2\n"
                    "max_vertices = 200\nnewton_max_iterations = 2\n"
                    "coeff.rho = const:50.0\ncoeff.dirichlet_f = const:0.05\n")
    assert main(["solve", "--config", cfg]) == 3
    assert "error" in capsys.readouterr().err.lower()


def test_cli_invalid_thread_count_exit_2(tmp_path):
    cfg = write_cfg(tmp_path, "problem = square_sine\nmesh_n = 4\n")
    assert main(["solve", "--config", cfg, "--threads", "0"]) == 2
