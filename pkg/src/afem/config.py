"""Flat key=value run configuration.

The format is one `key = value` pair per line, `#` comments, no sections.
Keys map onto RunConfig fields; `coeff.<name>` keys carry coefficient specs
for the physics problems using a small whitelist of forms:

    const:<float>
    gaussian:amp=<float>,width=<float>,center=<float>[ <float>...]

Every validation failure names the offending field.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np

from . import generators, mesh_io, problems


class ConfigError(Exception):
    pass


GENERATORS = ("unit_square", "unit_cube", "l_shape", "annulus", "sphere_in_box")
PROBLEMS = ("square_sine", "cube_sine", "corner_singularity", "bratu",
            "hamiltonian_trivial", "hamiltonian_manufactured",
            "momentum_manufactured", "coupled_trivial",
            "hamiltonian", "momentum", "coupled")
INDICATORS = ("residual", "dual")
STRATEGIES = ("equidistribution", "maximum", "hybrid")
LINEAR = ("direct", "multilevel")


@dataclass
class RunConfig:
    problem: str = "square_sine"
    mesh: str = "auto"               # generator name, file:<path>, or the problem's default
    mesh_n: int = 4
    dim: int = 2                     # used by the physics problems
    max_vertices: int = 2000
    target_eta: float = 0.0          # 0 disables the indicator stopping test
    indicator: str = "residual"
    strategy: str = "hybrid"
    theta: float = 0.0               # 0 means the strategy's default
    p: float = 2.0
    newton_tolerance: float = 1e-10
    newton_max_iterations: int = 25
    linear: str = "direct"
    linear_tolerance: float = 1e-10
    ppum_subdomains: int = 1
    ppum_layers: int = 2
    ppum_budget: int = 0             # 0 means max_vertices
    out: str = ""
    threads: int = 1
    seed: int = 0                    # reserved; nothing numerical reads it
    coefficients: dict = field(default_factory=dict)

    @property
    def theta_or_none(self):
        return None if self.theta == 0.0 else self.theta


def parse_config(text: str) -> RunConfig:
    cfg = RunConfig()
    ftypes = {f.name: f.type for f in fields(RunConfig)}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key.startswith("coeff."):
            cfg.coefficients[key[len("coeff."):]] = val
            continue
        if key not in ftypes or key == "coefficients":
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        kind = ftypes[key]
        try:
            if kind == "int":
                setattr(cfg, key, int(val))
            elif kind == "float":
                setattr(cfg, key, float(val))
            else:
                setattr(cfg, key, val)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {key}: {exc}") from exc
    validate(cfg)
    return cfg


def load_config(path: str) -> RunConfig:
    try:
        with open(path) as f:
            text = f.read()
    except OSError as exc:
        raise ConfigError(f"config file {path!r}: {exc.strerror or exc}") from exc
    return parse_config(text)


def validate(cfg: RunConfig) -> None:
    def need(cond, name, msg):
        if not cond:
            raise ConfigError(f"{name}: {msg}")

    need(cfg.problem in PROBLEMS, "problem", f"must be one of {PROBLEMS}")
    need(cfg.mesh == "auto" or cfg.mesh in GENERATORS
         or cfg.mesh.startswith("file:"),
         "mesh", f"must be 'auto', one of {GENERATORS}, or file:<path>")
    need(cfg.mesh_n >= 1, "mesh_n", "must be at least 1")
    need(cfg.dim in (2, 3), "dim", "must be 2 or 3")
    need(cfg.max_vertices >= 1, "max_vertices", "must be at least 1")
    need(cfg.target_eta >= 0.0, "target_eta", "must be nonnegative")
    need(cfg.indicator in INDICATORS, "indicator", f"must be one of {INDICATORS}")
    need(cfg.strategy in STRATEGIES, "strategy", f"must be one of {STRATEGIES}")
    need(0.0 <= cfg.theta <= 1.0, "theta", "must lie in [0, 1] (0 = default)")
    need(cfg.p >= 1.0, "p", "must be at least 1")
    need(cfg.newton_tolerance > 0.0, "newton_tolerance", "must be positive")
    need(cfg.newton_max_iterations >= 1, "newton_max_iterations", "must be at least 1")
    need(cfg.linear in LINEAR, "linear", f"must be one of {LINEAR}")
    need(cfg.linear_tolerance > 0.0, "linear_tolerance", "must be positive")
    need(cfg.ppum_subdomains >= 1, "ppum_subdomains", "must be at least 1")
    need(cfg.ppum_layers >= 1, "ppum_layers", "must be at least 1")
    need(cfg.ppum_budget >= 0, "ppum_budget", "must be nonnegative (0 = max_vertices)")
    need(cfg.threads >= 1, "threads", "must be at least 1")


# ----------------------------------------------------------- coefficient spec

def parse_coefficient(name: str, spec: str):
    """Whitelisted coefficient forms; returns a float or a callable of x."""
    kind, _, rest = spec.partition(":")
    if kind == "const":
        try:
            return float(rest)
        except ValueError as exc:
            raise ConfigError(f"coeff.{name}: bad const value {rest!r}") from exc
    if kind == "gaussian":
        args = {}
        for part in rest.split(","):
            k, _, v = part.partition("=")
            args[k.strip()] = v.strip()
        try:
            amp = float(args["amp"])
            width = float(args["width"])
            center = np.array([float(t) for t in args["center"].split()])
        except (KeyError, ValueError) as exc:
            raise ConfigError(
                f"coeff.{name}: gaussian needs amp=,width=,center=") from exc
        if width <= 0.0:
            raise ConfigError(f"coeff.{name}: gaussian width must be positive")

        def gauss(x):
            r2 = float(np.sum((np.asarray(x) - center) ** 2))
            return amp * math.exp(-r2 / width)

        return gauss
    raise ConfigError(f"coeff.{name}: unknown form {kind!r} "
                      "(supported: const, gaussian)")


# ------------------------------------------------------------------- builders

def build_mesh(cfg: RunConfig, problem=None):
    if cfg.mesh == "auto":
        factory = getattr(problem, "mesh_factory", None)
        if factory is None:
            raise ConfigError("mesh: 'auto' needs a problem with a default mesh")
        return factory(cfg.mesh_n)
    if cfg.mesh.startswith("file:"):
        return mesh_io.read_mesh(cfg.mesh[len("file:"):])
    if cfg.mesh == "annulus":
        return generators.annulus(n_r=cfg.mesh_n, n_t=max(3, 4 * cfg.mesh_n))
    if cfg.mesh == "sphere_in_box":
        return generators.sphere_in_box(n=max(3, cfg.mesh_n))
    return getattr(generators, cfg.mesh)(cfg.mesh_n)


def _constraint_coefficients(cfg: RunConfig) -> "problems.ConstraintCoefficients":
    known = {"Rhat", "trK", "rho", "robin_c", "robin_z", "dirichlet_f"}
    kw = {}
    for name, spec in cfg.coefficients.items():
        if name not in known:
            raise ConfigError(f"coeff.{name}: unknown coefficient "
                              f"(supported: {sorted(known)})")
        kw[name] = parse_coefficient(name, spec)
    return problems.ConstraintCoefficients(dim=cfg.dim, **kw)


def build_problem(cfg: RunConfig):
    """Problem instance for the configured selection, mesh factory attached."""
    name = cfg.problem
    if name in ("square_sine", "cube_sine", "corner_singularity"):
        return problems.benchmark_poisson(name)
    if name == "bratu":
        return problems.benchmark_bratu()
    if name == "hamiltonian_trivial":
        return problems.hamiltonian_trivial(dim=cfg.dim)
    if name == "hamiltonian_manufactured":
        return problems.hamiltonian_manufactured()
    if name == "momentum_manufactured":
        return problems.momentum_manufactured()
    if name == "coupled_trivial":
        return problems.coupled_trivial(dim=cfg.dim)
    coeffs = _constraint_coefficients(cfg)
    if name == "hamiltonian":
        return problems.hamiltonian_forms(coeffs)
    if name == "momentum":
        return problems.momentum_forms(coeffs)
    return problems.coupled_forms(coeffs)
