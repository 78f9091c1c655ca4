"""Built-in problem definitions.

Scalar benchmarks (Poisson variants, Bratu) and the coupled nonlinear
constraint system (conformally scaled Hamiltonian and momentum equations)
used by the physics demos and the solver test suite.

Sign conventions follow the template

    -div A(u) + B(u) = 0      in the domain,
    A(u).n + C(u)    = 0      on flux-flagged boundary,
    u = g                     on dirichlet boundary,

whose weak residual is F(u)(v) = int A:grad v + B.v dx + int_bdry C.v ds.
SFt reports B - div A for t=0, C + A.n for t=1, and the flux A.n for t=2
(elementwise; div A vanishes for linear elements with constant metric).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import generators
from .problem import CoefficientField, Coefficients, ProblemDefinition


# --------------------------------------------------------------------- scalar

def _poisson_callbacks(f):
    def Ft(t, x, n, u, gu, v, gv, c):
        if t == 0:
            return float((gu[0] @ gv[0]) - f(x) * v[0])
        return 0.0

    def DFt(t, x, n, u, gu, w, gw, v, gv, c):
        if t == 0:
            return float(gw[0] @ gv[0])
        return 0.0

    def SFt(t, x, n, u, gu, c):
        if t == 0:
            return np.array([-f(x)])
        return np.array([float(gu[0] @ n)])

    return Ft, DFt, SFt


def benchmark_poisson(variant: str = "square_sine") -> ProblemDefinition:
    """Manufactured Poisson problems with exact solutions attached.

    square_sine: product sine on the unit square.
    cube_sine: product sine on the unit cube.
    corner_singularity: the r^(2/3) reentrant-corner solution on the L-shape,
    harmonic in the interior so all residual content sits at the corner.
    """
    if variant == "square_sine":
        def exact(x):
            return np.array([math.sin(math.pi * x[0]) * math.sin(math.pi * x[1])])

        def exact_grad(x):
            sx, cx = math.sin(math.pi * x[0]), math.cos(math.pi * x[0])
            sy, cy = math.sin(math.pi * x[1]), math.cos(math.pi * x[1])
            return np.array([[math.pi * cx * sy, math.pi * sx * cy]])

        def f(x):
            return 2.0 * math.pi ** 2 * math.sin(math.pi * x[0]) * math.sin(math.pi * x[1])

        mesh_factory = generators.unit_square
    elif variant == "cube_sine":
        def exact(x):
            return np.array([math.sin(math.pi * x[0]) * math.sin(math.pi * x[1])
                             * math.sin(math.pi * x[2])])

        def exact_grad(x):
            s = [math.sin(math.pi * xi) for xi in x]
            cgrad = [math.pi * math.cos(math.pi * x[i]) * s[(i + 1) % 3] * s[(i + 2) % 3]
                     for i in range(3)]
            return np.array([cgrad])

        def f(x):
            return 3.0 * math.pi ** 2 * (math.sin(math.pi * x[0]) * math.sin(math.pi * x[1])
                                         * math.sin(math.pi * x[2]))

        mesh_factory = generators.unit_cube
    elif variant == "corner_singularity":
        def _polar(x):
            r = math.hypot(x[0], x[1])
            th = math.atan2(x[1], x[0])
            if th < 0.0:
                th += 2.0 * math.pi
            return r, th

        def exact(x):
            r, th = _polar(x)
            return np.array([r ** (2.0 / 3.0) * math.sin(2.0 * th / 3.0)])

        def exact_grad(x):
            r, th = _polar(x)
            if r == 0.0:
                return np.array([[0.0, 0.0]])  # measure-zero; the limit is unbounded
            dr = (2.0 / 3.0) * r ** (-1.0 / 3.0) * math.sin(2.0 * th / 3.0)
            dt = (2.0 / 3.0) * r ** (-1.0 / 3.0) * math.cos(2.0 * th / 3.0)
            ct, st = math.cos(th), math.sin(th)
            return np.array([[dr * ct - dt * st, dr * st + dt * ct]])

        def f(x):
            return 0.0

        mesh_factory = generators.l_shape
    else:
        raise ValueError(f"unknown poisson variant {variant!r}")

    Ft, DFt, SFt = _poisson_callbacks(f)
    prob = ProblemDefinition(
        name=f"poisson_{variant}",
        n_components=1,
        Ft=Ft, DFt=DFt, SFt=SFt,
        dirichlet=lambda x: exact(x),
        coefficients=Coefficients(),
        exact=exact, exact_grad=exact_grad,
    )
    prob.mesh_factory = mesh_factory
    return prob


def benchmark_bratu(lam: float = 1.0) -> ProblemDefinition:
    """Bratu problem -lap(u) - lam exp(u) = 0 with homogeneous dirichlet data."""

    def Ft(t, x, n, u, gu, v, gv, c):
        if t == 0:
            return float(gu[0] @ gv[0]) - lam * math.exp(u[0]) * v[0]
        return 0.0

    def DFt(t, x, n, u, gu, w, gw, v, gv, c):
        if t == 0:
            return float(gw[0] @ gv[0]) - lam * math.exp(u[0]) * w[0] * v[0]
        return 0.0

    def SFt(t, x, n, u, gu, c):
        if t == 0:
            return np.array([-lam * math.exp(u[0])])
        return np.array([float(gu[0] @ n)])

    prob = ProblemDefinition(
        name="bratu",
        n_components=1,
        Ft=Ft, DFt=DFt, SFt=SFt,
        dirichlet=lambda x: np.array([0.0]),
        coefficients=Coefficients(),
    )
    prob.mesh_factory = generators.unit_square
    return prob


# ---------------------------------------------------------------- constraints
#
# The constraint system couples a nonlinear scalar equation for the conformal
# factor phi with a linear vector equation for W.  Unknowns are packed as
# (phi, W^1..W^d).  The scalar part has the potential derivative
#
#   P'(phi) = (1/8) Rhat phi + (1/12) (trK)^2 phi^5
#           - (1/8) (Ahat + LW)^2 phi^-7 - 2 pi rho phi^-3,
#
# and the vector part carries the trace-adjusted symmetrized gradient
# LW^ab = grad^a W^b + grad^b W^a - (2/3) g^ab div W with fixed constants
# mu = 1, lambda = -2/3.  Covariant derivatives use the flat chart
# connection; a non-identity background metric enters only as the contraction
# weight inside integrands (and is restricted to that role on purpose).

MU = 1.0
LAM = -2.0 / 3.0
PHI_FLOOR = 1e-6


class ProblemError(Exception):
    pass


class ClampCounter:
    """Counts evaluations that hit the positivity floor.  Statistics only:
    clamping changes the evaluation point, never the stored state."""

    __slots__ = ("count", "_lock")

    def __init__(self):
        import threading
        self.count = 0
        self._lock = threading.Lock()

    def bump(self):
        with self._lock:
            self.count += 1

    def reset(self):
        with self._lock:
            self.count = 0


def _ev_scalar(v, x):
    return float(v(x)) if callable(v) else float(v)


def _ev_vector(v, x, d):
    if v is None:
        return np.zeros(d)
    if callable(v):
        return np.asarray(v(x), dtype=float)
    return np.asarray(v, dtype=float)


def _ev_matrix(v, x, d):
    if v is None:
        return np.zeros((d, d))
    if callable(v):
        return np.asarray(v(x), dtype=float)
    return np.asarray(v, dtype=float)


def _check_spd(g, where):
    if not np.allclose(g, g.T, atol=1e-12):
        raise ProblemError(f"metric not symmetric at {where}")
    try:
        np.linalg.cholesky(g)
    except np.linalg.LinAlgError:
        raise ProblemError(f"metric not positive definite at {where}") from None


class ConstraintCoefficients:
    """Problem data for the constraint system.

    Scalar, vector, and matrix entries accept constants or callables of x;
    trK additionally needs trK_grad when it varies in space (the vector source
    carries its gradient).  rho must be nonnegative and dirichlet_f positive
    wherever sampled; both are checked at evaluation time.  metric is None
    (identity) or an SPD matrix / callable.
    """

    def __init__(self, dim=3, Rhat=0.0, trK=0.0, trK_grad=None, Ahat=None,
                 rho=0.0, jhat=None, robin_c=0.0, robin_z=0.0, robin_C=None,
                 robin_Z=None, dirichlet_f=1.0, dirichlet_F=None, metric=None,
                 phi_floor=PHI_FLOOR):
        self.dim = dim
        self.Rhat = Rhat
        self.trK = trK
        self.trK_grad = trK_grad
        self.Ahat = Ahat
        self.rho = rho
        self.jhat = jhat
        self.robin_c = robin_c
        self.robin_z = robin_z
        self.robin_C = robin_C
        self.robin_Z = robin_Z
        self.dirichlet_f = dirichlet_f
        self.dirichlet_F = dirichlet_F
        self.metric = metric
        self.phi_floor = phi_floor
        self.clamps = ClampCounter()
        if callable(trK) and trK_grad is None:
            raise ProblemError("spatially varying trK needs trK_grad")
        if metric is not None and not callable(metric):
            self.metric = np.asarray(metric, dtype=float)
            _check_spd(self.metric, "construction")

    # fixed physics constants, exposed for introspection
    mu = MU
    lam = LAM

    def metric_at(self, x):
        """(g, ginv) or (None, None) for the identity fast path."""
        if self.metric is None:
            return None, None
        g = np.asarray(self.metric(x), dtype=float) if callable(self.metric) \
            else self.metric
        if callable(self.metric):
            _check_spd(g, tuple(x))
        return g, np.linalg.inv(g)

    def rho_at(self, x):
        r = _ev_scalar(self.rho, x)
        if r < 0.0:
            raise ProblemError(f"rho sampled negative ({r}) at {tuple(x)}")
        return r

    def interior_at(self, x):
        """Point values the scalar-equation terms need."""
        trk = _ev_scalar(self.trK, x)
        return {"Rhat": _ev_scalar(self.Rhat, x), "trK2": trk * trk,
                "rho": self.rho_at(x)}

    def grad_trK_at(self, x):
        if self.trK_grad is not None:
            return np.asarray(self.trK_grad(x), dtype=float)
        return np.zeros(self.dim)

    def dirichlet_vector(self, x):
        f = _ev_scalar(self.dirichlet_f, x)
        if f <= 0.0:
            raise ProblemError(f"dirichlet_f must be positive, got {f} at {tuple(x)}")
        return np.concatenate([[f], _ev_vector(self.dirichlet_F, x, self.dim)])


def _clamped(phi, floor, clamps):
    if phi < floor:
        if clamps is not None:
            clamps.bump()
        return floor
    return float(phi)


def hamiltonian_Pprime(phi, at, lw_plus_a_sq, phi_floor=PHI_FLOOR, clamps=None):
    """Scalar potential derivative; `at` maps Rhat/trK2/rho to point values.

    phi below the positivity floor is clamped (and counted) rather than fed to
    the negative powers, so the result is always finite for finite data.
    """
    p = _clamped(phi, phi_floor, clamps)
    out = (0.125 * at["Rhat"] * p + at["trK2"] * p ** 5 / 12.0
           - 0.125 * lw_plus_a_sq * p ** -7 - 2.0 * math.pi * at["rho"] * p ** -3)
    if not math.isfinite(out):
        raise ProblemError(f"potential derivative not finite (phi={phi})")
    return out


def hamiltonian_Pprime_slope(phi, at, lw_plus_a_sq, phi_floor=PHI_FLOOR, clamps=None):
    """d/dphi of hamiltonian_Pprime at fixed coefficients and LW."""
    p = _clamped(phi, phi_floor, clamps)
    out = (0.125 * at["Rhat"] + (5.0 / 12.0) * at["trK2"] * p ** 4
           + 0.875 * lw_plus_a_sq * p ** -8
           + 6.0 * math.pi * at["rho"] * p ** -4)
    if not math.isfinite(out):
        raise ProblemError(f"potential second derivative not finite (phi={phi})")
    return out


# tensor helpers; g None means the identity metric

def _sym_up(grad_rows, ginv):
    gu = grad_rows if ginv is None else grad_rows @ ginv
    return 0.5 * (gu + gu.T)


def _lw(grad_rows, ginv, d):
    e = _sym_up(grad_rows, ginv)
    div = np.trace(grad_rows)
    tracer = np.eye(d) if ginv is None else ginv
    return 2.0 * e - (2.0 / 3.0) * div * tracer


def _dot2(a, b, g):
    """a^ab b^cd g_ac g_bd."""
    if g is None:
        return float(np.sum(a * b))
    return float(np.einsum("ab,cd,ac,bd->", a, b, g, g))


def _dot1(a, b, g):
    if g is None:
        return float(a @ b)
    return float(a @ g @ b)


def _grad_pair(ga, gb, ginv):
    """D_a u D^a v."""
    if ginv is None:
        return float(ga @ gb)
    return float(ga @ ginv @ gb)


def hamiltonian_forms(coeffs: ConstraintCoefficients, W=None, source=None,
                      dim=None) -> ProblemDefinition:
    """Scalar problem for the conformal factor with W held fixed.

    W may be None (zero field), a per-vertex (n_vertices, d) array, or a
    SolutionField; it enters only through the (Ahat + LW)^2 coefficient.
    source, when given, is a callable subtracted from the interior residual
    (used by the manufactured benchmark below).
    """
    d = dim or coeffs.dim
    co = Coefficients()
    if W is not None:
        wvals = W.values if hasattr(W, "values") else np.asarray(W, dtype=float)
        co.add("W", CoefficientField(wvals, want_grad=True))

    def s_tensor(x, c, ginv):
        a = _ev_matrix(coeffs.Ahat, x, d)
        if "W.grad" in c:
            a = a + _lw(c["W.grad"], ginv, d)
        return a

    def Ft(t, x, n, u, gu, v, gv, c):
        g, ginv = coeffs.metric_at(x)
        if t == 1:
            cb = _ev_scalar(coeffs.robin_c, x)
            zb = _ev_scalar(coeffs.robin_z, x)
            return (cb * u[0] - zb) * v[0]
        s = s_tensor(x, c, ginv)
        pp = hamiltonian_Pprime(u[0], coeffs.interior_at(x), _dot2(s, s, g),
                                coeffs.phi_floor, coeffs.clamps)
        if source is not None:
            pp -= source(x)
        return _grad_pair(gu[0], gv[0], ginv) + pp * v[0]

    def DFt(t, x, n, u, gu, w, gw, v, gv, c):
        g, ginv = coeffs.metric_at(x)
        if t == 1:
            return _ev_scalar(coeffs.robin_c, x) * w[0] * v[0]
        s = s_tensor(x, c, ginv)
        slope = hamiltonian_Pprime_slope(u[0], coeffs.interior_at(x), _dot2(s, s, g),
                                         coeffs.phi_floor, coeffs.clamps)
        return _grad_pair(gw[0], gv[0], ginv) + slope * w[0] * v[0]

    def SFt(t, x, n, u, gu, c):
        g, ginv = coeffs.metric_at(x)
        if t == 0:
            s = s_tensor(x, c, ginv)
            pp = hamiltonian_Pprime(u[0], coeffs.interior_at(x), _dot2(s, s, g),
                                    coeffs.phi_floor, coeffs.clamps)
            if source is not None:
                pp -= source(x)
            return np.array([pp])
        flux = float(gu[0] @ n) if ginv is None else float(gu[0] @ ginv @ n)
        if t == 2:
            return np.array([flux])
        cb = _ev_scalar(coeffs.robin_c, x)
        zb = _ev_scalar(coeffs.robin_z, x)
        return np.array([cb * u[0] - zb + flux])

    def dirichlet(x):
        f = _ev_scalar(coeffs.dirichlet_f, x)
        if f <= 0.0:
            raise ProblemError(f"dirichlet_f must be positive, got {f}")
        return np.array([f])

    prob = ProblemDefinition(
        name="hamiltonian", n_components=1,
        Ft=Ft, DFt=DFt, SFt=SFt, dirichlet=dirichlet, coefficients=co)
    prob.initial_value = np.array([1.0])
    prob.constraint_coefficients = coeffs
    return prob


def momentum_forms(coeffs: ConstraintCoefficients, phi=1.0,
                   dim=None) -> ProblemDefinition:
    """Linear vector problem for W with the conformal factor frozen.

    phi is a constant, a per-vertex array, or a scalar SolutionField; it feeds
    the phi^6 source weight only.
    """
    d = dim or coeffs.dim
    co = Coefficients()
    if hasattr(phi, "values"):
        co.add("phi", CoefficientField(phi.values[:, 0].copy()))
    elif isinstance(phi, np.ndarray):
        co.add("phi", CoefficientField(phi))
    else:
        co.add("phi", CoefficientField(float(phi)))

    def source_vec(x, c, ginv):
        p = float(np.atleast_1d(c["phi"])[0])
        gtk = coeffs.grad_trK_at(x)
        if ginv is not None:
            gtk = ginv @ gtk
        return (2.0 / 3.0) * p ** 6 * gtk + 8.0 * math.pi * _ev_vector(coeffs.jhat, x, d)

    def Ft(t, x, n, u, gu, v, gv, c):
        g, ginv = coeffs.metric_at(x)
        if t == 1:
            cm = _ev_matrix(coeffs.robin_C, x, d)
            zv = _ev_vector(coeffs.robin_Z, x, d)
            return _dot1(cm @ u - zv, v, g)
        ew, ev = _sym_up(gu, ginv), _sym_up(gv, ginv)
        elastic = 2.0 * MU * _dot2(ew, ev, g) + LAM * np.trace(gu) * np.trace(gv)
        return elastic + _dot1(source_vec(x, c, ginv), v, g)

    def DFt(t, x, n, u, gu, w, gw, v, gv, c):
        g, ginv = coeffs.metric_at(x)
        if t == 1:
            cm = _ev_matrix(coeffs.robin_C, x, d)
            return _dot1(cm @ w, v, g)
        ex, ev = _sym_up(gw, ginv), _sym_up(gv, ginv)
        return 2.0 * MU * _dot2(ex, ev, g) + LAM * np.trace(gw) * np.trace(gv)

    def SFt(t, x, n, u, gu, c):
        g, ginv = coeffs.metric_at(x)
        if t == 0:
            return source_vec(x, c, ginv)
        flux = _lw(gu, ginv, d) @ n
        if t == 2:
            return flux
        cm = _ev_matrix(coeffs.robin_C, x, d)
        zv = _ev_vector(coeffs.robin_Z, x, d)
        return cm @ u - zv + flux

    def dirichlet(x):
        return _ev_vector(coeffs.dirichlet_F, x, d)

    prob = ProblemDefinition(
        name="momentum", n_components=d,
        Ft=Ft, DFt=DFt, SFt=SFt, dirichlet=dirichlet, coefficients=co)
    prob.initial_value = np.zeros(d)
    prob.constraint_coefficients = coeffs
    return prob


def coupled_forms(coeffs: ConstraintCoefficients, dim=None) -> ProblemDefinition:
    """Full (phi, W) system with both linearization cross blocks.

    Component 0 is phi; components 1..d are W.  The W->phi block carries
    -(1/4)(Ahat+LW):(LX) phi^-7 and the phi->W block 4 phi^5 grad trK . V.
    """
    d = dim or coeffs.dim
    nc = d + 1

    def pieces(x, gu):
        g, ginv = coeffs.metric_at(x)
        a = _ev_matrix(coeffs.Ahat, x, d)
        s = a + _lw(gu[1:], ginv, d)
        return g, ginv, s

    def Ft(t, x, n, u, gu, v, gv, c):
        g, ginv, s = pieces(x, gu)
        if t == 1:
            cb = _ev_scalar(coeffs.robin_c, x)
            zb = _ev_scalar(coeffs.robin_z, x)
            cm = _ev_matrix(coeffs.robin_C, x, d)
            zv = _ev_vector(coeffs.robin_Z, x, d)
            return (cb * u[0] - zb) * v[0] + _dot1(cm @ u[1:] - zv, v[1:], g)
        pp = hamiltonian_Pprime(u[0], coeffs.interior_at(x), _dot2(s, s, g),
                                coeffs.phi_floor, coeffs.clamps)
        ham = _grad_pair(gu[0], gv[0], ginv) + pp * v[0]
        ew, ev = _sym_up(gu[1:], ginv), _sym_up(gv[1:], ginv)
        mom = 2.0 * MU * _dot2(ew, ev, g) + LAM * np.trace(gu[1:]) * np.trace(gv[1:])
        p6 = _clamped(u[0], coeffs.phi_floor, coeffs.clamps) ** 6
        gtk = coeffs.grad_trK_at(x)
        if ginv is not None:
            gtk = ginv @ gtk
        src = (2.0 / 3.0) * p6 * gtk + 8.0 * math.pi * _ev_vector(coeffs.jhat, x, d)
        return ham + mom + _dot1(src, v[1:], g)

    def DFt(t, x, n, u, gu, w, gw, v, gv, c):
        g, ginv, s = pieces(x, gu)
        if t == 1:
            cb = _ev_scalar(coeffs.robin_c, x)
            cm = _ev_matrix(coeffs.robin_C, x, d)
            return cb * w[0] * v[0] + _dot1(cm @ w[1:], v[1:], g)
        at = coeffs.interior_at(x)
        p = _clamped(u[0], coeffs.phi_floor, coeffs.clamps)
        slope = hamiltonian_Pprime_slope(u[0], at, _dot2(s, s, g),
                                         coeffs.phi_floor, coeffs.clamps)
        out = _grad_pair(gw[0], gv[0], ginv) + slope * w[0] * v[0]
        ex, ev = _sym_up(gw[1:], ginv), _sym_up(gv[1:], ginv)
        out += 2.0 * MU * _dot2(ex, ev, g) + LAM * np.trace(gw[1:]) * np.trace(gv[1:])
        lx = _lw(gw[1:], ginv, d)
        out -= 0.25 * _dot2(s, lx, g) * p ** -7 * v[0]
        gtk = coeffs.grad_trK_at(x)
        if ginv is not None:
            gtk = ginv @ gtk
        out += 4.0 * p ** 5 * _dot1(gtk, v[1:], g) * w[0]
        if not math.isfinite(out):
            raise ProblemError(f"linearized integrand not finite at {tuple(x)}")
        return out

    def SFt(t, x, n, u, gu, c):
        g, ginv, s = pieces(x, gu)
        if t == 0:
            pp = hamiltonian_Pprime(u[0], coeffs.interior_at(x), _dot2(s, s, g),
                                    coeffs.phi_floor, coeffs.clamps)
            p6 = _clamped(u[0], coeffs.phi_floor, coeffs.clamps) ** 6
            gtk = coeffs.grad_trK_at(x)
            if ginv is not None:
                gtk = ginv @ gtk
            src = (2.0 / 3.0) * p6 * gtk + 8.0 * math.pi * _ev_vector(coeffs.jhat, x, d)
            return np.concatenate([[pp], src])
        sflux = float(gu[0] @ n) if ginv is None else float(gu[0] @ ginv @ n)
        vflux = _lw(gu[1:], ginv, d) @ n
        if t == 2:
            return np.concatenate([[sflux], vflux])
        cb = _ev_scalar(coeffs.robin_c, x)
        zb = _ev_scalar(coeffs.robin_z, x)
        cm = _ev_matrix(coeffs.robin_C, x, d)
        zv = _ev_vector(coeffs.robin_Z, x, d)
        return np.concatenate([[cb * u[0] - zb + sflux], cm @ u[1:] - zv + vflux])

    prob = ProblemDefinition(
        name="constraints_coupled", n_components=nc,
        Ft=Ft, DFt=DFt, SFt=SFt,
        dirichlet=coeffs.dirichlet_vector,
        coefficients=Coefficients())
    prob.initial_value = np.concatenate([[1.0], np.zeros(d)])
    prob.constraint_coefficients = coeffs
    return prob


@dataclass
class ConstraintState:
    """(phi, W) view over a packed (d+1)-component field."""

    field: "SolutionField"

    @property
    def phi(self) -> np.ndarray:
        return self.field.values[:, 0]

    @property
    def W(self) -> np.ndarray:
        return self.field.values[:, 1:]

    @classmethod
    def pack(cls, mesh, phi, W) -> "ConstraintState":
        from .problem import SolutionField
        d = mesh.dim
        vals = np.zeros((mesh.n_vertices, d + 1))
        vals[:, 0] = phi
        vals[:, 1:] = W
        return cls(SolutionField(mesh, d + 1, vals))

    def floor_ok(self, phi_floor: float = PHI_FLOOR) -> bool:
        return bool(np.all(self.phi >= phi_floor))


def hamiltonian_trivial(dim: int = 3) -> ProblemDefinition:
    """Flat trivial data: every potential term zero, boundary value 1.

    The exact discrete solution is phi identically 1 (the equation reduces to
    the Laplace problem with constant boundary data), so Newton converges to
    round-off in one step from any start.
    """
    coeffs = ConstraintCoefficients(dim=dim, dirichlet_f=1.0)
    prob = hamiltonian_forms(coeffs)
    prob.exact = lambda x: np.array([1.0])
    prob.exact_grad = lambda x: np.zeros((1, dim))
    prob.mesh_factory = generators.unit_square if dim == 2 else generators.unit_cube
    prob.constraint_coefficients = coeffs
    return prob


def hamiltonian_manufactured() -> ProblemDefinition:
    """Nonlinear scalar benchmark with a known solution on the unit square.

    Exact solution phi* = 1 + (1/4) sin(pi x) sin(pi y); coefficients
    Rhat = 8, trK^2 = 12, rho = 1/(2 pi) make the potential derivative
    phi + phi^5 - phi^-3, and the defect is moved into a source term so phi*
    solves the modified equation exactly.  phi* stays in [1, 1.25], well away
    from the positivity floor.
    """
    coeffs = ConstraintCoefficients(
        dim=2, Rhat=8.0, trK=math.sqrt(12.0), rho=1.0 / (2.0 * math.pi),
        dirichlet_f=1.0)

    def s_of(x):
        return math.sin(math.pi * x[0]) * math.sin(math.pi * x[1])

    def exact(x):
        return np.array([1.0 + 0.25 * s_of(x)])

    def exact_grad(x):
        gx = 0.25 * math.pi * math.cos(math.pi * x[0]) * math.sin(math.pi * x[1])
        gy = 0.25 * math.pi * math.sin(math.pi * x[0]) * math.cos(math.pi * x[1])
        return np.array([[gx, gy]])

    def source(x):
        # -lap(phi*) + P'(phi*) with lap(phi*) = -(pi^2/2) sin sin
        p = 1.0 + 0.25 * s_of(x)
        return 0.5 * math.pi ** 2 * s_of(x) + p + p ** 5 - p ** -3

    prob = hamiltonian_forms(coeffs, source=source)
    prob.name = "hamiltonian_manufactured"
    prob.exact = exact
    prob.exact_grad = exact_grad
    prob.mesh_factory = generators.unit_square
    prob.constraint_coefficients = coeffs
    return prob


def momentum_manufactured() -> ProblemDefinition:
    """Linear vector benchmark on the unit cube with a known solution.

    W* = (g, g, g) with g = sin(pi x) sin(pi y) sin(pi z); the current jhat is
    chosen so the momentum equation holds exactly (trK constant, so the phi^6
    source weight drops out).
    """
    pi = math.pi

    def g_of(x):
        return math.sin(pi * x[0]) * math.sin(pi * x[1]) * math.sin(pi * x[2])

    def dg(x, a):
        t = [math.sin(pi * x[i]) for i in range(3)]
        t[a] = math.cos(pi * x[a])
        return pi * t[0] * t[1] * t[2]

    def d2g(x, a, b):
        if a == b:
            return -pi ** 2 * g_of(x)
        t = [math.sin(pi * x[i]) for i in range(3)]
        t[a] = math.cos(pi * x[a])
        t[b] = math.cos(pi * x[b])
        return pi ** 2 * t[0] * t[1] * t[2]

    def jhat(x):
        # div(LW*)^a = lap W*^a + (1/3) d_a div W*
        lap = -3.0 * pi ** 2 * g_of(x)
        out = np.empty(3)
        for a in range(3):
            ddiv = sum(d2g(x, a, b) for b in range(3))
            out[a] = lap + ddiv / 3.0
        return out / (8.0 * pi)

    coeffs = ConstraintCoefficients(dim=3, trK=1.0, jhat=jhat)
    prob = momentum_forms(coeffs, phi=1.0)
    prob.name = "momentum_manufactured"
    prob.exact = lambda x: np.full(3, g_of(x))
    prob.exact_grad = lambda x: np.tile([dg(x, b) for b in range(3)], (3, 1))
    prob.mesh_factory = generators.unit_cube
    prob.constraint_coefficients = coeffs
    return prob


def coupled_trivial(dim: int = 3) -> ProblemDefinition:
    """Coupled system with flat trivial data; exact solution (phi, W) = (1, 0)."""
    coeffs = ConstraintCoefficients(dim=dim, dirichlet_f=1.0)
    prob = coupled_forms(coeffs)
    prob.exact = lambda x: np.concatenate([[1.0], np.zeros(dim)])
    prob.exact_grad = lambda x: np.zeros((dim + 1, dim))
    prob.mesh_factory = generators.unit_square if dim == 2 else generators.unit_cube
    prob.constraint_coefficients = coeffs
    return prob


def demo_constraint_coefficients(dim: int = 2) -> ConstraintCoefficients:
    """Desk-scale excised-region data: constant trace, Gaussian energy density,
    Robin far-field data pulling phi toward 1."""
    center = np.full(dim, 0.0)

    def rho(x):
        r2 = float(np.sum((np.asarray(x) - center) ** 2))
        return 0.05 * math.exp(-r2 / 0.5)

    return ConstraintCoefficients(
        dim=dim, trK=0.2, rho=rho, robin_c=1.0, robin_z=1.0, dirichlet_f=1.0)
