# File: services/steady_asymptotics.py
"""Solução singular (mu -> 0) do problema estacionário.

Reúne as fórmulas fechadas dos fluxos limites, os pontos de pouso das
camadas limite, a camada regular sobre a variedade lenta e a montagem da
órbita singular com a expansão composta (externa + interna - limite comum).
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from services.fast_dynamics import LayerOrbit, integrate_layer
from services.geometry import geometry_factor, inverse_area_integral
from services.problem import SteadyProblem
from utils.errors import BadParameters, MatchingFailure, NonpositiveW

logger = logging.getLogger(__name__)

_SERIES_CUTOFF = 1e-8
_LINEAR_BRANCH = 1e-10
_ENDPOINT_TOL = 1e-8


@dataclass(frozen=True)
class LogRatioData:
    a: float
    b: float
    s: float
    gm_left: float
    gm_right: float


@dataclass(frozen=True)
class FluxPair:
    """J: fluxos escalados (J = Jbar/D); Jbar: densidades de fluxo físicas."""

    J1: float
    J2: float
    Jbar1: float
    Jbar2: float

    @classmethod
    def from_scaled(cls, J1: float, J2: float, species) -> "FluxPair":
        return cls(J1=J1, J2=J2, Jbar1=species.D1 * J1, Jbar2=species.D2 * J2)

    def current(self, species) -> float:
        """Corrente elétrica líquida alpha1 Jbar1 - alpha2 Jbar2."""
        return species.alpha1 * self.Jbar1 - species.alpha2 * self.Jbar2


@dataclass(frozen=True)
class BoundaryLayerEndpoint:
    side: str
    u_amplitude: float
    phi_limit: float
    w_limit: float
    has_layer: bool


def _geometric_mean(c1: float, c2: float, species) -> float:
    a1, a2 = species.alpha1, species.alpha2
    log_gm = (a2 * math.log(a1 * c1) + a1 * math.log(a2 * c2)) / (a1 + a2)
    return math.exp(log_gm)


def log_ratios(problem: SteadyProblem) -> LogRatioData:
    bd, sp = problem.boundary, problem.species
    a1, a2 = sp.alpha1, sp.alpha2
    a = math.log(bd.r1 / bd.l1)
    b = math.log(bd.r2 / bd.l2)
    s = (a2 * a + a1 * b) / (a1 + a2)
    gm_left = _geometric_mean(bd.l1, bd.l2, sp)
    gm_right = _geometric_mean(bd.r1, bd.r2, sp)
    if not math.isclose(gm_right, gm_left * math.exp(s), rel_tol=1e-12):
        raise MatchingFailure(
            f"Identidade gm_right = gm_left e^s violada ({gm_right:.12g} != {gm_left * math.exp(s):.12g})"
        )
    return LogRatioData(a=a, b=b, s=s, gm_left=gm_left, gm_right=gm_right)


def flux_shape_factor(s: float) -> float:
    """(1 - e^s)/s, com limite -1 em s = 0."""
    if abs(s) < _SERIES_CUTOFF:
        return -1.0 - 0.5 * s
    return -math.expm1(s) / s


def limiting_fluxes(problem: SteadyProblem, rho0: float = None) -> FluxPair:
    """Fluxos limites em forma estável (sem a singularidade removível em s = 0)."""
    sp, bd = problem.species, problem.boundary
    if rho0 is None:
        rho0 = geometry_factor(problem.profile).rho0
    lr = log_ratios(problem)
    factor = lr.gm_left * flux_shape_factor(lr.s) / rho0
    J1 = (lr.a - sp.alpha1 * bd.phi0) * factor / sp.alpha1
    J2 = (lr.b + sp.alpha2 * bd.phi0) * factor / sp.alpha2
    return FluxPair.from_scaled(J1, J2, sp)


def direct_flux_quotient(problem: SteadyProblem, rho0: float = None) -> FluxPair:
    """Quociente original dos fluxos limites; indefinido (0/0) em s = 0."""
    sp, bd = problem.species, problem.boundary
    a1, a2 = sp.alpha1, sp.alpha2
    if rho0 is None:
        rho0 = geometry_factor(problem.profile).rho0
    lr = log_ratios(problem)
    denominator = a2 * lr.a + a1 * lr.b
    if denominator == 0.0:
        raise BadParameters("Quociente direto indefinido em s = 0")
    common = (a1 + a2) * (lr.gm_left - lr.gm_right) / (rho0 * denominator)
    J1 = (lr.a - a1 * bd.phi0) * common / a1
    J2 = (lr.b + a2 * bd.phi0) * common / a2
    return FluxPair.from_scaled(J1, J2, sp)


def boundary_layer_endpoint(problem: SteadyProblem, side: str) -> BoundaryLayerEndpoint:
    """Amplitude de u na fronteira e ponto de pouso (phi*, w*) em Z0."""
    sp, bd = problem.species, problem.boundary
    a1, a2 = sp.alpha1, sp.alpha2
    c1, c2 = bd.side(side)
    tau = 0.0 if side == "left" else 1.0
    h = problem.profile.h(tau)
    gm = _geometric_mean(c1, c2, sp)
    w_limit = (a1 + a2) * gm
    shift = math.log(a1 * c1 / (a2 * c2)) / (a1 + a2)
    phi_limit = bd.phi0 + shift if side == "left" else shift

    has_layer = not math.isclose(a1 * c1, a2 * c2, rel_tol=1e-12, abs_tol=0.0)
    if not has_layer:
        return BoundaryLayerEndpoint(side, 0.0, phi_limit, w_limit, False)

    radicand = max(c1 + c2 - (a1 + a2) * gm / (a1 * a2), 0.0)
    magnitude = math.sqrt(2.0) * h * math.sqrt(radicand)
    sign = math.copysign(1.0, a2 * c2 - a1 * c1)
    u = -sign * magnitude if side == "left" else sign * magnitude
    return BoundaryLayerEndpoint(side, u, phi_limit, w_limit, True)


@dataclass(frozen=True)
class RegularLayer:
    """Solução externa eletroneutra: w decresce linearmente em int h^-1."""

    problem: SteadyProblem
    nu0: float
    w0: float
    tau0: float
    J1: float
    J2: float
    rho0: float

    @property
    def _sum_rate(self) -> float:
        sp = self.problem.species
        return sp.alpha1 * sp.alpha2 * (self.J1 + self.J2)

    @property
    def _drift(self) -> float:
        sp = self.problem.species
        return sp.alpha2 * self.J2 - sp.alpha1 * self.J1

    def _phi_from_integral(self, I):
        I = np.asarray(I, dtype=float)
        t = self._sum_rate * I / self.w0
        if abs(self._sum_rate * self.rho0 / self.w0) < _LINEAR_BRANCH:
            factor = np.ones_like(t)
        else:
            safe = np.where(t == 0.0, 1.0, t)
            factor = np.where(t == 0.0, 1.0, -np.log1p(-safe) / safe)
        return self.nu0 + self._drift * I / self.w0 * factor

    def w(self, x):
        return self.w0 - self._sum_rate * inverse_area_integral(self.problem.profile, x)

    def phi(self, x):
        out = self._phi_from_integral(inverse_area_integral(self.problem.profile, x))
        return float(out) if np.ndim(x) == 0 else out

    def p(self, x):
        return self._drift / self.w(x)

    def c1(self, x):
        sp = self.problem.species
        return self.w(x) / (sp.alpha1 * (sp.alpha1 + sp.alpha2))

    def c2(self, x):
        sp = self.problem.species
        return self.w(x) / (sp.alpha2 * (sp.alpha1 + sp.alpha2))

    def profile_table(self, x) -> dict:
        """(x, phi, c1, c2, w, p) de uma só vez, com uma única passada de quadratura."""
        sp = self.problem.species
        x = np.asarray(x, dtype=float)
        I = inverse_area_integral(self.problem.profile, x)
        w = self.w0 - self._sum_rate * I
        return {
            "x": x,
            "phi": self._phi_from_integral(I),
            "c1": w / (sp.alpha1 * (sp.alpha1 + sp.alpha2)),
            "c2": w / (sp.alpha2 * (sp.alpha1 + sp.alpha2)),
            "w": w,
            "p": self._drift / w,
        }


def regular_layer(problem: SteadyProblem, fluxes: FluxPair = None, rho0: float = None) -> RegularLayer:
    if rho0 is None:
        rho0 = geometry_factor(problem.profile).rho0
    if fluxes is None:
        fluxes = limiting_fluxes(problem, rho0)
    left = boundary_layer_endpoint(problem, "left")
    right = boundary_layer_endpoint(problem, "right")
    layer = RegularLayer(problem, left.phi_limit, left.w_limit, 0.0, fluxes.J1, fluxes.J2, rho0)

    grid = np.linspace(0.0, 1.0, 201)
    w_grid = layer.w0 - layer._sum_rate * inverse_area_integral(problem.profile, grid)
    if np.min(w_grid) <= 0 or layer.w0 - layer._sum_rate * rho0 <= 0:
        raise NonpositiveW(f"w(x) deixa de ser positiva (mínimo {np.min(w_grid):.3e})")

    w_end = layer.w0 - layer._sum_rate * rho0
    phi_end = float(layer._phi_from_integral(rho0))
    if abs(w_end - right.w_limit) > _ENDPOINT_TOL * max(1.0, abs(right.w_limit)):
        raise MatchingFailure(f"w(1)={w_end:.12g} não encontra w_R={right.w_limit:.12g}")
    if abs(phi_end - right.phi_limit) > _ENDPOINT_TOL * max(1.0, abs(right.phi_limit)):
        raise MatchingFailure(f"phi(1)={phi_end:.12g} não encontra phi_R={right.phi_limit:.12g}")
    return layer


def slow_flow_field(x: float, y, problem: SteadyProblem, fluxes: FluxPair):
    """Fluxo reduzido em S0: (phi, w)' = ((alpha2 J2 - alpha1 J1)/(h w), -alpha1 alpha2 (J1+J2)/h)."""
    sp = problem.species
    phi, w = y
    h = problem.profile.h(min(max(x, 0.0), 1.0))
    return [
        (sp.alpha2 * fluxes.J2 - sp.alpha1 * fluxes.J1) / (h * w),
        -sp.alpha1 * sp.alpha2 * (fluxes.J1 + fluxes.J2) / h,
    ]


def integrate_regular_layer(problem: SteadyProblem, x_eval=None, tol: float = 1e-11):
    """Integra numericamente o fluxo reduzido a partir de (nu0, w0); retorna (x, phi, w)."""
    fluxes = limiting_fluxes(problem)
    left = boundary_layer_endpoint(problem, "left")
    if x_eval is None:
        x_eval = np.linspace(0.0, 1.0, 101)
    sol = integrate.solve_ivp(
        slow_flow_field, (0.0, 1.0), [left.phi_limit, left.w_limit], method="DOP853",
        t_eval=x_eval, rtol=tol, atol=tol * 1e-2, args=(problem, fluxes),
    )
    if not sol.success:
        raise NonpositiveW(f"Integração do fluxo lento falhou: {sol.message}")
    return sol.t, sol.y[0], sol.y[1]


@dataclass(frozen=True, eq=False)
class SingularOrbit:
    problem: SteadyProblem
    left: BoundaryLayerEndpoint
    right: BoundaryLayerEndpoint
    left_orbit: LayerOrbit
    right_orbit: LayerOrbit
    regular: RegularLayer
    fluxes: FluxPair

    def _distances(self, x: np.ndarray):
        mu = self.problem.mu
        if mu == 0:
            return np.where(x == 0.0, 0.0, np.inf), np.where(x == 1.0, 0.0, np.inf)
        return x / mu, (1.0 - x) / mu

    def composite(self, x) -> dict:
        """phi, c1, c2 compostos em mu = problem.mu."""
        sp = self.problem.species
        x = np.atleast_1d(np.asarray(x, dtype=float))
        outer = self.regular.profile_table(x)
        phi, c1, c2 = outer["phi"].copy(), outer["c1"].copy(), outer["c2"].copy()
        d_left, d_right = self._distances(x)
        for orbit, endpoint, distance in (
            (self.left_orbit, self.left, d_left),
            (self.right_orbit, self.right, d_right),
        ):
            if not endpoint.has_layer:
                continue
            inner = orbit.at_distance(distance)
            in_c1, in_c2 = orbit.concentrations(inner, sp)
            star_c1 = endpoint.w_limit / (sp.alpha1 * (sp.alpha1 + sp.alpha2))
            star_c2 = endpoint.w_limit / (sp.alpha2 * (sp.alpha1 + sp.alpha2))
            phi += inner[:, 0] - endpoint.phi_limit
            c1 += in_c1 - star_c1
            c2 += in_c2 - star_c2
        return {"x": x, "phi": phi, "c1": c1, "c2": c2}


def singular_orbit(problem: SteadyProblem, xi_max: float = None, tol: float = 1e-10,
                   xi_span: float = 40.0) -> SingularOrbit:
    """Camada esquerda + camada regular + camada direita + fluxos."""
    rho0 = geometry_factor(problem.profile).rho0
    fluxes = limiting_fluxes(problem, rho0)
    left = boundary_layer_endpoint(problem, "left")
    right = boundary_layer_endpoint(problem, "right")
    regular = regular_layer(problem, fluxes, rho0)
    left_orbit = integrate_layer(problem, "left", xi_max=xi_max, tol=tol, xi_span=xi_span)
    right_orbit = integrate_layer(problem, "right", xi_max=xi_max, tol=tol, xi_span=xi_span)
    logger.info(
        f"Órbita singular: J1={fluxes.J1:.10g}, J2={fluxes.J2:.10g}, "
        f"camadas (esq={left.has_layer}, dir={right.has_layer})"
    )
    return SingularOrbit(problem, left, right, left_orbit, right_orbit, regular, fluxes)
