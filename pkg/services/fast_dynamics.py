# File: services/fast_dynamics.py
"""Sistema rápido (camada) do problema estacionário.

O espaço de fase tem sete coordenadas (phi, u, v, w, J1, J2, tau), com
u = mu h phi', v = -h (alpha1 c1 - alpha2 c2) e w = alpha1^2 c1 + alpha2^2 c2.
Em mu = 0 o conjunto de equilíbrios é Z0 = {u = v = 0} e o fluxo preserva
três integrais não triviais; as órbitas de camada limite ficam inteiras
dentro de um conjunto de nível dessas integrais.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from services.geometry import ChannelProfile
from services.problem import BoundaryData, IonSpecies, SteadyProblem
from utils.errors import (
    BadParameters,
    DegenerateGeometry,
    DivergentOrbit,
    LogSingularity,
    NonHyperbolic,
)

logger = logging.getLogger(__name__)

STATE_FIELDS = ("phi", "u", "v", "w", "J1", "J2", "tau")


@dataclass(frozen=True)
class FastState:
    phi: float
    u: float
    v: float
    w: float
    J1: float = 0.0
    J2: float = 0.0
    tau: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.phi, self.u, self.v, self.w, self.J1, self.J2, self.tau])

    @classmethod
    def from_array(cls, values) -> "FastState":
        return cls(*(float(v) for v in values))

    @property
    def on_slow_manifold(self) -> bool:
        return self.u == 0.0 and self.v == 0.0


@dataclass(frozen=True)
class IntegralVector:
    H1: float
    H2: float
    H3: float
    H4: float
    H5: float
    H6: float

    def as_array(self) -> np.ndarray:
        return np.array([self.H1, self.H2, self.H3, self.H4, self.H5, self.H6])


@dataclass(frozen=True, eq=False)
class EigenData:
    lambda_plus: float
    lambda_minus: float
    n_plus: np.ndarray
    n_minus: np.ndarray


@dataclass(frozen=True)
class BoundaryManifoldPoint:
    side: str
    state: FastState


@dataclass(frozen=True, eq=False)
class LayerOrbit:
    """Amostras de uma órbita de camada.

    ``xi`` cresce a partir de 0 na camada esquerda e decresce a partir de 0
    na direita; ``states`` tem uma linha (phi, u, v, w, J1, J2, tau) por amostra.
    ``drift`` é o desvio máximo de H1, H2, H3 medido antes de cada projeção.
    """

    side: str
    xi: np.ndarray
    states: np.ndarray
    terminal: FastState
    landing: FastState
    drift: np.ndarray
    h_side: float

    @property
    def has_layer(self) -> bool:
        return bool(np.any(self.states[:, 1] != 0.0) or np.any(self.states[:, 2] != 0.0))

    def at_distance(self, distance) -> np.ndarray:
        """Estados interpolados a distância |xi| da fronteira (terminal além do trecho)."""
        d = np.atleast_1d(np.asarray(distance, dtype=float))
        span = np.abs(self.xi)
        out = np.empty((d.size, len(STATE_FIELDS)))
        for j in range(len(STATE_FIELDS)):
            out[:, j] = np.interp(d, span, self.states[:, j], right=self.terminal.as_array()[j])
        return out

    def concentrations(self, states: np.ndarray, species: IonSpecies):
        return layer_concentrations(states[:, 2], states[:, 3], self.h_side, species)


def layer_concentrations(v, w, h, species: IonSpecies):
    """Inverte v e w: c1 = (w - alpha2 v/h)/(alpha1 (alpha1+alpha2)), análogo para c2."""
    a1, a2 = species.alpha1, species.alpha2
    c1 = (w - a2 * v / h) / (a1 * (a1 + a2))
    c2 = (w + a1 * v / h) / (a2 * (a1 + a2))
    return c1, c2


def _area(profile: ChannelProfile, tau: float):
    h = profile.h(tau)
    if not h > 0:
        raise DegenerateGeometry(f"h(tau) deve ser positiva (h({tau:g}) = {h:g})")
    return h, profile.dh(tau)


def fast_field(state: FastState, profile: ChannelProfile, species: IonSpecies, mu: float = 0.0) -> FastState:
    """Campo rápido; em mu = 0 reduz ao sistema limite com tau' = 0."""
    if mu < 0:
        raise BadParameters("mu deve ser >= 0")
    h, h_tau = _area(profile, state.tau)
    a1, a2 = species.alpha1, species.alpha2
    phi, u, v, w, J1, J2, tau = state.as_array()
    return FastState(
        phi=u / h,
        u=v,
        v=u * w + mu * (h_tau / h) * v + mu * (a1 * J1 - a2 * J2),
        w=a1 * a2 * u * v / h**2 + (a2 - a1) * u * w / h - mu * (a1**2 * J1 + a2**2 * J2) / h,
        J1=0.0,
        J2=0.0,
        tau=mu,
    )


def slow_field(state: FastState, profile: ChannelProfile, species: IonSpecies, mu: float) -> FastState:
    """Mesmo sistema na variável lenta x = mu xi (tau' = 1)."""
    if not mu > 0:
        raise BadParameters("O campo lento exige mu > 0")
    rate = fast_field(state, profile, species, mu).as_array() / mu
    return FastState.from_array(rate)


def integral_values(phi, u, v, w, h, a1, a2):
    """H1, H2, H3 sobre escalares ou arrays; usado também nas tabelas de camada."""
    arg2 = a1 * v / h + w
    arg3 = a2 * v / h - w
    if np.any(np.abs(arg2) < np.finfo(float).tiny) or np.any(np.abs(arg3) < np.finfo(float).tiny):
        raise LogSingularity("Argumento de logaritmo nulo em H2/H3")
    H1 = w - (a2 - a1) * v / h - a1 * a2 * u**2 / (2.0 * h**2)
    H2 = phi - np.log(np.abs(arg2)) / a2
    H3 = phi + np.log(np.abs(arg3)) / a1
    return H1, H2, H3


def integrals(state: FastState, profile: ChannelProfile, species: IonSpecies) -> IntegralVector:
    h, _ = _area(profile, state.tau)
    H1, H2, H3 = integral_values(state.phi, state.u, state.v, state.w, h, species.alpha1, species.alpha2)
    return IntegralVector(float(H1), float(H2), float(H3), state.J1, state.J2, state.tau)


def fast_linearization(equilibrium: FastState, species: IonSpecies, profile: ChannelProfile = None) -> np.ndarray:
    """Matriz 7x7 do campo limite linearizado em um ponto de Z0."""
    h = 1.0 if profile is None else _area(profile, equilibrium.tau)[0]
    a1, a2 = species.alpha1, species.alpha2
    L = np.zeros((7, 7))
    L[0, 1] = 1.0 / h
    L[1, 2] = 1.0
    L[2, 1] = equilibrium.w
    L[3, 1] = (a2 - a1) * equilibrium.w / h
    return L


def eigen_normal(equilibrium: FastState, species: IonSpecies, profile: ChannelProfile = None) -> EigenData:
    """Autovalores +-sqrt(w) e autovetores normais a Z0 (h = 1 sem perfil)."""
    if equilibrium.u != 0.0 or equilibrium.v != 0.0:
        raise BadParameters("O equilíbrio deve estar em Z0 (u = v = 0)")
    if not equilibrium.w > 0:
        raise NonHyperbolic(f"w deve ser positivo para hiperbolicidade (w = {equilibrium.w:g})")
    h = 1.0 if profile is None else _area(profile, equilibrium.tau)[0]
    root = math.sqrt(equilibrium.w)
    da = species.alpha2 - species.alpha1

    def vector(sign):
        lam = sign * root
        return np.array([1.0 / (h * lam), 1.0, lam, da * lam / h, 0.0, 0.0, 0.0])

    return EigenData(lambda_plus=root, lambda_minus=-root, n_plus=vector(1.0), n_minus=vector(-1.0))


def boundary_point(boundary: BoundaryData, profile: ChannelProfile, species: IonSpecies,
                   side: str, u_value: float, J1: float, J2: float) -> BoundaryManifoldPoint:
    a1, a2 = species.alpha1, species.alpha2
    c1, c2 = boundary.side(side)
    tau = 0.0 if side == "left" else 1.0
    phi = boundary.phi0 if side == "left" else 0.0
    h = profile.h(tau)
    state = FastState(
        phi=phi,
        u=u_value,
        v=-h * (a1 * c1 - a2 * c2),
        w=a1**2 * c1 + a2**2 * c2,
        J1=J1,
        J2=J2,
        tau=tau,
    )
    return BoundaryManifoldPoint(side=side, state=state)


def _excess(x):
    """e^x - 1 - x sem cancelamento perto de zero."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-2
    series = x**2 / 2 + x**3 / 6 + x**4 / 24 + x**5 / 120 + x**6 / 720
    return np.where(small, series, np.expm1(x) - x)


class _LevelSetBranch:
    """Ramo estável/instável do conjunto de nível que contém o equilíbrio.

    Parametriza (u, v, w) pela distância de potencial psi = phi - phi*; as
    integrais H2 e H3 viram relações de Boltzmann e H1 fixa |u|.
    """

    def __init__(self, w_star: float, h: float, species: IonSpecies, sigma: float):
        a1, a2 = species.alpha1, species.alpha2
        self.a1, self.a2 = a1, a2
        self.h = h
        self.w_star = w_star
        self.k = w_star / (a1 + a2)
        self.sigma = sigma

    def project(self, psi: float):
        a1, a2, k, h = self.a1, self.a2, self.k, self.h
        e1 = math.expm1(-a1 * psi)
        e2 = math.expm1(a2 * psi)
        potential = (k / a1) * float(_excess(-a1 * psi)) + (k / a2) * float(_excess(a2 * psi))
        u = -self.sigma * math.copysign(1.0, psi) * h * math.sqrt(2.0 * max(potential, 0.0))
        if psi == 0.0:
            u = 0.0
        v = -h * k * (e1 - e2)
        dw = k * (a1 * e1 + a2 * e2)
        return u, v, dw


def integrate_layer(problem: SteadyProblem, side: str, xi_max: float = None, tol: float = 1e-10,
                    xi_span: float = 40.0, samples_per_segment: int = 8) -> LayerOrbit:
    """Integra a órbita de camada do lado dado até pousar em Z0.

    A camada esquerda é integrada para frente em xi, a direita para trás
    (campo com o tempo invertido). Cada trecho curto de Runge–Kutta termina
    com a projeção no ramo correto do conjunto de nível; o desvio das
    integrais antes da projeção fica registrado em ``drift``.
    """
    from services.steady_asymptotics import boundary_layer_endpoint, limiting_fluxes

    if side not in ("left", "right"):
        raise BadParameters(f"Lado inválido: '{side}'")
    species, profile = problem.species, problem.profile
    a1, a2 = species.alpha1, species.alpha2
    endpoint = boundary_layer_endpoint(problem, side)
    fluxes = limiting_fluxes(problem)
    start = boundary_point(problem.boundary, profile, species, side,
                           endpoint.u_amplitude, fluxes.J1, fluxes.J2).state
    w_star, phi_star = endpoint.w_limit, endpoint.phi_limit
    landing = FastState(phi_star, 0.0, 0.0, w_star, fluxes.J1, fluxes.J2, start.tau)
    root = math.sqrt(w_star)
    if xi_max is None:
        xi_max = xi_span / root
    if not xi_max > 0:
        raise BadParameters("xi_max deve ser positivo")
    direction = 1.0 if side == "left" else -1.0
    h = profile.h(start.tau)

    if not endpoint.has_layer:
        states = np.vstack([start.as_array(), start.as_array()])
        return LayerOrbit(side, np.array([0.0, direction * xi_max]), states, start, landing, np.zeros(3), h)

    branch = _LevelSetBranch(w_star, h, species, direction)
    H0 = np.array(integral_values(start.phi, start.u, start.v, start.w, h, a1, a2))

    def rhs(s, y):
        psi, u, v, dw = y
        w = w_star + dw
        return direction * np.array([
            u / h,
            v,
            u * w,
            a1 * a2 * u * v / h**2 + (a2 - a1) * u * w / h,
        ])

    y = np.array([start.phi - phi_star, start.u, start.v, start.w - w_star])
    psi_sign = math.copysign(1.0, y[0])
    amplitude0 = math.hypot(y[1], y[2])
    ds = 0.25 / root
    s = 0.0
    xs, rows = [0.0], [y.copy()]
    drift = np.zeros(3)

    while s < xi_max:
        s_end = min(s + ds, xi_max)
        t_eval = np.linspace(s, s_end, samples_per_segment + 1)[1:]
        sol = integrate.solve_ivp(rhs, (s, s_end), y, method="RK45", rtol=tol, atol=tol * 1e-20, t_eval=t_eval)
        if not sol.success:
            raise DivergentOrbit(f"Integração da camada '{side}' falhou em xi={s:g}: {sol.message}")
        raw = sol.y
        if np.max(np.hypot(raw[1], raw[2])) > 10.0 * amplitude0:
            raise DivergentOrbit(
                f"||(u, v)|| cresceu mais de 10x na camada '{side}' (xi={s_end:g}); "
                "verifique o sinal de u na fronteira"
            )
        H = np.array(integral_values(phi_star + raw[0], raw[1], raw[2], w_star + raw[3], h, a1, a2))
        drift = np.maximum(drift, np.max(np.abs(H - H0[:, None]), axis=1))

        psi = raw[0, -1]
        if psi * psi_sign < 0:
            psi = 0.0
        y = np.array([psi, *branch.project(psi)])
        xs.extend(t_eval[:-1])
        rows.extend(raw[:, :-1].T)
        xs.append(s_end)
        rows.append(y.copy())
        s = s_end

    dev = np.array(rows)
    n = dev.shape[0]
    states = np.column_stack([
        phi_star + dev[:, 0], dev[:, 1], dev[:, 2], w_star + dev[:, 3],
        np.full(n, fluxes.J1), np.full(n, fluxes.J2), np.full(n, start.tau),
    ])
    states[0] = start.as_array()
    terminal = FastState.from_array(states[-1])
    logger.debug(
        f"Camada '{side}': {n} amostras até |xi|={xi_max:.3g}, deriva das integrais {drift.max():.2e}"
    )
    return LayerOrbit(side, direction * np.array(xs), states, terminal, landing, drift, h)


def tail_decay_rate(orbit: LayerOrbit) -> float:
    """Inclinação de ln||(u, v)|| contra |xi| na segunda metade da órbita."""
    d = np.abs(orbit.xi)
    amplitude = np.hypot(orbit.states[:, 1], orbit.states[:, 2])
    mask = (d >= 0.5 * d.max()) & (amplitude > 0)
    if np.count_nonzero(mask) < 2:
        return 0.0
    slope, _ = np.polyfit(d[mask], np.log(amplitude[mask]), 1)
    return float(slope)


def manifold_membership(state: FastState, equilibrium: FastState, profile: ChannelProfile,
                        species: IonSpecies, tol: float = 1e-6) -> bool:
    """Pertence a W^s ou W^u do equilíbrio: mesmas integrais, J e tau."""
    if equilibrium.u != 0.0 or equilibrium.v != 0.0:
        raise BadParameters("O equilíbrio deve estar em Z0 (u = v = 0)")
    if not equilibrium.w > 0:
        raise NonHyperbolic(f"w* deve ser positivo (w* = {equilibrium.w:g})")
    try:
        H = integrals(state, profile, species)
    except LogSingularity:
        return False
    a1, a2 = species.alpha1, species.alpha2
    w_star, phi_star = equilibrium.w, equilibrium.phi
    expected = (
        w_star,
        phi_star - math.log(w_star) / a2,
        phi_star + math.log(w_star) / a1,
        equilibrium.J1,
        equilibrium.J2,
        equilibrium.tau,
    )
    return bool(np.all(np.abs(H.as_array() - np.array(expected)) <= tol))
