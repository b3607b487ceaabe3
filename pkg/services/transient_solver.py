# File: services/transient_solver.py
"""Evolução temporal do sistema PNP unidimensional limite.

h dc_j/dt = -D_j dJ_j/dx com Poisson acoplado, discretizado por Euler
implícito sobre os mesmos volumes finitos do solver estacionário. Durante a
execução acompanham-se a região invariante 0 <= alpha_i c_i <= M e, quando
as cargas de contorno coincidem, o funcional de Lyapunov.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid
from scipy.linalg import LinAlgError, solve_banded

from services.bvp_solver import Mesh
from services.finite_volume import CellGeometry, MassTerm, PnpSystem, bernoulli, newton_solve
from services.geometry import ChannelProfile, inverse_area_integral
from services.problem import BoundaryData, IonSpecies, SteadyProblem
from utils.errors import (
    BadParameters,
    InvalidProblem,
    NonConvergence,
    NonpositiveConcentration,
    SingularSystem,
    StagnantStep,
    StepRejected,
)

logger = logging.getLogger(__name__)

COUPLINGS = ("newton", "gummel")
_REGION_TOL = 1e-10
# Piso relativo (fração de M/alpha) para concentrações iniciais nulas
_INITIAL_FLOOR = 1e-8


@dataclass(frozen=True, eq=False)
class TransientState:
    t: float
    mesh: Mesh
    c1: np.ndarray
    c2: np.ndarray
    phi: np.ndarray


@dataclass(frozen=True)
class TransientOptions:
    dt0: float = 1e-4
    dt_max: float = 1e-2
    growth: float = 1.2
    dt_min: float = 1e-12
    coupling: str = "newton"
    gummel_iterations: int = 2
    newton_tol: float = 1e-12
    max_newton: int = 30
    record_every: int = 1
    concentration_floor: float = 1e-14

    def __post_init__(self):
        if not 0 <= self.concentration_floor < 1:
            raise BadParameters("concentration_floor deve estar em [0, 1)")
        if self.coupling not in COUPLINGS:
            raise BadParameters(f"Acoplamento desconhecido: '{self.coupling}'")
        for name in ("dt0", "dt_max", "dt_min", "newton_tol"):
            if not getattr(self, name) > 0:
                raise BadParameters(f"{name} deve ser positivo")
        if self.growth < 1:
            raise BadParameters("growth deve ser >= 1")
        if self.gummel_iterations < 1 or self.max_newton < 1 or self.record_every < 1:
            raise BadParameters("Contagens de iteração/registro devem ser >= 1")


@dataclass
class InvariantRegionMonitor:
    M: float
    min_charge: float = math.inf
    max_charge: float = -math.inf
    tol: float = _REGION_TOL

    def update(self, state: TransientState, species: IonSpecies):
        charges = np.concatenate((species.alpha1 * state.c1, species.alpha2 * state.c2))
        self.min_charge = min(self.min_charge, float(np.min(charges)))
        self.max_charge = max(self.max_charge, float(np.max(charges)))

    @property
    def violation(self) -> bool:
        return self.min_charge < -self.tol or self.max_charge > self.M + self.tol

    def summary(self) -> dict:
        return {
            "M": self.M,
            "min_charge": self.min_charge,
            "max_charge": self.max_charge,
            "tolerance": self.tol,
            "violation": self.violation,
        }


@dataclass
class LyapunovTrace:
    k: float
    c1_ref: float
    c2_ref: float
    phi_ref: np.ndarray
    times: list = field(default_factory=list)
    values: list = field(default_factory=list)

    def append(self, t: float, value: float):
        self.times.append(t)
        self.values.append(value)


@dataclass(eq=False)
class TransientRun:
    trajectory: list
    monitor: InvariantRegionMonitor
    lyapunov: LyapunovTrace
    final: TransientState
    accepted: int
    rejected: int


def invariant_region_bound(boundary: BoundaryData, species: IonSpecies) -> float:
    a1, a2 = species.alpha1, species.alpha2
    return max(a1 * boundary.l1, a1 * boundary.r1, a2 * boundary.l2, a2 * boundary.r2)


def _face_system(geometry: CellGeometry):
    """Diagonais da matriz de Poisson (h phi')' nos nós interiores."""
    inv = 1.0 / geometry.resistance
    main = -(inv[1:] + inv[:-1])
    return main, inv[1:-1]


def poisson_solve(c1, c2, mesh: Mesh, profile: ChannelProfile, species: IonSpecies,
                  lam: float, phi0: float, geometry: CellGeometry = None) -> np.ndarray:
    """Resolve (h phi')' = -lam h (alpha1 c1 - alpha2 c2), phi(0) = phi0, phi(1) = 0."""
    if not lam > 0:
        raise BadParameters("lambda deve ser positivo")
    geometry = geometry or CellGeometry.build(mesh.nodes, profile)
    inv = 1.0 / geometry.resistance
    main, off = _face_system(geometry)
    charge = geometry.dual_volume * (species.alpha1 * np.asarray(c1)[1:-1] - species.alpha2 * np.asarray(c2)[1:-1])
    rhs = -lam * charge
    rhs[0] -= inv[0] * phi0
    n = main.size
    banded = np.zeros((3, n))
    banded[0, 1:] = off
    banded[1] = main
    banded[2, :-1] = off
    try:
        inner = solve_banded((1, 1), banded, rhs)
    except (LinAlgError, ValueError) as e:
        raise SingularSystem(f"Sistema de Poisson singular: {e}") from e
    if not np.all(np.isfinite(inner)):
        raise SingularSystem("Sistema de Poisson produziu valores não finitos")
    return np.concatenate(([phi0], inner, [0.0]))


def _species_implicit_solve(c_prev, phi, valence, coef, geometry: CellGeometry, left, right):
    """Euler implícito de uma espécie com phi congelado (tridiagonal)."""
    R = geometry.resistance
    eta = valence * np.diff(phi)
    bf = bernoulli(eta) / R
    bb = bernoulli(-eta) / R
    n = c_prev.size - 2
    # linha i: coef_i (c_i - c_prev_i) + [bf_i c_i - bb_i c_{i+1}] - [bf_{i-1} c_{i-1} - bb_{i-1} c_i] = 0
    main = coef + bf[1:] + bb[:-1]
    upper = -bb[1:-1]
    lower = -bf[1:-1]
    rhs = coef * c_prev[1:-1]
    rhs[0] += bf[0] * left
    rhs[-1] += bb[-1] * right
    banded = np.zeros((3, n))
    banded[0, 1:] = upper
    banded[1] = main
    banded[2, :-1] = lower
    try:
        inner = solve_banded((1, 1), banded, rhs)
    except (LinAlgError, ValueError) as e:
        raise SingularSystem(f"Sistema de Nernst–Planck singular: {e}") from e
    return np.concatenate(([left], inner, [right]))


def step(state: TransientState, dt: float, problem: SteadyProblem, options: TransientOptions = None,
         geometry: CellGeometry = None) -> TransientState:
    """Um passo de Euler implícito.

    ``StepRejected`` se alguma concentração interior ficar abaixo de
    ``concentration_floor * M / alpha`` (ou <= 0 com piso nulo).
    """
    options = options or TransientOptions()
    if not dt > 0:
        raise BadParameters("dt deve ser positivo")
    sp, bd = problem.species, problem.boundary
    geometry = geometry or CellGeometry.build(state.mesh.nodes, problem.profile)
    lam = problem.lam
    coef1 = geometry.dual_volume / (sp.D1 * dt)
    coef2 = geometry.dual_volume / (sp.D2 * dt)

    if options.coupling == "newton":
        mass = MassTerm(coef1, coef2, state.c1[1:-1], state.c2[1:-1])
        system = PnpSystem(geometry, sp, bd, problem.mu, mass)
        try:
            x, _, _ = newton_solve(system, system.pack(state.phi, state.c1, state.c2),
                                   options.newton_tol, options.max_newton, label=f" (dt={dt:.2e})")
        except NonConvergence as e:
            raise StepRejected(f"Passo implícito não convergiu: {e}") from e
        phi, c1, c2 = system.expand(x)
    else:
        c1, c2 = state.c1, state.c2
        for _ in range(options.gummel_iterations):
            phi = poisson_solve(c1, c2, state.mesh, problem.profile, sp, lam, bd.phi0, geometry)
            c1 = _species_implicit_solve(state.c1, phi, sp.alpha1, coef1, geometry, bd.l1, bd.r1)
            c2 = _species_implicit_solve(state.c2, phi, -sp.alpha2, coef2, geometry, bd.l2, bd.r2)
        phi = poisson_solve(c1, c2, state.mesh, problem.profile, sp, lam, bd.phi0, geometry)

    if not (np.all(np.isfinite(c1)) and np.all(np.isfinite(c2))):
        raise StepRejected(f"Concentração não finita após passo dt={dt:.3e}")
    if np.any(c1 <= 0) or np.any(c2 <= 0):
        raise StepRejected(f"Concentração não positiva após passo dt={dt:.3e}")
    M = invariant_region_bound(bd, sp)
    floor1 = options.concentration_floor * M / sp.alpha1
    floor2 = options.concentration_floor * M / sp.alpha2
    if np.min(c1[1:-1]) < floor1 or np.min(c2[1:-1]) < floor2:
        raise StepRejected(f"Concentração abaixo do piso relativo {options.concentration_floor:g} "
                           f"após passo dt={dt:.3e}")
    return TransientState(t=state.t + dt, mesh=state.mesh, c1=c1, c2=c2, phi=phi)


def reference_state(problem: SteadyProblem, nodes: np.ndarray):
    """Estado estacionário de cargas iguais: c_j = k/alpha_j, phi = phi0 int_x^1 h^-1 / rho0."""
    k = problem.boundary.is_equal_k(problem.species)
    if k is None:
        return None
    I = inverse_area_integral(problem.profile, nodes)
    phi = problem.boundary.phi0 * (I[-1] - I) / I[-1]
    return k, k / problem.species.alpha1, k / problem.species.alpha2, phi


def lyapunov(state: TransientState, k: float, profile: ChannelProfile, species: IonSpecies) -> float:
    """L = sum_j (1/D_j) int h (c_j - c_j0) ln(c_j/c_j0), c_j0 = k/alpha_j."""
    if np.any(state.c1 <= 0) or np.any(state.c2 <= 0):
        raise NonpositiveConcentration("O funcional de Lyapunov exige concentrações positivas")
    x = state.mesh.nodes
    h = profile.h(x)
    total = 0.0
    for c, alpha, D in ((state.c1, species.alpha1, species.D1), (state.c2, species.alpha2, species.D2)):
        ref = k / alpha
        delta = c - ref
        integrand = h * delta * np.log1p(delta / ref)
        total += trapezoid(integrand, x) / D
    return float(total)


def lyapunov_decay_fit(trace: LyapunovTrace):
    """Inclinação e R^2 do ajuste linear de ln L(t) na segunda metade do traço."""
    t = np.asarray(trace.times)
    L = np.asarray(trace.values)
    mask = (t >= 0.5 * t[-1]) & (L > 0)
    if np.count_nonzero(mask) < 3:
        return math.nan, math.nan
    slope, intercept = np.polyfit(t[mask], np.log(L[mask]), 1)
    fitted = slope * t[mask] + intercept
    observed = np.log(L[mask])
    ss_res = np.sum((observed - fitted) ** 2)
    ss_tot = np.sum((observed - observed.mean()) ** 2)
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(r2)


def run_transient(problem: SteadyProblem, c1_init, c2_init, T: float, options: TransientOptions = None,
                  mesh: Mesh = None) -> TransientRun:
    """Integra até T com passo adaptativo (metade na rejeição, x growth no aceite)."""
    options = options or TransientOptions()
    sp, bd = problem.species, problem.boundary
    if not problem.mu > 0:
        raise InvalidProblem("A evolução temporal exige lambda finito (mu > 0)")
    if not T > 0:
        raise BadParameters("T deve ser positivo")
    c1 = np.array(c1_init, dtype=float)
    c2 = np.array(c2_init, dtype=float)
    if mesh is None:
        mesh = Mesh(np.linspace(0.0, 1.0, c1.size))
    if c1.size != mesh.nodes.size or c2.size != mesh.nodes.size:
        raise BadParameters("Dados iniciais e malha com tamanhos diferentes")
    c1[0], c1[-1], c2[0], c2[-1] = bd.l1, bd.r1, bd.l2, bd.r2

    M = invariant_region_bound(bd, sp)
    charges = np.concatenate((sp.alpha1 * c1, sp.alpha2 * c2))
    if np.min(charges) < -1e-12 or np.max(charges) > M * (1.0 + 1e-12):
        raise InvalidProblem("Dados iniciais fora da região invariante 0 <= alpha c <= M")
    lifted = 0
    for c, alpha in ((c1, sp.alpha1), (c2, sp.alpha2)):
        floor = _INITIAL_FLOOR * M / alpha
        lifted += int(np.count_nonzero(c < floor))
        np.maximum(c, floor, out=c)
    if lifted:
        logger.debug(f"{lifted} concentrações iniciais elevadas ao piso {_INITIAL_FLOOR:g} M/alpha")

    geometry = CellGeometry.build(mesh.nodes, problem.profile)
    phi = poisson_solve(c1, c2, mesh, problem.profile, sp, problem.lam, bd.phi0, geometry)
    state = TransientState(0.0, mesh, c1, c2, phi)

    monitor = InvariantRegionMonitor(M)
    monitor.update(state, sp)
    reference = reference_state(problem, mesh.nodes)
    trace = None
    if reference is not None:
        k, c1_ref, c2_ref, phi_ref = reference
        trace = LyapunovTrace(k, c1_ref, c2_ref, phi_ref)
        trace.append(0.0, lyapunov(state, k, problem.profile, sp))

    trajectory = [state]
    dt = options.dt0
    accepted = rejected = 0
    while state.t < T * (1.0 - 1e-12):
        dt_try = min(dt, T - state.t)
        try:
            new_state = step(state, dt_try, problem, options, geometry)
        except StepRejected as e:
            rejected += 1
            dt = dt_try / 2.0
            logger.debug(f"Passo rejeitado em t={state.t:.4g}: {e}")
            if dt < options.dt_min:
                raise StagnantStep(f"dt caiu abaixo de {options.dt_min:g} em t={state.t:.6g}") from e
            continue
        state = new_state
        accepted += 1
        monitor.update(state, sp)
        if trace is not None:
            trace.append(state.t, lyapunov(state, trace.k, problem.profile, sp))
        if accepted % options.record_every == 0:
            trajectory.append(state)
        dt = min(dt_try * options.growth, options.dt_max)

    if trajectory[-1] is not state:
        trajectory.append(state)
    if monitor.violation:
        logger.warning(f"Excursão fora da região invariante: {monitor.summary()}")
    logger.info(f"Evolução até T={T:g}: {accepted} passos aceitos, {rejected} rejeitados")
    return TransientRun(trajectory, monitor, trace, state, accepted, rejected)
