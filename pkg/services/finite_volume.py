# File: services/finite_volume.py
"""Discretização por volumes finitos do sistema PNP unidimensional.

Fluxos de Nernst–Planck com ajuste exponencial (Scharfetter–Gummel) nas
células, Poisson com coeficientes de face dados pela média harmônica exata
de h na célula e volumes duais int h. O mesmo sistema serve ao problema
estacionário e ao passo implícito de Euler (com o termo de massa).
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from services.geometry import ChannelProfile, cell_integrals
from services.problem import BoundaryData, IonSpecies
from utils.errors import NonConvergence, SingularSystem

logger = logging.getLogger(__name__)


def bernoulli(x):
    """B(x) = x/(e^x - 1), com B(0) = 1."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-5
    safe = np.where(small, 1.0, x)
    with np.errstate(over="ignore"):
        value = safe / np.expm1(safe)
    series = 1.0 - x / 2.0 + x**2 / 12.0
    return np.where(small, series, value)


def bernoulli_dot(x):
    """B'(x) = B(x)(1 - B(-x))/x, com B'(0) = -1/2."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-5
    safe = np.where(small, 1.0, x)
    value = bernoulli(safe) * (1.0 - bernoulli(-safe)) / safe
    series = -0.5 + x / 6.0
    return np.where(small, series, value)


@dataclass(frozen=True, eq=False)
class CellGeometry:
    """Resistências int h^-1 por célula e volumes duais int h por nó interior."""

    nodes: np.ndarray
    resistance: np.ndarray
    dual_volume: np.ndarray

    @classmethod
    def build(cls, nodes: np.ndarray, profile: ChannelProfile) -> "CellGeometry":
        nodes = np.asarray(nodes, dtype=float)
        resistance, _ = cell_integrals(profile, nodes)
        midpoints = 0.5 * (nodes[:-1] + nodes[1:])
        halves = np.empty(2 * nodes.size - 1)
        halves[0::2] = nodes
        halves[1::2] = midpoints
        _, half_volume = cell_integrals(profile, halves)
        dual = half_volume[1:-1:2] + half_volume[2::2]
        return cls(nodes=nodes, resistance=resistance, dual_volume=dual)


def sg_flux(c, phi, valence: float, resistance: np.ndarray):
    """Fluxo de célula J = (B(eta) c_l - B(-eta) c_r)/R, eta = z (phi_r - phi_l)."""
    eta = valence * np.diff(phi)
    return (bernoulli(eta) * c[:-1] - bernoulli(-eta) * c[1:]) / resistance


@dataclass
class MassTerm:
    """Termo Q_i (c - c_prev)/(D dt) do passo implícito."""

    coef1: np.ndarray
    coef2: np.ndarray
    c1_prev: np.ndarray
    c2_prev: np.ndarray


class PnpSystem:
    """Resíduo e jacobiano do sistema discreto nos nós interiores.

    Incógnitas intercaladas por nó: (phi_i, c1_i, c2_i), i = 1..N-1; os nós
    de fronteira ficam presos aos dados de Dirichlet.
    """

    def __init__(self, geometry: CellGeometry, species: IonSpecies, boundary: BoundaryData,
                 mu: float, mass: MassTerm = None):
        self.geometry = geometry
        self.species = species
        self.boundary = boundary
        self.mu2 = mu * mu
        self.mass = mass
        self.n_cells = geometry.resistance.size
        self.n_inner = self.n_cells - 1
        self.valences = (species.alpha1, -species.alpha2)

    # --- empacotamento ---

    def pack(self, phi, c1, c2) -> np.ndarray:
        x = np.empty(3 * self.n_inner)
        x[0::3] = phi[1:-1]
        x[1::3] = c1[1:-1]
        x[2::3] = c2[1:-1]
        return x

    def expand(self, x: np.ndarray):
        bd = self.boundary
        phi = np.concatenate(([bd.phi0], x[0::3], [0.0]))
        c1 = np.concatenate(([bd.l1], x[1::3], [bd.r1]))
        c2 = np.concatenate(([bd.l2], x[2::3], [bd.r2]))
        return phi, c1, c2

    def concentration_mask(self) -> np.ndarray:
        mask = np.ones(3 * self.n_inner, dtype=bool)
        mask[0::3] = False
        return mask

    def fluxes(self, phi, c1, c2):
        R = self.geometry.resistance
        return sg_flux(c1, phi, self.valences[0], R), sg_flux(c2, phi, self.valences[1], R)

    # --- resíduo ---

    def residual(self, x: np.ndarray):
        """Resíduo F e a escala (soma dos módulos dos termos) de cada equação."""
        phi, c1, c2 = self.expand(x)
        R, Q = self.geometry.resistance, self.geometry.dual_volume
        a1, a2 = self.species.alpha1, self.species.alpha2

        field = np.diff(phi) / R
        charge = Q * (a1 * c1[1:-1] - a2 * c2[1:-1])
        F = np.empty_like(x)
        S = np.empty_like(x)
        F[0::3] = self.mu2 * (field[1:] - field[:-1]) + charge
        S[0::3] = self.mu2 * (np.abs(field[1:]) + np.abs(field[:-1])) + Q * (a1 * c1[1:-1] + a2 * c2[1:-1])

        for comp, (c, z) in enumerate(((c1, self.valences[0]), (c2, self.valences[1])), start=1):
            eta = z * np.diff(phi)
            forward = bernoulli(eta) * c[:-1] / R
            backward = bernoulli(-eta) * c[1:] / R
            J = forward - backward
            F[comp::3] = J[1:] - J[:-1]
            size = np.abs(forward) + np.abs(backward)
            S[comp::3] = size[1:] + size[:-1]
            if self.mass is not None:
                coef = self.mass.coef1 if comp == 1 else self.mass.coef2
                prev = self.mass.c1_prev if comp == 1 else self.mass.c2_prev
                F[comp::3] += coef * (c[1:-1] - prev)
                S[comp::3] += coef * (np.abs(c[1:-1]) + np.abs(prev))
        return F, S

    def scaled_norm(self, x: np.ndarray) -> float:
        F, S = self.residual(x)
        return float(np.max(np.abs(F) / (S + np.finfo(float).tiny))) if F.size else 0.0

    # --- jacobiano ---

    def jacobian(self, x: np.ndarray) -> sparse.csc_matrix:
        phi, c1, c2 = self.expand(x)
        R, Q = self.geometry.resistance, self.geometry.dual_volume
        a1, a2 = self.species.alpha1, self.species.alpha2
        N = self.n_cells
        rows, cols, vals = [], [], []

        def add(row_node, row_comp, col_node, col_comp, values):
            values = np.broadcast_to(values, row_node.shape)
            mask = (row_node >= 1) & (row_node <= N - 1) & (col_node >= 1) & (col_node <= N - 1)
            rows.append(3 * (row_node[mask] - 1) + row_comp)
            cols.append(3 * (col_node[mask] - 1) + col_comp)
            vals.append(values[mask])

        inner = np.arange(1, N)
        # Poisson
        add(inner, 0, inner, 0, -self.mu2 * (1.0 / R[1:] + 1.0 / R[:-1]))
        add(inner, 0, inner + 1, 0, self.mu2 / R[1:])
        add(inner, 0, inner - 1, 0, self.mu2 / R[:-1])
        add(inner, 0, inner, 1, a1 * Q)
        add(inner, 0, inner, 2, -a2 * Q)

        cells = np.arange(N)
        left, right = cells, cells + 1
        for comp, (c, z) in enumerate(((c1, self.valences[0]), (c2, self.valences[1])), start=1):
            eta = z * np.diff(phi)
            d_left = bernoulli(eta) / R
            d_right = -bernoulli(-eta) / R
            d_phi = z * (bernoulli_dot(eta) * c[:-1] + bernoulli_dot(-eta) * c[1:]) / R
            # a célula j entra com + na linha do nó j e com - na do nó j+1
            for row_node, sign in ((left, 1.0), (right, -1.0)):
                add(row_node, comp, left, comp, sign * d_left)
                add(row_node, comp, right, comp, sign * d_right)
                add(row_node, comp, right, 0, sign * d_phi)
                add(row_node, comp, left, 0, -sign * d_phi)
            if self.mass is not None:
                coef = self.mass.coef1 if comp == 1 else self.mass.coef2
                add(inner, comp, inner, comp, coef)

        size = 3 * self.n_inner
        return sparse.csc_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(size, size)
        )


def newton_solve(system: PnpSystem, x0: np.ndarray, tol: float = 1e-10, max_iter: int = 50,
                 min_damping: float = 2.0**-20, label: str = ""):
    """Newton amortecido com busca linear por decréscimo do resíduo escalado.

    Passos que tornam alguma concentração não positiva são cortados pela
    metade. Retorna (x, resíduo escalado, iterações).
    """
    x = x0.copy()
    positive = system.concentration_mask()
    residual = system.scaled_norm(x)
    iterations = 0
    polished = False
    while True:
        if residual <= tol:
            if polished:
                break
            polished = True
        if iterations >= max_iter:
            if residual <= tol:
                break
            raise NonConvergence(
                f"Newton{label} não convergiu em {max_iter} iterações (resíduo {residual:.3e}); "
                "tente uma continuação em mu mais fina",
                last_residual=residual,
            )
        F, S = system.residual(x)
        weight = 1.0 / (S + np.finfo(float).tiny)
        merit = np.linalg.norm(F * weight)
        delta = spsolve(system.jacobian(x), -F)
        if not np.all(np.isfinite(delta)):
            raise SingularSystem(f"Jacobiano singular na iteração {iterations}{label}")

        theta = 1.0
        accepted = False
        while theta >= min_damping:
            trial = x + theta * delta
            if np.all(trial[positive] > 0):
                F_trial, _ = system.residual(trial)
                trial_merit = np.linalg.norm(F_trial * weight)
                if trial_merit <= (1.0 - 1e-4 * theta) * merit or (polished and trial_merit <= merit):
                    accepted = True
                    break
            theta *= 0.5
        iterations += 1
        if not accepted:
            if polished:
                break
            raise NonConvergence(
                f"Busca linear falhou{label}: passo abaixo de {min_damping:.1e} (resíduo {residual:.3e})",
                last_residual=residual,
            )
        x = trial
        residual = system.scaled_norm(x)
        logger.debug(f"Newton{label} it={iterations} theta={theta:.3g} resíduo={residual:.3e}")
    return x, residual, iterations
