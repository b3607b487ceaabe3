# File: services/problem.py
"""Tipos compartilhados que descrevem um problema PNP estacionário."""
import math
from dataclasses import dataclass, replace

from services.geometry import ChannelProfile
from utils.errors import InvalidProblem


@dataclass(frozen=True)
class IonSpecies:
    """Cátion de valência alpha1 > 0 e ânion de valência -alpha2, com difusividades."""

    alpha1: float = 1.0
    alpha2: float = 1.0
    D1: float = 1.0
    D2: float = 1.0

    def __post_init__(self):
        for name in ("alpha1", "alpha2", "D1", "D2"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise InvalidProblem(f"{name} deve ser estritamente positivo (recebido {value})")


@dataclass(frozen=True)
class BoundaryData:
    """phi(0) = phi0, phi(1) = 0; concentrações l (esquerda) e r (direita)."""

    phi0: float
    l1: float
    l2: float
    r1: float
    r2: float

    def __post_init__(self):
        if not math.isfinite(self.phi0):
            raise InvalidProblem("phi0 deve ser finito")
        for name in ("l1", "l2", "r1", "r2"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise InvalidProblem(f"{name} deve ser estritamente positivo (recebido {value})")

    def side(self, side: str) -> tuple:
        """(c1, c2) do lado 'left' ou 'right'."""
        if side == "left":
            return self.l1, self.l2
        if side == "right":
            return self.r1, self.r2
        raise InvalidProblem(f"Lado inválido: '{side}'")

    def is_equal_k(self, species: IonSpecies, rtol: float = 1e-12):
        """k comum se alpha1 l1 = alpha2 l2 = alpha1 r1 = alpha2 r2, senão None."""
        charges = (
            species.alpha1 * self.l1, species.alpha2 * self.l2,
            species.alpha1 * self.r1, species.alpha2 * self.r2,
        )
        k = charges[0]
        if all(math.isclose(c, k, rel_tol=rtol, abs_tol=0.0) for c in charges):
            return k
        return None


@dataclass(frozen=True)
class SteadyProblem:
    profile: ChannelProfile
    species: IonSpecies
    boundary: BoundaryData
    mu: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.mu) and self.mu >= 0):
            raise InvalidProblem(f"mu deve ser >= 0 (recebido {self.mu})")

    @property
    def lam(self) -> float:
        """lambda = 1/mu^2 (infinito no limite singular)."""
        return math.inf if self.mu == 0 else 1.0 / self.mu**2

    def with_mu(self, mu: float) -> "SteadyProblem":
        return replace(self, mu=mu)
