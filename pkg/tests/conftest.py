# File: tests/conftest.py
import os
import sys

import pytest

# Adiciona a raiz do projeto ao sys.path para que 'services', 'utils' e 'cli' sejam encontrados
sys.path.append(os.path.join(os.path.dirname(__file__), ".."))

from services.geometry import ChannelProfile  # noqa: E402
from services.problem import BoundaryData, IonSpecies, SteadyProblem  # noqa: E402


@pytest.fixture
def unit_species():
    return IonSpecies(1.0, 1.0)


@pytest.fixture
def standard_problem(unit_species):
    """c = 1 + x, phi = 0 e J = -1 para qualquer mu."""
    return SteadyProblem(ChannelProfile.constant(1.0), unit_species, BoundaryData(0.0, 1.0, 1.0, 2.0, 2.0))


@pytest.fixture
def layered_problem(unit_species):
    """Camada à esquerda (l = (4, 1)), lado direito eletroneutro, s = 0."""
    return SteadyProblem(ChannelProfile.constant(1.0), unit_species, BoundaryData(1.0, 4.0, 1.0, 2.0, 2.0))


@pytest.fixture
def generic_problem():
    return SteadyProblem(
        ChannelProfile.bump(1.0, 0.5, 0.2, 0.4), IonSpecies(1.0, 2.0, 1.5, 0.7),
        BoundaryData(0.5, 3.0, 1.0, 1.0, 2.0),
    )


@pytest.fixture
def config_text():
    return """{
  "problem": {
    "geometry": {"kind": "constant", "value": 1.0},
    "species": {"alpha1": 1, "alpha2": 1},
    "boundary": {"phi0": 1.0, "l1": 4.0, "l2": 1.0, "r1": 2.0, "r2": 2.0},
    "mu": 0.05
  },
  "solver": {"N": 201},
  "transient": {"T": 0.02, "N": 40, "dt0": 0.001},
  "seed": 7
}"""
