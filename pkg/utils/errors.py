# File: utils/errors.py
"""Hierarquia de exceções do projeto.

Toda falha esperada herda de ``PnpError`` e carrega o código de saída que a
CLI devolve ao sistema: 2 para validação, 3 para falhas numéricas, 4 para E/S.
"""


class PnpError(Exception):
    """Erro base; ``exit_code`` é usado pelo despachante de comandos."""

    exit_code = 1


# --- Validação (código 2) ---

class ValidationError(PnpError):
    exit_code = 2


class ParseError(ValidationError):
    """JSON malformado; a mensagem traz linha/coluna ou a chave problemática."""


class InvalidProfile(ValidationError):
    pass


class InvalidProblem(ValidationError):
    pass


class BadParameters(ValidationError):
    pass


class OutOfDomain(ValidationError):
    pass


# --- Numérico (código 3) ---

class NumericalError(PnpError):
    exit_code = 3


class QuadratureFailure(NumericalError):
    pass


class DegenerateGeometry(NumericalError):
    pass


class RootFindFailure(NumericalError):
    pass


class NonpositiveW(NumericalError):
    pass


class MatchingFailure(NumericalError):
    pass


class LogSingularity(NumericalError):
    pass


class NonHyperbolic(NumericalError):
    pass


class DivergentOrbit(NumericalError):
    pass


class NonConvergence(NumericalError):
    def __init__(self, message: str, last_residual: float = float("nan")):
        super().__init__(message)
        self.last_residual = last_residual


class NotConverged(NumericalError):
    pass


class SingularSystem(NumericalError):
    pass


class StepRejected(NumericalError):
    pass


class StagnantStep(NumericalError):
    pass


class NonpositiveConcentration(NumericalError):
    pass


# --- Saída (código 4) ---

class OutputError(PnpError):
    exit_code = 4
