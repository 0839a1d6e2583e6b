"""Hierarquia de erros do pacote.

Toda falha prevista herda de `RshgError`, assim a CLI consegue traduzir cada
tipo para um código de saída sem capturar `Exception` genérica.
"""
from typing import Any, Optional, Tuple


class RshgError(Exception):
    pass


class ContractViolation(RshgError, ValueError):
    """Pré-condição de operação violada (âncoras diferentes, lote vazio, ...)."""


class DomainError(RshgError, ValueError):
    """Entrada fora do domínio da operação (ex.: pontos antípodas na esfera)."""


class NeighbourhoodError(RshgError, ValueError):
    """Ponto fora da vizinhança retrativa."""


class DegenerateStepError(RshgError, ArithmeticError):
    """Passo que tiraria o iterado da variedade (ex.: SPD perde definição positiva)."""

    def __init__(self, message: str, context: Optional[Tuple[int, int]] = None, trace: Any = None):
        super().__init__(message)
        self.context = context
        self.trace = trace


class SizeError(RshgError, ValueError):
    """Enumeração exata grande demais."""


class InsufficientDataError(RshgError):
    pass


class NumericalAbort(RshgError, ArithmeticError):
    """NaN/Inf em algum gradiente. Carrega o traço parcial para ser gravado."""

    def __init__(self, message: str, context: Tuple[int, int], trace: Any = None):
        super().__init__(message)
        self.context = context
        self.trace = trace


class ConfigError(RshgError, ValueError):
    def __init__(self, message: str, field: Optional[str] = None):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field
