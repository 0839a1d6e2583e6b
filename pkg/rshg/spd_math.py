"""Funções de matriz para SPD via decomposição espectral simétrica.

Todas recebem matrizes simétricas (d x d) e devolvem matrizes simétricas.
Para d <= 50 a decomposição densa é barata e mais precisa que séries.
"""
from typing import Callable, Tuple

import numpy as np
from scipy import linalg

from .errors import ContractViolation


def eigh_sym(C: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Autovalores crescentes e autovetores da parte simétrica de C (scipy)."""
    if not isinstance(C, np.ndarray) or C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise ContractViolation("esperada matriz quadrada 2D")
    if not np.all(np.isfinite(C)):
        raise ContractViolation("matriz com NaN/Inf")
    return linalg.eigh(0.5 * (C + C.T))


def matrix_operator(C: np.ndarray, operator: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    eigvals, eigvecs = eigh_sym(C)
    out = (eigvecs * operator(eigvals)) @ eigvecs.T
    return 0.5 * (out + out.T)


def expm(C: np.ndarray) -> np.ndarray:
    return matrix_operator(C, np.exp)


def logm(C: np.ndarray) -> np.ndarray:
    return matrix_operator(C, np.log)


def sqrtm(C: np.ndarray) -> np.ndarray:
    return matrix_operator(C, np.sqrt)


def invsqrtm(C: np.ndarray) -> np.ndarray:
    return matrix_operator(C, lambda x: 1.0 / np.sqrt(x))


def sqrt_and_invsqrt(C: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """X^{1/2} e X^{-1/2} com uma única decomposição."""
    eigvals, eigvecs = eigh_sym(C)
    s = np.sqrt(eigvals)
    half = (eigvecs * s) @ eigvecs.T
    ihalf = (eigvecs / s) @ eigvecs.T
    return 0.5 * (half + half.T), 0.5 * (ihalf + ihalf.T)


def min_eigenvalue(C: np.ndarray) -> float:
    return float(linalg.eigvalsh(0.5 * (C + C.T), subset_by_index=[0, 0])[0])


def is_spd(C: np.ndarray, sym_tol: float = 1e-12) -> bool:
    C = np.asarray(C, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1] or not np.all(np.isfinite(C)):
        return False
    if np.max(np.abs(C - C.T), initial=0.0) > sym_tol * max(1.0, float(np.max(np.abs(C)))):
        return False
    return min_eigenvalue(C) > 0.0
