# app/core/errors.py
# Hierarquia de exceções do RabiVV. Só a CLI converte em códigos de saída.

from typing import Optional


class RabiVVError(Exception):
    """Erro base de todos os serviços."""


class DomainError(RabiVVError, ValueError):
    """Argumento fora do domínio da operação."""


class UnsupportedRegimeError(RabiVVError, ValueError):
    """Combinação método/parâmetros que o método não cobre (ex.: GRWA com ε ≠ 0)."""


class DegenerateDenominatorError(RabiVVError, ArithmeticError):
    """Denominador ε ∓ kΩ (ou diferença de energias) nulo num termo retido."""

    def __init__(self, mensagem: str, indice: Optional[int] = None, denominador: float = 0.0):
        super().__init__(mensagem)
        self.indice = indice
        self.denominador = denominador


class TruncationError(RabiVVError, RuntimeError):
    """Truncamento de Fock insuficiente ou teto de n_max excedido."""

    def __init__(self, mensagem: str, n_max: Optional[int] = None, norma_cauda: Optional[float] = None):
        super().__init__(mensagem)
        self.n_max = n_max
        self.norma_cauda = norma_cauda


class SeriesConvergenceError(TruncationError):
    """Soma adaptativa atingiu o teto de termos sem convergir."""


class EigensolverError(RabiVVError, RuntimeError):
    """Falha da diagonalização densa, mesmo após o driver alternativo."""

    def __init__(self, mensagem: str, dimensao: int, tentativas: int):
        super().__init__(mensagem)
        self.dimensao = dimensao
        self.tentativas = tentativas


class NumericalOverflowError(RabiVVError, ArithmeticError):
    """Resultado fora do alcance de ponto flutuante (ex.: Ein(−α) com α ≳ 709)."""
