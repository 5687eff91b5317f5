# app/services/model_service.py
# Hamiltoniano qubit–oscilador na base nua truncada e diagonalização exata (oráculo).

import math
from typing import List, Optional, Tuple

import numpy as np
import scipy.linalg

from app.core.config import get_settings
from app.core.errors import DomainError, EigensolverError, TruncationError
from app.core.logs import log
from app.models import FockTruncation, LevelSet, MethodTag, ModelParams, Spin, montar_levelset


# --- Base nua: índice 2n + (0 para ↓, 1 para ↑) ---

def basis_index(spin: Spin, n: int) -> int:
    return 2 * n + (1 if spin is Spin.UP else 0)


def sigma_z_diagonal(n_max: int) -> np.ndarray:
    """Diagonal de σ_z ⊗ 1 na base nua intercalada."""
    return np.tile(np.array([-1.0, 1.0]), n_max)


def photon_number_diagonal(n_max: int) -> np.ndarray:
    return np.repeat(np.arange(n_max, dtype=float), 2)


def build_hamiltonian(params: ModelParams, trunc: FockTruncation) -> np.ndarray:
    """
    H = −½(εσ_z + Δσ_x) + gσ_z(b† + b) + Ωb†b, sem energia de ponto zero.
    Os elementos fora da diagonal são gravados nas duas posições a partir
    do mesmo valor, então H é simétrica bit a bit.
    """
    n_max = trunc.n_max
    dim = trunc.dimensao
    n = np.arange(n_max, dtype=float)
    H = np.zeros((dim, dim))

    idx_down = 2 * np.arange(n_max)
    idx_up = idx_down + 1
    H[idx_down, idx_down] = params.eps / 2.0 + n * params.omega
    H[idx_up, idx_up] = -params.eps / 2.0 + n * params.omega

    # tunelamento entre |↓,n⟩ e |↑,n⟩
    H[idx_down, idx_up] = -params.delta / 2.0
    H[idx_up, idx_down] = -params.delta / 2.0

    # acoplamento g σ_z (b + b†): ⟨s,n+1|H|s,n⟩ = σ(s) g sqrt(n+1)
    acoplamento = params.g * np.sqrt(n[1:])
    for idx, sinal in ((idx_down, -1.0), (idx_up, 1.0)):
        H[idx[1:], idx[:-1]] = sinal * acoplamento
        H[idx[:-1], idx[1:]] = sinal * acoplamento
    return H


# --- Solução exata ---

def _desempatar(valores: np.ndarray, vetores: np.ndarray, escala: float) -> Tuple[np.ndarray, np.ndarray]:
    """Dentro de grupos quase degenerados, ordena por ⟨n⟩ crescente."""
    n_medio = photon_number_diagonal(vetores.shape[0] // 2) @ (vetores ** 2)
    tol = 1e-10 * escala
    ordem: List[int] = []
    inicio = 0
    while inicio < valores.size:
        fim = inicio + 1
        while fim < valores.size and valores[fim] - valores[fim - 1] <= tol:
            fim += 1
        grupo = list(range(inicio, fim))
        grupo.sort(key=lambda i: (round(n_medio[i], 9), i))
        ordem.extend(grupo)
        inicio = fim
    ordem_arr = np.array(ordem, dtype=int)
    return valores[ordem_arr], vetores[:, ordem_arr]


def exact_eigs(H: np.ndarray, k: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Os k menores autopares de H simétrica densa.

    Usa scipy.linalg.eigh (driver 'evr'); se o LAPACK não convergir tenta o
    driver 'ev' antes de desistir com EigensolverError.
    """
    dim = H.shape[0]
    if H.shape != (dim, dim):
        raise DomainError("A matriz precisa ser quadrada.")
    escala = max(1.0, float(np.max(np.abs(H))) if H.size else 1.0)
    if np.max(np.abs(H - H.T), initial=0.0) > 1e-12 * escala:
        raise DomainError("A matriz não é simétrica dentro de 1e−12 relativo.")
    k = dim if k is None else min(int(k), dim)
    if k < 1:
        raise DomainError("k precisa ser >= 1.")

    tentativas = 0
    for driver in ("evr", "ev"):
        tentativas += 1
        try:
            if driver == "evr" and k < dim:
                valores, vetores = scipy.linalg.eigh(H, subset_by_index=[0, k - 1], driver="evr")
            else:
                valores, vetores = scipy.linalg.eigh(H, driver=driver)
            break
        except (np.linalg.LinAlgError, ValueError) as e:
            log("ModelService", f"Diagonalização falhou com driver '{driver}': {e}", "WARNING")
    else:
        raise EigensolverError(
            f"Diagonalização de matriz {dim}x{dim} não convergiu após {tentativas} tentativas.",
            dimensao=dim,
            tentativas=tentativas,
        )

    valores, vetores = _desempatar(valores, vetores, escala)
    return valores[:k], vetores[:, :k]


def exact_levels(params: ModelParams, k: int, n_max: int) -> LevelSet:
    valores, _ = exact_eigs(build_hamiltonian(params, FockTruncation(n_max=n_max)), k)
    pares = [(e, f"exact({i})") for i, e in enumerate(valores)]
    return montar_levelset(MethodTag.EXACT, pares, n_max=n_max)


def initial_n_max(params: ModelParams, k: int) -> int:
    x = params.g / params.omega
    return max(40, math.ceil(8 * x * x + 4 * x + k))


def converged_spectrum(params: ModelParams, k: int, tol: float = 1e-8,
                       n_max_cap: Optional[int] = None) -> LevelSet:
    """
    Oráculo: dobra n_max a partir da heurística até que os k níveis mudem
    menos que tol·Ω entre n_max e 2·n_max. Devolve os níveis em 2·n_max
    (o n_max registrado no LevelSet).
    """
    if tol <= 0:
        raise DomainError("tol precisa ser positivo.")
    cap = n_max_cap or get_settings().nmax_cap
    n_max = initial_n_max(params, k)
    anterior = exact_levels(params, k, n_max).energies()
    while True:
        dobro = 2 * n_max
        if dobro > cap:
            raise TruncationError(
                f"Espectro não convergiu até n_max={cap} (tol={tol}).", n_max=n_max
            )
        atual_set = exact_levels(params, k, dobro)
        deslocamento = float(np.max(np.abs(atual_set.energies() - anterior)))
        if deslocamento < tol * params.omega:
            log("ModelService", f"Convergência em n_max={dobro} (desvio {deslocamento:.2e})", "DEBUG")
            return atual_set
        log("ModelService", f"n_max={n_max} -> {dobro}: desvio {deslocamento:.2e} ainda acima de {tol}", "DEBUG")
        anterior = atual_set.energies()
        n_max = dobro


def converged_eigensystem(params: ModelParams, k: int, tol: float = 1e-8) -> Tuple[np.ndarray, np.ndarray, int]:
    """Espectro completo e autovetores no n_max convergido (usado pela dinâmica)."""
    n_max = converged_spectrum(params, k, tol).n_max
    valores, vetores = exact_eigs(build_hamiltonian(params, FockTruncation(n_max=n_max)))
    return valores, vetores, n_max
