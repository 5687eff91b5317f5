# app/services/closedform_service.py
# Espectros de comparação em forma fechada: Jaynes–Cummings, adiabático e GRWA.

import math
from typing import Optional, Tuple

import numpy as np

from app.core.errors import UnsupportedRegimeError
from app.models import LevelSet, MethodTag, ModelParams, montar_levelset
from app.services import specfun
from app.services import vvp_service


def _exigir_sem_vies(params: ModelParams, metodo: str) -> None:
    if params.eps != 0.0:
        raise UnsupportedRegimeError(f"{metodo} só está definido para ε = 0 (recebido ε={params.eps}).")


# --- Jaynes–Cummings ---

def jcm_levels(params: ModelParams, k: int) -> LevelSet:
    """
    E₀ = −Δ/2 e pares (j+½)Ω ∓ ½ sqrt((Δ−Ω)² + 4(j+1)g²), ordenados e truncados em k.
    """
    _exigir_sem_vies(params, "JCM")
    pares = [(-params.delta / 2.0, "jcm(ground)")]
    for j in range(k):
        centro = (j + 0.5) * params.omega
        meio = 0.5 * math.sqrt((params.delta - params.omega) ** 2 + 4.0 * (j + 1) * params.g ** 2)
        pares.append((centro - meio, f"jcm(-,{j})"))
        pares.append((centro + meio, f"jcm(+,{j})"))
    ordenados = sorted(pares, key=lambda p: p[0])[:k]
    # rótulos finais seguem o índice ordenado, como os do oráculo
    return montar_levelset(MethodTag.JCM, [(e, f"jcm({i})") for i, (e, _) in enumerate(ordenados)])


def jcm_eigensystem(params: ModelParams, n_max: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Autoestados de Jaynes–Cummings na base nua truncada (2·n_max estados).

    Na base do qubit |g⟩ = (|↑⟩+|↓⟩)/√2 (−Δ/2) e |e⟩ = (|↑⟩−|↓⟩)/√2 (+Δ/2),
    σ_z vira σ_x e os blocos {|e,j⟩, |g,j+1⟩} acoplam por g·sqrt(j+1).
    O estado |e, n_max−1⟩ sem parceiro completa a base.
    """
    _exigir_sem_vies(params, "JCM")
    dim = 2 * n_max
    raiz = 1.0 / math.sqrt(2.0)

    def ket(qubit: str, n: int) -> np.ndarray:
        v = np.zeros(dim)
        sinal = 1.0 if qubit == "g" else -1.0
        v[2 * n + 1] = raiz
        v[2 * n] = sinal * raiz
        return v

    energias = [-params.delta / 2.0]
    colunas = [ket("g", 0)]
    for j in range(n_max - 1):
        bloco = np.array([
            [params.delta / 2.0 + j * params.omega, params.g * math.sqrt(j + 1)],
            [params.g * math.sqrt(j + 1), -params.delta / 2.0 + (j + 1) * params.omega],
        ])
        valores, vetores = np.linalg.eigh(bloco)
        e_j, g_j1 = ket("e", j), ket("g", j + 1)
        for i in range(2):
            energias.append(valores[i])
            colunas.append(vetores[0, i] * e_j + vetores[1, i] * g_j1)
    energias.append(params.delta / 2.0 + (n_max - 1) * params.omega)
    colunas.append(ket("e", n_max - 1))
    return np.array(energias), np.column_stack(colunas)


# --- Aproximação adiabática ---

def adiabatic_levels(params: ModelParams, l: Optional[int] = None, j_max: int = 8) -> LevelSet:
    """
    Dubletos com ε⁽²⁾ ≡ 0: E_{∓,j} = (j+l/2)Ω − g²/Ω ∓ ½ sqrt((ε−lΩ)² + (Δ_j^{j+l})²),
    mais os níveis sem parceiro em E⁰. Devolve os j_max menores níveis.
    """
    l = vvp_service.choose_l(params) if l is None else l
    return vvp_service.doublet_levels(params, j_max, l, False, MethodTag.ADIABATIC)


# --- GRWA ---

def grwa_levels(params: ModelParams, j_max: int) -> LevelSet:
    """
    Escada da GRWA em ε = 0: estado fundamental −g²/Ω − ½Δe^{−α/2} e pares
    (E_{+,j}, E_{−,j+1}) diagonalizados com o elemento Δ_j^{j+1}.
    Devolve o fundamental e os pares j = 0 … j_max−1, ordenados.
    """
    _exigir_sem_vies(params, "GRWA")
    a = params.alpha
    omega = params.omega
    amort = math.exp(-a / 2.0)
    deslocamento = -params.g ** 2 / omega
    pares = [(deslocamento - 0.5 * params.delta * amort, "grwa(ground)")]
    for j in range(j_max):
        lj = abs(specfun.laguerre(j, 0, a))
        lj1 = abs(specfun.laguerre(j + 1, 0, a))
        centro = (j + 0.5) * omega + deslocamento + 0.25 * params.delta * amort * (lj - lj1)
        diagonal = 0.5 * omega - 0.25 * params.delta * amort * (lj + lj1)
        cruzado = 0.25 * params.delta ** 2 * (a / (j + 1)) * math.exp(-a) * specfun.laguerre(j, 1, a) ** 2
        meio = math.sqrt(diagonal ** 2 + cruzado)
        pares.append((centro - meio, f"grwa(-,{j})"))
        pares.append((centro + meio, f"grwa(+,{j})"))
    return montar_levelset(MethodTag.GRWA, pares)
