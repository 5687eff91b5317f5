# app/services/dynamics_service.py
# Dinâmica de ⟨σ_z(t)⟩ a partir de |↑⟩ ⊗ oscilador térmico, decomposição
# analítica em picos de Fourier e transformada amostrada amortecida.

import math
from typing import List, Optional, Tuple

import numpy as np
import scipy.linalg

from app.core.errors import DomainError, UnsupportedRegimeError
from app.core.logs import log
from app.models import DynamicsSpec, DynamicsTrace, FockTruncation, InitialStateSpec, MethodTag, ModelParams, Peak, PeakSpectrum
from app.services import closedform_service, model_service, vvp_service

TOL_FUSAO = 1e-9
NIVEIS_CONVERGENCIA = 24
ELEMENTOS_POR_BLOCO = 4_000_000


def thermal_weights(spec: InitialStateSpec, n_max: int) -> np.ndarray:
    """p_j ∝ e^{−ħβΩ·j}, renormalizados no truncamento."""
    if n_max < 1:
        raise DomainError("n_max precisa ser >= 1.")
    if math.isinf(spec.beta_hbar_omega):
        pesos = np.zeros(n_max)
        pesos[0] = 1.0
        return pesos
    j = np.arange(n_max, dtype=float)
    pesos = np.exp(-spec.beta_hbar_omega * j)
    return pesos / pesos.sum()


class Eigenbasis:
    """Energias, estados (colunas na base nua) e rótulos de um método."""

    def __init__(self, method: MethodTag, energias: np.ndarray, estados: np.ndarray,
                 rotulos: List[str], n_max: int, ortonormal: bool):
        self.method = method
        self.energias = energias
        self.estados = estados
        self.rotulos = rotulos
        self.n_max = n_max
        self.ortonormal = ortonormal


def dynamics_n_max(params: ModelParams) -> int:
    return model_service.converged_spectrum(params, NIVEIS_CONVERGENCIA).n_max


def eigenbasis(method: MethodTag, params: ModelParams, l: Optional[int] = None,
               n_max: Optional[int] = None) -> Eigenbasis:
    method = MethodTag(method)
    if method is MethodTag.GRWA:
        raise UnsupportedRegimeError("GRWA fornece apenas energias; dinâmica não suportada.")
    n_max = n_max or dynamics_n_max(params)

    if method is MethodTag.EXACT:
        H = model_service.build_hamiltonian(params, FockTruncation(n_max=n_max))
        energias, estados = model_service.exact_eigs(H)
        rotulos = [f"exact({i})" for i in range(energias.size)]
        return Eigenbasis(method, energias, estados, rotulos, n_max, True)

    if method is MethodTag.JCM:
        energias, estados = closedform_service.jcm_eigensystem(params, n_max)
        rotulos = [f"jcm({i})" for i in range(energias.size)]
        return Eigenbasis(method, energias, estados, rotulos, n_max, True)

    ordem = 2 if method is MethodTag.VVP else 0
    energias, estados, rotulos = vvp_service.vvp_eigensystem(params, n_max, l=l, order=ordem)
    return Eigenbasis(method, energias, estados, rotulos, n_max, False)


def transition_amplitudes(base: Eigenbasis, spec: InitialStateSpec) -> np.ndarray:
    """
    Matriz A com ⟨σ_z(t)⟩ = Σ_{a,c} A_ac cos((E_a − E_c)t).

    Os coeficientes de |↑,j⟩ vêm da projeção na base dual (pseudo-inversa);
    para bases ortonormais isso coincide com Vᵀ.
    """
    V = base.estados
    if base.ortonormal:
        coef_up = V[1::2, :].T
    else:
        coef_up = scipy.linalg.pinv(V)[:, 1::2]
    pesos = thermal_weights(spec, base.n_max)
    R = (coef_up * pesos[None, :]) @ coef_up.T
    Z = V.T @ (model_service.sigma_z_diagonal(base.n_max)[:, None] * V)
    return R * Z


def _pares_relevantes(base: Eigenbasis, A: np.ndarray, poda: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Frequências |E_a − E_c| e amplitudes (pares a<c dobrados, diagonal somada)."""
    a, c = np.triu_indices(A.shape[0], k=1)
    amps = 2.0 * A[a, c]
    freqs = np.abs(base.energias[a] - base.energias[c])
    diag = np.diag(A)
    limite = poda * max(1.0, float(np.max(np.abs(A))))
    manter = np.abs(amps) > limite
    dc_idx = int(np.argmax(np.abs(diag))) if diag.size else 0
    freqs = np.concatenate([[0.0], freqs[manter]])
    amps = np.concatenate([[float(diag.sum())], amps[manter]])
    fontes_a = np.concatenate([[dc_idx], a[manter]])
    fontes_c = np.concatenate([[dc_idx], c[manter]])
    return freqs, amps, fontes_a, fontes_c


def evolve(method: MethodTag, params: ModelParams, spec: InitialStateSpec, times: np.ndarray,
           l: Optional[int] = None, n_max: Optional[int] = None) -> DynamicsTrace:
    """
    ⟨σ_z(t)⟩ = 2⟨↑|ρ_red(t)|↑⟩ − 1 com fases exatas na base do método.
    A base aproximada é usada como está, sem reortogonalização.
    """
    times = np.asarray(times, dtype=float)
    base = eigenbasis(method, params, l=l, n_max=n_max)
    A = transition_amplitudes(base, spec)
    freqs, amps, _, _ = _pares_relevantes(base, A, 1e-15)
    valores = _somar_cossenos(freqs, amps, times)
    log("DynamicsService", f"{base.method.value}: {freqs.size} frequências, n_max={base.n_max}", "DEBUG")
    return DynamicsTrace(times=times, values=valores, method=base.method, params=params, n_max=base.n_max)


def _somar_cossenos(freqs: np.ndarray, amps: np.ndarray, times: np.ndarray) -> np.ndarray:
    valores = np.empty_like(times)
    bloco = max(1, ELEMENTOS_POR_BLOCO // max(1, freqs.size))
    for inicio in range(0, times.size, bloco):
        t = times[inicio:inicio + bloco]
        valores[inicio:inicio + bloco] = np.cos(np.outer(t, freqs)) @ amps
    return valores


def fourier_peaks(method: MethodTag, params: ModelParams, spec: InitialStateSpec, amp_cutoff: float = 1e-4,
                  l: Optional[int] = None, n_max: Optional[int] = None) -> PeakSpectrum:
    """
    Picos (ω, A) de ⟨σ_z(t)⟩ = Σ A cos(ωt). Transições com frequências a menos
    de 1e−9·Ω são fundidas somando amplitudes; picos com |A| < amp_cutoff saem.
    """
    if amp_cutoff < 0:
        raise DomainError("amp_cutoff precisa ser >= 0.")
    base = eigenbasis(method, params, l=l, n_max=n_max)
    A = transition_amplitudes(base, spec)
    freqs, amps, fa, fc = _pares_relevantes(base, A, 0.0)

    ordem = np.argsort(freqs, kind="stable")
    tol = TOL_FUSAO * params.omega
    picos: List[Peak] = []
    i = 0
    while i < ordem.size:
        grupo = [ordem[i]]
        while i + 1 < ordem.size and freqs[ordem[i + 1]] - freqs[grupo[-1]] < tol:
            i += 1
            grupo.append(ordem[i])
        i += 1
        idx = np.array(grupo)
        amplitude = float(amps[idx].sum())
        dominante = idx[np.argmax(np.abs(amps[idx]))]
        frequencia = float(freqs[idx].mean())
        if abs(amplitude) < amp_cutoff:
            continue
        rotulo = f"({base.rotulos[fa[dominante]]},{base.rotulos[fc[dominante]]})"
        picos.append(Peak(
            frequency=frequencia / params.omega,
            amplitude=amplitude,
            group=int(round(frequencia / params.omega)),
            label=rotulo,
        ))
    return PeakSpectrum(method=base.method, params=params, peaks=picos, n_max=base.n_max)


def reconstruct_trace(spectrum: PeakSpectrum, times: np.ndarray) -> np.ndarray:
    """Σ A cos(ωt) a partir dos picos (frequências em unidades de Ω)."""
    omega = spectrum.params.omega
    return _somar_cossenos(spectrum.frequencies() * omega, spectrum.amplitudes(), np.asarray(times, dtype=float))


def sampled_transform(trace: DynamicsTrace, nu: np.ndarray, eta: float) -> np.ndarray:
    """
    F(ν) = 2 Σ_t dt e^{−ηt} ⟨σ_z(t)⟩ cos(νt) na grade ν fornecida.
    Exige grade de tempo uniforme.
    """
    if eta <= 0:
        raise DomainError("eta precisa ser positivo.")
    t = trace.times
    if t.size < 2:
        raise DomainError("A série temporal precisa de pelo menos duas amostras.")
    passos = np.diff(t)
    dt = float(passos.mean())
    if dt <= 0 or np.max(np.abs(passos - dt)) > 1e-6 * dt:
        raise DomainError("A grade de tempo precisa ser uniforme.")
    nu = np.asarray(nu, dtype=float)
    ponderado = 2.0 * dt * np.exp(-eta * t) * trace.values
    saida = np.empty_like(nu)
    for inicio in range(0, nu.size, 256):
        bloco = nu[inicio:inicio + 256]
        saida[inicio:inicio + 256] = np.cos(np.outer(bloco, t)) @ ponderado
    return saida


def local_maxima(nu: np.ndarray, valores: np.ndarray) -> List[Tuple[float, float]]:
    """Máximos locais internos (ν, F), do mais alto para o mais baixo."""
    interno = (valores[1:-1] > valores[:-2]) & (valores[1:-1] >= valores[2:])
    idx = np.nonzero(interno)[0] + 1
    pares = [(float(nu[i]), float(valores[i])) for i in idx]
    return sorted(pares, key=lambda p: -p[1])


def group_centers(spectrum: PeakSpectrum, unidade: float, amp_min: float = 1e-3,
                  freq_max: Optional[float] = None) -> List[float]:
    """
    Centros (média ponderada por |A|) dos aglomerados de picos em torno de
    múltiplos de 'unidade' (em unidades de Ω), ignorando o pico em ω=0.
    """
    grupos = {}
    for pico in spectrum.peaks:
        if pico.frequency <= 0.0 or abs(pico.amplitude) < amp_min:
            continue
        if freq_max is not None and pico.frequency > freq_max:
            continue
        chave = int(round(pico.frequency / unidade))
        soma_p, soma_w = grupos.get(chave, (0.0, 0.0))
        peso = abs(pico.amplitude)
        grupos[chave] = (soma_p + peso * pico.frequency, soma_w + peso)
    return [grupos[k][0] / grupos[k][1] for k in sorted(grupos)]


def trace_point(payload: dict) -> dict:
    """
    Uma série ⟨σ_z(t)⟩ para o pool: payload com params, method, dynamics
    (campos de DynamicsSpec) e l opcional; devolve listas simples.
    """
    params = ModelParams(**payload["params"])
    spec = DynamicsSpec(**payload.get("dynamics", {}))
    traco = evolve(
        MethodTag(payload["method"]), params,
        InitialStateSpec(beta_hbar_omega=spec.beta_hbar_omega), spec.times(params.omega),
        l=payload.get("l"),
    )
    return {"times": traco.times.tolist(), "values": traco.values.tolist(), "n_max": traco.n_max}
