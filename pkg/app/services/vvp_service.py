# app/services/vvp_service.py
# Teoria de perturbação de Van Vleck de segunda ordem sobre dubletos de
# estados deslocados do oscilador (energias, ângulo de mistura e autoestados).

import math
from typing import Dict, List, Optional, Tuple

import numpy as np

from app.core.config import get_settings
from app.core.errors import DegenerateDenominatorError, DomainError, SeriesConvergenceError, TruncationError
from app.core.logs import log
from app.models import (
    DoubletIndex,
    DoubletSolution,
    FockTruncation,
    LevelSet,
    MethodTag,
    ModelParams,
    Spin,
    VvpState,
    montar_levelset,
)
from app.services import specfun

TOL_CAUDA = 1e-12
TOL_NORMA_DESLOCADO = 1e-10


def _tol_denominador(params: ModelParams) -> float:
    return 1e-12 * max(params.omega, abs(params.eps))


# --- Escolha do subespaço ressonante ---

def choose_l(params: ModelParams) -> int:
    """round(ε/Ω) com empates em meio-inteiro para o maior |l|."""
    razao = params.eps / params.omega
    return int(math.copysign(math.floor(abs(razao) + 0.5), razao))


def unperturbed_energy(spin: Spin, j: int, params: ModelParams) -> float:
    """E⁰_{↑/↓,j} = ∓ε/2 + jΩ − g²/Ω."""
    return -spin.sinal * params.eps / 2.0 + j * params.omega - params.g ** 2 / params.omega


# --- Correções diagonais ε⁽²⁾ ---

def _termos_eps2(spin: Spin, j: int, params: ModelParams, l: int, k_cut: int) -> float:
    """Soma de k = −j até k_cut (inclusive) da série de ε⁽²⁾."""
    tabela = specfun.dressing_table(params.alpha, j + 1, j + k_cut + 1)
    ks = np.arange(-j, k_cut + 1)
    excluido = l if spin is Spin.DOWN else -l
    ks = ks[ks != excluido]
    if ks.size == 0:
        return 0.0
    dressed = params.delta * tabela[np.minimum(j, j + ks), np.abs(ks)]
    denominadores = params.eps - ks * params.omega if spin is Spin.DOWN else params.eps + ks * params.omega
    # termos com Δ vestido nulo não exigem denominador
    relevantes = dressed != 0.0
    pequenos = relevantes & (np.abs(denominadores) < _tol_denominador(params))
    if np.any(pequenos):
        k_ruim = int(ks[pequenos][0])
        raise DegenerateDenominatorError(
            f"Denominador nulo em ε⁽²⁾ ({spin.value}, j={j}) para k={k_ruim}: l={l} é inconsistente com ε={params.eps}.",
            indice=k_ruim,
            denominador=float(denominadores[pequenos][0]),
        )
    with np.errstate(divide="ignore", invalid="ignore"):
        termos = np.where(relevantes, dressed ** 2 / denominadores, 0.0)
    return float(np.sum(termos))


def epsilon2(spin: Spin, j: int, params: ModelParams, l: int, k_cut: Optional[int] = None) -> float:
    """
    ε⁽²⁾_{↓/↑,j} = Σ_{k=−j, k≠±l} (Δ_j^{j+k})² / (ε ∓ kΩ).

    Com k_cut explícito a soma é truncada ali; sem ele o corte dobra até a
    contribuição da última dobra ficar abaixo de 1e−12·Ω.
    """
    if j < 0:
        raise DomainError("j precisa ser >= 0.")
    if k_cut is not None:
        return _termos_eps2(spin, j, params, l, int(k_cut))

    teto = get_settings().ksum_cap
    corte = max(32, abs(l) + 8, int(math.ceil(2 * params.alpha)) + 16)
    anterior = _termos_eps2(spin, j, params, l, corte)
    while True:
        novo_corte = 2 * corte
        if novo_corte > teto:
            raise SeriesConvergenceError(f"Série de ε⁽²⁾ não convergiu com {teto} termos (j={j}).")
        atual = _termos_eps2(spin, j, params, l, novo_corte)
        if abs(atual - anterior) < TOL_CAUDA * params.omega:
            return atual
        anterior, corte = atual, novo_corte


# --- Dubletos ---

def _montar_dubleto(params: ModelParams, j: int, l: int, eps2_down: float, eps2_up: float) -> DoubletSolution:
    """Bloco 2×2 do dubleto (↓,j),(↑,j+l) dadas as correções diagonais."""
    delta_jl = specfun.dressed_delta(j, j + l, params.delta, params.alpha)
    denominador = params.eps - l * params.omega + 0.25 * (eps2_down + eps2_up)
    omega_jl = math.hypot(denominador, delta_jl)
    theta = math.pi / 2.0 if denominador == 0.0 else math.atan2(abs(delta_jl), denominador)
    centro = (j + l / 2.0) * params.omega - params.g ** 2 / params.omega + (eps2_down - eps2_up) / 8.0
    return DoubletSolution(
        index=DoubletIndex(j=j, l=l),
        eps2_down=eps2_down,
        eps2_up=eps2_up,
        delta_jl=delta_jl,
        omega_jl=omega_jl,
        theta=theta,
        energy_minus=centro - omega_jl / 2.0,
        energy_plus=centro + omega_jl / 2.0,
    )


def doublet_solution(params: ModelParams, j: int, l: int, second_order: bool = True) -> DoubletSolution:
    """
    Energias E_{∓,j}, frequência vestida Ω_j^l e ângulo Θ_j^l do dubleto.
    second_order=False zera as ε⁽²⁾ (aproximação adiabática).
    """
    if j < 0 or j + l < 0:
        raise DomainError(f"Dubleto inválido: j={j}, l={l}.")
    if second_order:
        eps2_down = epsilon2(Spin.DOWN, j, params, l)
        eps2_up = epsilon2(Spin.UP, j + l, params, l)
    else:
        eps2_down = eps2_up = 0.0
    return _montar_dubleto(params, j, l, eps2_down, eps2_up)


def unpaired_energy(spin: Spin, j: int, params: ModelParams, l: int, second_order: bool = True) -> float:
    """Nível sem parceiro: E⁰ + ε⁽²⁾/4 para ↓, E⁰ − ε⁽²⁾/4 para ↑."""
    energia = unperturbed_energy(spin, j, params)
    if not second_order:
        return energia
    correcao = epsilon2(spin, j, params, l) / 4.0
    return energia + correcao if spin is Spin.DOWN else energia - correcao


def unpaired_indices(l: int) -> Tuple[Spin, List[int]]:
    """Para l>0 os ↑ com j<l ficam sem parceiro; para l<0 os ↓ com j<|l|."""
    if l >= 0:
        return Spin.UP, list(range(l))
    return Spin.DOWN, list(range(-l))


def doublet_label(branch: str, j: int, l: int) -> str:
    return f"doublet({branch},{j},{l})"


def unpaired_label(spin: Spin, j: int) -> str:
    return f"unpaired({spin.value},{j})"


def doublet_levels(params: ModelParams, k: int, l: int, second_order: bool,
                   method: MethodTag, n_dubletos: Optional[int] = None) -> LevelSet:
    n_dubletos = n_dubletos if n_dubletos is not None else k + abs(l) + 2
    pares = []
    j_min = max(0, -l)
    for j in range(j_min, j_min + n_dubletos):
        sol = doublet_solution(params, j, l, second_order)
        pares.append((sol.energy_minus, doublet_label("-", j, l)))
        pares.append((sol.energy_plus, doublet_label("+", j, l)))
    spin, js = unpaired_indices(l)
    for j in js:
        pares.append((unpaired_energy(spin, j, params, l, second_order), unpaired_label(spin, j)))
    return montar_levelset(method, pares, k=k)


def vvp_levels(params: ModelParams, k: int, l: Optional[int] = None) -> LevelSet:
    """Espectro VVP: dubletos de segunda ordem mais níveis sem parceiro, k menores."""
    l = choose_l(params) if l is None else l
    return doublet_levels(params, k, l, True, MethodTag.VVP)


def closed_form_levels(params: ModelParams) -> Dict[str, float]:
    """
    E_{∓,0} e E_{∓,1} em ε=0 via ein_neg, sem somas em k.
    E_{∓,1} serve apenas de conferência contra a soma direta.
    """
    if params.eps != 0.0:
        raise DomainError("As formas fechadas valem só para ε = 0.")
    a = params.alpha
    base = params.delta ** 2 * math.exp(-a) / (4.0 * params.omega)
    ein = specfun.ein_neg(a)
    gamma = np.euler_gamma
    deslocamento = -params.g ** 2 / params.omega
    meio0 = 0.5 * params.delta * math.exp(-a / 2.0)
    chave1 = 1.0 + gamma + math.exp(a) * (a - 1.0) - a * (a - gamma * (a - 2.0)) + (a - 1.0) ** 2 * (ein - gamma)
    meio1 = 0.5 * abs(params.delta * (1.0 - a) * math.exp(-a / 2.0))
    e0 = deslocamento + base * ein
    e1 = params.omega + deslocamento + base * chave1
    return {"minus_0": e0 - meio0, "plus_0": e0 + meio0, "minus_1": e1 - meio1, "plus_1": e1 + meio1}


# --- Estados deslocados ---

def _coeficientes_deslocados(spin: Spin, n_bare: int, n_desl: int, params: ModelParams) -> np.ndarray:
    """C[j′, j] = ⟨j′|(s,j)~⟩ do oscilador, argumento α/4 = (g/Ω)²."""
    alpha4 = params.alpha / 4.0
    if spin is Spin.UP:
        return specfun.signed_dressing_matrix(alpha4, n_bare, n_desl)
    return specfun.signed_dressing_matrix(alpha4, n_desl, n_bare).T


def displaced_state(spin: Spin, j: int, params: ModelParams, trunc: FockTruncation) -> np.ndarray:
    """
    |(s,j)~⟩ = D(∓g/Ω)|j⟩ ⊗ |s⟩ na base nua, normalizado; falha se a norma
    descartada pelo truncamento passar de 1e−10.
    """
    if j >= trunc.n_max:
        raise TruncationError(f"j={j} fora do truncamento n_max={trunc.n_max}.", n_max=trunc.n_max)
    coef = _coeficientes_deslocados(spin, trunc.n_max, j + 1, params)[:, j]
    cauda = max(0.0, 1.0 - float(coef @ coef))
    if cauda > TOL_NORMA_DESLOCADO:
        raise TruncationError(
            f"Truncamento n_max={trunc.n_max} pequeno para o estado deslocado j={j} (cauda {cauda:.1e}).",
            n_max=trunc.n_max,
            norma_cauda=cauda,
        )
    estado = np.zeros(trunc.dimensao)
    deslocamento = 1 if spin is Spin.UP else 0
    estado[deslocamento::2] = coef / math.sqrt(coef @ coef)
    return estado


def displaced_capacity(params: ModelParams, n_max: int, tol: float = TOL_NORMA_DESLOCADO) -> int:
    """Maior M tal que os estados deslocados j < M cabem em n_max com cauda < tol."""
    coef = _coeficientes_deslocados(Spin.UP, n_max, n_max, params)
    caudas = 1.0 - np.sum(coef ** 2, axis=0)
    ruins = np.nonzero(caudas > tol)[0]
    return int(ruins[0]) if ruins.size else n_max


def displaced_basis(params: ModelParams, n_max: int, n_desl: int) -> np.ndarray:
    """
    Matriz (2·n_max × 2·n_desl) cujas colunas são |(↓,j)~⟩ para j < n_desl
    seguidas de |(↑,j)~⟩ para j < n_desl, na base nua.
    """
    base = np.zeros((2 * n_max, 2 * n_desl))
    for spin, bloco, linha0 in ((Spin.DOWN, 0, 0), (Spin.UP, 1, 1)):
        coef = _coeficientes_deslocados(spin, n_max, n_desl, params)
        coef = coef / np.sqrt(np.sum(coef ** 2, axis=0))
        base[linha0::2, bloco * n_desl:(bloco + 1) * n_desl] = coef
    return base


# --- Gerador de Van Vleck ---

class VanVleckGenerator:
    """
    Gerador T = iS (real e antissimétrico) em primeira e segunda ordem na
    base de estados deslocados, com índices [↓0 … ↓(M−1), ↑0 … ↑(M−1)].

    Estados intermediários das somas de segunda ordem vão até n_inter > M.
    """

    def __init__(self, params: ModelParams, l: int, n_desl: int, n_inter: Optional[int] = None):
        self.params = params
        self.l = l
        self.m = n_desl
        self.k = max(n_inter or 0, n_desl)
        self.tol = _tol_denominador(params)
        idx = np.arange(self.k)
        self.e_down = np.array([unperturbed_energy(Spin.DOWN, j, params) for j in idx])
        self.e_up = np.array([unperturbed_energy(Spin.UP, j, params) for j in idx])
        # V_{↓a,↑b} = −½ Δ_a^b
        self.v = -0.5 * params.delta * specfun.signed_dressing_matrix(params.alpha, self.k, self.k)

    def _parceiro_de_down(self, a: np.ndarray) -> np.ndarray:
        return a + self.l

    def _razao(self, numerador: np.ndarray, denominador: np.ndarray, mascara: np.ndarray) -> np.ndarray:
        """numerador/denominador onde a máscara vale; zero fora dela."""
        ativos = mascara & (numerador != 0.0)
        pequenos = ativos & (np.abs(denominador) < self.tol)
        if np.any(pequenos):
            posicao = np.argwhere(pequenos)[0]
            raise DegenerateDenominatorError(
                f"Denominador nulo no gerador de Van Vleck em {tuple(int(p) for p in posicao)}.",
                indice=int(posicao[0]),
                denominador=float(denominador[tuple(posicao)]),
            )
        saida = np.zeros_like(numerador)
        np.divide(numerador, denominador, out=saida, where=ativos)
        return saida

    def first_order_block(self) -> np.ndarray:
        """T1_{↓a,↑b} = V_{↓a,↑b}/(E↓a − E↑b), zero dentro do dubleto (b = a + l)."""
        m = self.m
        a = np.arange(m)[:, None]
        b = np.arange(m)[None, :]
        fora = b != self._parceiro_de_down(a)
        den = self.e_down[:m, None] - self.e_up[None, :m]
        return self._razao(self.v[:m, :m], np.broadcast_to(den, (m, m)), np.broadcast_to(fora, (m, m)))

    def first_order(self) -> np.ndarray:
        m = self.m
        bloco = self.first_order_block()
        t1 = np.zeros((2 * m, 2 * m))
        t1[:m, m:] = bloco
        t1[m:, :m] = -bloco.T
        return t1

    def _segunda_ordem_mesmo_spin(self, acopl: np.ndarray, e_m: np.ndarray, e_k: np.ndarray,
                                  parceiro: np.ndarray) -> np.ndarray:
        """
        T2[m,n] para estados m,n do mesmo spin, com intermediários k do spin oposto:
        acopl[k, m] = V_{k,m}; parceiro[m] = índice k do parceiro de m no dubleto
        (fora do intervalo quando não existe).
        """
        m_tot = self.m
        n_k = acopl.shape[0]
        em = e_m[:m_tot]
        ks = np.arange(n_k)[:, None]
        eh_parceiro = ks == parceiro[None, :]
        c_fora = np.where(eh_parceiro, 0.0, acopl)

        den_km = em[None, :] - e_k[:, None]
        r = self._razao(np.ones_like(c_fora), den_km, c_fora != 0.0)
        cr = c_fora * r
        soma = cr.T @ c_fora + c_fora.T @ cr

        # termos separados dos parceiros: k1 = parceiro de n, k2 = parceiro de m
        valido = (parceiro >= 0) & (parceiro < n_k)
        p = np.where(valido, parceiro, 0)
        c_par = np.where(valido[:, None], acopl[p, :], 0.0)  # c_par[x, m] = V_{parceiro(x), m}
        e_par = np.where(valido, e_k[p], 0.0)
        diag_par = np.diag(c_par)
        # m = n nunca entra em T2; na ressonância E_n − E_parceiro(n) = 0 exatamente
        fora_diag = ~np.eye(m_tot, dtype=bool)
        num_k1 = c_par.T * diag_par[None, :]  # [m, n] = V_{m,k1} V_{k1,n}
        den_k1 = em[:, None] - e_par[None, :]
        termo_k1 = self._razao(num_k1, den_k1, valido[None, :] & fora_diag)
        num_k2 = num_k1.T  # [m, n] = V_{m,k2} V_{k2,n}
        den_k2 = em[None, :] - e_par[:, None]
        termo_k2 = self._razao(num_k2, den_k2, valido[:, None] & fora_diag)

        chave = 0.5 * soma + termo_k1 + termo_k2
        dif = em[:, None] - em[None, :]
        return self._razao(chave, dif, fora_diag)

    def second_order(self) -> np.ndarray:
        """T2 bloco-diagonal em spin; zero entre spins opostos."""
        m = self.m
        idx = np.arange(m)
        # ↑↑: intermediários ↓k, V_{↓k,↑j} = v[k, j]; parceiro de ↑j é ↓(j − l)
        t_up = self._segunda_ordem_mesmo_spin(self.v[:, :m], self.e_up, self.e_down, idx - self.l)
        # ↓↓: intermediários ↑k, V_{↑k,↓j} = v[j, k]; parceiro de ↓j é ↑(j + l)
        t_down = self._segunda_ordem_mesmo_spin(self.v[:m, :].T, self.e_down, self.e_up, idx + self.l)
        t2 = np.zeros((2 * m, 2 * m))
        t2[:m, :m] = t_down
        t2[m:, m:] = t_up
        return t2


def _indice_deslocado(spin: Spin, j: int, m: int) -> int:
    return j if spin is Spin.DOWN else m + j


def s_matrix_element(order: int, bra: Tuple[Spin, int], ket: Tuple[Spin, int],
                     params: ModelParams, l: int) -> float:
    """
    Elemento ⟨bra|iS⁽ᵒʳᵈᵉᵐ⁾|ket⟩ na base deslocada (real, antissimétrico).
    A soma intermediária de segunda ordem dobra até estabilizar em 1e−12.
    """
    (s_bra, j_bra), (s_ket, j_ket) = bra, ket
    if order == 1 and s_bra is s_ket:
        raise DomainError("Elementos de primeira ordem exigem spins opostos.")
    if order == 2 and (s_bra is not s_ket or j_bra == j_ket):
        raise DomainError("Elementos de segunda ordem exigem mesmo spin e j ≠ j′.")
    if order not in (1, 2):
        raise DomainError(f"Ordem {order} não suportada.")

    alcance = max(j_bra, j_ket) + abs(l) + 1
    if order == 1:
        gerador = VanVleckGenerator(params, l, alcance)
        t = gerador.first_order()
        return float(t[_indice_deslocado(s_bra, j_bra, alcance), _indice_deslocado(s_ket, j_ket, alcance)])

    teto = get_settings().ksum_cap
    n_inter = max(32, alcance + int(math.ceil(2 * params.alpha)) + 16)
    anterior = None
    while True:
        gerador = VanVleckGenerator(params, l, alcance, n_inter)
        t = gerador.second_order()
        valor = float(t[_indice_deslocado(s_bra, j_bra, alcance), _indice_deslocado(s_ket, j_ket, alcance)])
        if anterior is not None and abs(valor - anterior) < TOL_CAUDA:
            return valor
        if 2 * n_inter > teto:
            raise SeriesConvergenceError(f"Soma intermediária de S⁽²⁾ não convergiu com {teto} termos.")
        anterior, n_inter = valor, 2 * n_inter


# --- Autoestados de segunda ordem ---

def _estado_ordem0(sol: DoubletSolution, branch: str, m: int) -> np.ndarray:
    """Φ⁽⁰⁾ na base deslocada: Φ− = −sin(Θ/2)|↓j⟩ − sgn cos(Θ/2)|↑j+l⟩, Φ+ = cos|↓j⟩ − sgn sin|↑j+l⟩."""
    j, l = sol.index.j, sol.index.l
    sgn = 1.0 if sol.delta_jl >= 0 else -1.0
    meio = sol.theta / 2.0
    phi = np.zeros(2 * m)
    if branch == "-":
        phi[j] = -math.sin(meio)
        phi[m + j + l] = -sgn * math.cos(meio)
    else:
        phi[j] = math.cos(meio)
        phi[m + j + l] = -sgn * math.sin(meio)
    return phi


def _n_intermediario(params: ModelParams, m: int) -> int:
    return m + int(math.ceil(2 * params.alpha + 6 * math.sqrt(params.alpha + 1.0))) + 16


def vvp_state(params: ModelParams, branch: str, j: int, l: int, trunc: FockTruncation) -> VvpState:
    """
    Φ = (1 − T1 − T2 + ½T1²)Φ⁽⁰⁾ expandido na base nua através dos estados deslocados.
    branch ∈ {'-', '+', 'unpaired'}; para 'unpaired', j indexa o estado sem parceiro.
    """
    if params.delta <= 0.0:
        raise DomainError("Autoestados VVP exigem Δ > 0 (ângulo de mistura indefinido).")
    if branch not in ("-", "+", "unpaired"):
        raise DomainError(f"Ramo inválido: {branch}")

    m = displaced_capacity(params, trunc.n_max)
    mais_alto = j + max(l, 0) if branch != "unpaired" else j
    if mais_alto >= m:
        raise TruncationError(
            f"n_max={trunc.n_max} comporta só {m} estados deslocados; j={j}, l={l} exige mais.",
            n_max=trunc.n_max,
        )

    gerador = VanVleckGenerator(params, l, m, _n_intermediario(params, m))
    t1 = gerador.first_order()
    t2 = gerador.second_order()

    if branch == "unpaired":
        spin, livres = unpaired_indices(l)
        if j not in livres:
            raise DomainError(f"Não há estado sem parceiro ({spin.value}, j={j}) para l={l}.")
        phi0 = np.zeros(2 * m)
        phi0[_indice_deslocado(spin, j, m)] = 1.0
        rotulo = unpaired_label(spin, j)
    else:
        sol = doublet_solution(params, j, l)
        phi0 = _estado_ordem0(sol, branch, m)
        rotulo = doublet_label(branch, j, l)

    phi1 = -t1 @ phi0
    phi2 = -t2 @ phi0 + 0.5 * (t1 @ (t1 @ phi0))
    base = displaced_basis(params, trunc.n_max, m)
    return VvpState(
        label=rotulo,
        branch=branch,
        index=DoubletIndex(j=j, l=l),
        order0=base @ phi0,
        order1=base @ phi1,
        order2=base @ phi2,
    )


def vvp_eigensystem(params: ModelParams, n_max: int, l: Optional[int] = None,
                    order: int = 2) -> Tuple[np.ndarray, np.ndarray, List[str]]:
    """
    Energias e estados aproximados (colunas na base nua) de todos os dubletos
    e níveis sem parceiro que cabem no truncamento.

    order=2 usa energias e estados de segunda ordem; order=0 usa os dubletos
    adiabáticos (ε⁽²⁾ = 0) e apenas Φ⁽⁰⁾.
    """
    if params.delta <= 0.0:
        raise DomainError("Autoestados VVP exigem Δ > 0.")
    l = choose_l(params) if l is None else l
    m = displaced_capacity(params, n_max)
    segunda = order == 2
    if m <= abs(l) + 1:
        raise TruncationError(f"n_max={n_max} pequeno demais para l={l}.", n_max=n_max)

    energias: List[float] = []
    rotulos: List[str] = []
    colunas: List[np.ndarray] = []
    j_min = max(0, -l)
    j_max = m - max(l, 0)
    for j in range(j_min, j_max):
        sol = doublet_solution(params, j, l, second_order=segunda)
        for branch, energia in (("-", sol.energy_minus), ("+", sol.energy_plus)):
            colunas.append(_estado_ordem0(sol, branch, m))
            energias.append(energia)
            rotulos.append(doublet_label(branch, j, l))
    spin, livres = unpaired_indices(l)
    for j in livres:
        phi0 = np.zeros(2 * m)
        phi0[_indice_deslocado(spin, j, m)] = 1.0
        colunas.append(phi0)
        energias.append(unpaired_energy(spin, j, params, l, second_order=segunda))
        rotulos.append(unpaired_label(spin, j))

    phi0 = np.column_stack(colunas)
    if segunda:
        gerador = VanVleckGenerator(params, l, m, _n_intermediario(params, m))
        t1 = gerador.first_order()
        t2 = gerador.second_order()
        phi = phi0 - t1 @ phi0 - t2 @ phi0 + 0.5 * (t1 @ (t1 @ phi0))
    else:
        phi = phi0
    estados = displaced_basis(params, n_max, m) @ phi
    log("VVPService", f"Base aproximada com {len(energias)} estados (n_max={n_max}, l={l}, ordem {order})", "DEBUG")
    return np.array(energias), estados, rotulos
