# app/services/specfun.py
# Funções especiais dos elementos de matriz vestidos: Laguerre associados,
# fator de vestimenta Ξ e a série real Ein(−α).

import math

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.special import expi, gammaln

from app.core.errors import DomainError, NumericalOverflowError
from app.services.cache_service import cache_tabelas

# acima disto a série leva centenas de termos; Ei(α) estoura em α ≈ 716
ALPHA_SERIE_EIN = 50.0


class DressingArgs(BaseModel):
    """Argumentos de Ξ_j^l(α); α é adimensional."""
    model_config = ConfigDict(frozen=True)

    l: int = Field(ge=0)
    j: int = Field(ge=0)
    alpha: float = Field(ge=0.0)


def _checar_finito(x: float, nome: str = "x") -> None:
    if not math.isfinite(x):
        raise DomainError(f"Argumento '{nome}' não finito: {x}")


def _checar_alpha(alpha: float) -> None:
    _checar_finito(alpha, "alpha")
    if alpha < 0:
        raise DomainError(f"alpha precisa ser >= 0, recebido {alpha}")


# --- Laguerre ---

def laguerre(n: int, l: int, x: float) -> float:
    """
    Polinômio de Laguerre associado L_n^l(x) pela recorrência ascendente em n:
    (m+1) L_{m+1} = (2m+1+l−x) L_m − (m+l) L_{m−1}.
    """
    if n < 0 or l < 0:
        raise DomainError(f"Índices precisam ser não negativos (n={n}, l={l}).")
    _checar_finito(x)
    anterior, atual = 1.0, 1.0 + l - x
    if n == 0:
        return anterior
    for m in range(1, n):
        anterior, atual = atual, ((2 * m + 1 + l - x) * atual - (m + l) * anterior) / (m + 1)
    return atual


def _laguerre_linhas(n_linhas: int, ls: np.ndarray, x: float) -> np.ndarray:
    """Tabela L_n^l(x) para n < n_linhas e o vetor de índices superiores ls."""
    tabela = np.empty((n_linhas, ls.size), dtype=float)
    tabela[0] = 1.0
    if n_linhas == 1:
        return tabela
    tabela[1] = 1.0 + ls - x
    for m in range(1, n_linhas - 1):
        tabela[m + 1] = ((2 * m + 1 + ls - x) * tabela[m] - (m + ls) * tabela[m - 1]) / (m + 1)
    return tabela


# --- Fator de vestimenta ---

def xi(j: int, l: int, alpha: float) -> float:
    """
    Ξ_j^l(α) = α^{l/2} sqrt(j!/(j+l)!) L_j^l(α) e^{−α/2}.
    A razão de fatoriais entra como produto de l fatores α/(j+i).
    """
    _checar_alpha(alpha)
    razao = 1.0
    for i in range(1, l + 1):
        razao *= alpha / (j + i)
    return math.sqrt(razao) * laguerre(j, l, alpha) * math.exp(-alpha / 2.0)


def dressing_xi(args: DressingArgs) -> float:
    return xi(args.j, args.l, args.alpha)


def dressed_delta(j: int, jp: int, delta: float, alpha: float) -> float:
    """
    Δ_j^{j′} = Δ [sign(j′−j)]^{|j′−j|} Ξ_{min(j,j′)}^{|j′−j|}(α), com sign(0) = +1.
    """
    if delta < 0:
        raise DomainError(f"delta precisa ser >= 0, recebido {delta}")
    d = abs(jp - j)
    sinal = 1.0 if jp >= j or d % 2 == 0 else -1.0
    return delta * sinal * xi(min(j, jp), d, alpha)


def ein_neg(alpha: float) -> float:
    """
    γ + ln(−α) + Γ(0,−α) pela série real −Σ_{k≥1} α^k/(k·k!).
    Para quando o termo cai abaixo de 1e−16 da soma parcial. Acima de
    ALPHA_SERIE_EIN usa a forma fechada γ + ln α − Ei(α).
    """
    _checar_alpha(alpha)
    if alpha == 0.0:
        return 0.0
    if alpha > ALPHA_SERIE_EIN:
        valor = float(np.euler_gamma + math.log(alpha) - expi(alpha))
        if not math.isfinite(valor):
            raise NumericalOverflowError(f"Ein(−α) excede o alcance de ponto flutuante para α={alpha}")
        return valor
    soma = 0.0
    potencia = 1.0  # α^k / k!
    k = 0
    while True:
        k += 1
        potencia *= alpha / k
        termo = potencia / k
        soma -= termo
        if termo < 1e-16 * abs(soma):
            return soma


# --- Tabelas vetorizadas (com cache) ---

def _potencia_de_dois(n: int) -> int:
    return 1 << max(0, int(n) - 1).bit_length()


def _tabela_xi(alpha: float, n_linhas: int, n_colunas: int) -> np.ndarray:
    ls = np.arange(n_colunas, dtype=float)
    if alpha == 0.0:
        tabela = np.zeros((n_linhas, n_colunas))
        tabela[:, 0] = 1.0
    else:
        lag = _laguerre_linhas(n_linhas, ls, alpha)
        ns = np.arange(n_linhas, dtype=float)[:, None]
        log_pref = 0.5 * ls * math.log(alpha) + 0.5 * (gammaln(ns + 1) - gammaln(ns + ls + 1)) - alpha / 2.0
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            tabela = np.sign(lag) * np.exp(np.log(np.abs(lag)) + log_pref)
        tabela[~np.isfinite(tabela)] = 0.0
    tabela.flags.writeable = False
    return tabela


_tabela_xi_cache = cache_tabelas.apply_to_function(_tabela_xi)


def dressing_table(alpha: float, n_linhas: int, n_colunas: int) -> np.ndarray:
    """
    Tabela somente leitura T[n, l] = Ξ_n^l(α) com pelo menos n_linhas × n_colunas.
    Tamanhos arredondados para potências de dois para reaproveitar o cache.
    """
    _checar_alpha(alpha)
    return _tabela_xi_cache(float(alpha), _potencia_de_dois(n_linhas), _potencia_de_dois(n_colunas))


def signed_dressing_matrix(alpha: float, n_a: int, n_b: int) -> np.ndarray:
    """
    M[a, b] = [sign(b−a)]^{|b−a|} Ξ_{min(a,b)}^{|b−a|}(α) para a < n_a, b < n_b.
    Δ·M(α) dá os Δ_a^b; M(α/4) dá os coeficientes dos estados deslocados.
    """
    tabela = dressing_table(alpha, min(n_a, n_b), max(n_a, n_b))
    a = np.arange(n_a)[:, None]
    b = np.arange(n_b)[None, :]
    d = np.abs(b - a)
    sinal = np.where((b >= a) | (d % 2 == 0), 1.0, -1.0)
    return sinal * tabela[np.minimum(a, b), d]
