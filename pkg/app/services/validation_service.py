# app/services/validation_service.py
# Mapas de erro método × oráculo, afirmações qualitativas verificáveis,
# razão de validade, estudo de convergência e goldens de regressão.

import math
import os
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel

from app.core.errors import DegenerateDenominatorError, DomainError, RabiVVError, UnsupportedRegimeError
from app.core.logs import log
from app.models import DynamicsSpec, ErrorGrid, InitialStateSpec, LevelSet, MethodTag, ModelParams, SweepSpec, montar_levelset
from app.services import closedform_service, dynamics_service, model_service, specfun, vvp_service
from app.services.report_service import ReportService

Mapper = Callable[[Callable, List[Any]], List[Any]]
Eixo = Tuple[str, np.ndarray]

LIMIAR_PADRAO = 0.02
METODOS_PADRAO = [MethodTag.VVP, MethodTag.GRWA, MethodTag.ADIABATIC, MethodTag.JCM]
TOL_GOLDEN_NIVEIS = 1e-9
TOL_GOLDEN_TRACOS = 1e-7
VERSAO_GOLDEN = "v1"


def _mapear_serial(tarefa: Callable, itens: List[Any]) -> List[Any]:
    return [tarefa(item) for item in itens]


def default_axes(omega: float = 1.0, tamanho: int = 40) -> Tuple[Eixo, Eixo]:
    """Δ/Ω ∈ [0.1, 2.0] linear × g/Ω ∈ [0.01, 2.0] logarítmico."""
    if tamanho < 2:
        raise DomainError("A grade precisa de pelo menos 2 pontos por eixo.")
    return (
        ("delta", np.linspace(0.1, 2.0, tamanho) * omega),
        ("g", np.geomspace(0.01, 2.0, tamanho) * omega),
    )


# --- Espectros por método ---

def check_supported(method: MethodTag, params: ModelParams) -> None:
    """Levanta UnsupportedRegimeError para combinações sem definição."""
    method = MethodTag(method)
    if method in (MethodTag.GRWA, MethodTag.JCM) and params.eps != 0.0:
        raise UnsupportedRegimeError(f"{method.value} só está definido para ε = 0 (recebido ε={params.eps}).")


def method_levels(method: MethodTag, params: ModelParams, k: int, l: Optional[int] = None,
                  tol: float = 1e-8, oracle: Optional[LevelSet] = None) -> LevelSet:
    """Os k menores níveis do método; EXACT usa o oráculo convergido."""
    method = MethodTag(method)
    check_supported(method, params)
    if method is MethodTag.EXACT:
        return oracle if oracle is not None else model_service.converged_spectrum(params, k, tol)
    if method is MethodTag.VVP:
        return vvp_service.vvp_levels(params, k, l)
    if method is MethodTag.ADIABATIC:
        return closedform_service.adiabatic_levels(params, l=l, j_max=k)
    if method is MethodTag.JCM:
        return closedform_service.jcm_levels(params, k)
    grwa = closedform_service.grwa_levels(params, k)
    return montar_levelset(MethodTag.GRWA, [(e.energy, e.label) for e in grwa.entries], k=k)


def spectrum_point(payload: Dict[str, Any]) -> Dict[str, Any]:
    """
    Um ponto de varredura: níveis de cada método em unidades de Ω.
    Payload e retorno são dicts simples para atravessar processos e filas.
    """
    params = ModelParams(**payload["params"])
    k = int(payload["k"])
    l = payload.get("l")
    tol = float(payload.get("tol", 1e-8))
    metodos = [MethodTag(m) for m in payload["methods"]]

    oracle = model_service.converged_spectrum(params, k, tol) if MethodTag.EXACT in metodos else None
    niveis = {}
    for metodo in metodos:
        conjunto = method_levels(metodo, params, k, l=l, tol=tol, oracle=oracle)
        niveis[metodo.value] = [(e.label, e.energy / params.omega) for e in conjunto.entries]

    razao = None
    if MethodTag.VVP in metodos and params.delta > 0:
        l_usado = vvp_service.choose_l(params) if l is None else l
        try:
            razao = validity_ratio(params, l_usado, j_max=k, k_max=k)
        except DegenerateDenominatorError:
            razao = math.inf
    return {"n_max": oracle.n_max if oracle else None, "levels": niveis, "validity_ratio": razao}


# --- Mapas de erro ---

def evaluate_cell(payload: Dict[str, Any]) -> Dict[str, Any]:
    """
    Erro máximo |E_método − E_exato|/Ω nos k primeiros níveis de um ponto.
    Falhas do método viram NaN na célula; falha do oráculo anula a célula toda.
    """
    params = ModelParams(**payload["params"])
    k = int(payload["k"])
    l = payload.get("l")
    tol = float(payload.get("tol", 1e-8))
    metodos = [MethodTag(m) for m in payload["methods"]]

    try:
        oracle = model_service.converged_spectrum(params, k, tol)
    except RabiVVError as e:
        log("ValidationService", f"Oráculo falhou em {params.model_dump()}: {e}", "WARNING")
        return {"oracle_n_max": 0, "errors": {m.value: math.nan for m in metodos}}

    exatas = oracle.energies()
    erros = {}
    for metodo in metodos:
        try:
            aprox = method_levels(metodo, params, k, l=l, tol=tol, oracle=oracle).energies()
            n = min(aprox.size, exatas.size)
            erros[metodo.value] = float(np.max(np.abs(aprox[:n] - exatas[:n]))) / params.omega
        except (RabiVVError, ArithmeticError, ValueError) as e:
            log("ValidationService", f"{metodo.value} falhou em {params.model_dump()}: {e}", "DEBUG")
            erros[metodo.value] = math.nan
    return {"oracle_n_max": oracle.n_max or 0, "errors": erros}


def error_maps(methods: Sequence[MethodTag], axis1: Eixo, axis2: Eixo, fixed: ModelParams, k: int = 8,
               tol: float = 1e-8, l: Optional[int] = None, mapper: Optional[Mapper] = None) -> Dict[MethodTag, ErrorGrid]:
    """
    Grades de erro para vários métodos compartilhando o oráculo de cada célula.
    As células são independentes; o mapper decide como executá-las.
    """
    metodos = [MethodTag(m) for m in methods]
    nome1, valores1 = axis1[0], np.asarray(axis1[1], dtype=float)
    nome2, valores2 = axis2[0], np.asarray(axis2[1], dtype=float)
    for nome in (nome1, nome2):
        if nome not in ("eps", "delta", "g", "omega"):
            raise DomainError(f"Eixo desconhecido: {nome}")

    payloads = []
    for v1 in valores1:
        for v2 in valores2:
            ponto = fixed.com(**{nome1: float(v1), nome2: float(v2)})
            payloads.append({
                "params": ponto.model_dump(),
                "methods": [m.value for m in metodos],
                "k": k,
                "tol": tol,
                "l": l,
            })

    log("ValidationService", f"Avaliando {len(payloads)} células para {[m.value for m in metodos]}")
    resultados = (mapper or _mapear_serial)(evaluate_cell, payloads)

    forma = (valores1.size, valores2.size)
    n_oraculo = max((r["oracle_n_max"] for r in resultados), default=0)
    grades = {}
    for metodo in metodos:
        celulas = np.array([r["errors"][metodo.value] for r in resultados], dtype=float).reshape(forma)
        grades[metodo] = ErrorGrid(
            method=metodo,
            axis1_name=nome1, axis1_values=valores1,
            axis2_name=nome2, axis2_values=valores2,
            cells=celulas, fixed=fixed, k=k, oracle_n_max=n_oraculo,
        )
    return grades


def error_map(method: MethodTag, axis1: Eixo, axis2: Eixo, fixed: ModelParams, k: int = 8, **kwargs) -> ErrorGrid:
    return error_maps([method], axis1, axis2, fixed, k, **kwargs)[MethodTag(method)]


def error_grid_rows(grid: ErrorGrid) -> List[List[Any]]:
    """Linhas (eixo1/Ω, eixo2/Ω, método, erro) na ordem da grade."""
    omega = grid.fixed.omega
    linhas = []
    for i, v1 in enumerate(grid.axis1_values):
        for j, v2 in enumerate(grid.axis2_values):
            linhas.append([float(v1) / omega, float(v2) / omega, grid.method.value, float(grid.cells[i, j])])
    return linhas


# --- Diagnóstico de validade ---

def validity_ratio(params: ModelParams, l: int, j_max: int, k_max: int) -> float:
    """
    max |Δ_j^{j+k}/2| / |ε − kΩ| para j ≤ j_max, |k| ≤ k_max, k ≠ l.
    Valores pequenos indicam subespaços de dubleto bem separados.
    """
    if j_max < 0 or k_max < 0:
        raise DomainError("j_max e k_max precisam ser >= 0.")
    tol = 1e-12 * max(1.0, params.omega)
    maior = 0.0
    for k in range(-k_max, k_max + 1):
        if k == l:
            continue
        denominador = params.eps - k * params.omega
        if abs(denominador) < tol:
            raise DegenerateDenominatorError(
                f"ε − kΩ se anula para k={k} (ε={params.eps}).", indice=k, denominador=denominador
            )
        for j in range(max(0, -k), j_max + 1):
            elemento = specfun.dressed_delta(j, j + k, params.delta, params.alpha)
            maior = max(maior, abs(elemento / 2.0) / abs(denominador))
    return maior


# --- Afirmações qualitativas ---

class Claim(BaseModel):
    nome: str
    descricao: str
    metodos: List[MethodTag]
    passou: bool
    detalhe: str


def _erro_em(metodo: MethodTag, base: ModelParams, delta: float, g: float, k: int, l: Optional[int]) -> float:
    ponto = base.com(delta=delta * base.omega, g=g * base.omega)
    return evaluate_cell({"params": ponto.model_dump(), "methods": [metodo.value], "k": k, "l": l})["errors"][metodo.value]


def check_claims(methods: Sequence[MethodTag], threshold: float = LIMIAR_PADRAO, k: int = 8,
                 omega: float = 1.0, l: Optional[int] = None, grids: Optional[Dict[MethodTag, ErrorGrid]] = None,
                 mapper: Optional[Mapper] = None) -> List[Claim]:
    """
    Avalia só as afirmações cujos métodos foram pedidos. Comparações com
    NaN nunca passam.
    """
    pedidos = {MethodTag(m) for m in methods}
    base = ModelParams(eps=0.0, delta=omega, g=0.0, omega=omega)
    claims: List[Claim] = []

    def registrar(nome: str, descricao: str, metodos: List[MethodTag], passou: bool, detalhe: str) -> None:
        claims.append(Claim(nome=nome, descricao=descricao, metodos=metodos, passou=bool(passou), detalhe=detalhe))
        log("ValidationService", f"Afirmação '{nome}': {'ok' if passou else 'FALHOU'} ({detalhe})")

    if MethodTag.VVP in pedidos:
        fraco_neg = _erro_em(MethodTag.VVP, base, 0.5, 0.1, k, l)
        fraco_pos = _erro_em(MethodTag.VVP, base, 1.5, 0.1, k, l)
        forte_pos = _erro_em(MethodTag.VVP, base, 1.5, 1.5, k, l)
        referencia = _erro_em(MethodTag.VVP, base, 0.2, 1.0, k, l)
        registrar(
            "vvp_dessintonia_negativa",
            "VVP é mais preciso em dessintonia negativa: erro(Δ=0.5, g=0.1) < erro(Δ=1.5, g=0.1)",
            [MethodTag.VVP], fraco_neg < fraco_pos, f"{fraco_neg:.3e} < {fraco_pos:.3e}",
        )
        registrar(
            "vvp_acoplamento_forte",
            "VVP melhora com acoplamento forte em dessintonia positiva: erro(Δ=1.5, g=1.5) < erro(Δ=1.5, g=0.1)",
            [MethodTag.VVP], forte_pos < fraco_pos, f"{forte_pos:.3e} < {fraco_pos:.3e}",
        )
        registrar(
            "vvp_valido_referencia",
            f"VVP é válido em (Δ=0.2, g=1.0) com limiar {threshold:g}·Ω",
            [MethodTag.VVP], referencia < threshold, f"{referencia:.3e} < {threshold:g}",
        )

    if MethodTag.JCM in pedidos:
        deltas = default_axes(omega)[0][1] / omega
        linha = (mapper or _mapear_serial)(evaluate_cell, [
            {"params": base.com(delta=d * omega, g=0.5 * omega).model_dump(), "methods": ["jcm"], "k": k}
            for d in deltas
        ])
        pior = float(np.nanmax([r["errors"]["jcm"] for r in linha]))
        registrar(
            "jcm_falha_g05",
            "JCM falha em g=0.5: algum erro da linha passa de 0.05·Ω",
            [MethodTag.JCM], pior > 0.05, f"máximo {pior:.3e} > 0.05",
        )

    if {MethodTag.GRWA, MethodTag.VVP} <= pedidos:
        grwa = _erro_em(MethodTag.GRWA, base, 1.0, 0.05, k, l)
        vvp = _erro_em(MethodTag.VVP, base, 1.0, 0.05, k, l)
        registrar(
            "grwa_preferivel_fraco",
            "GRWA supera VVP em acoplamento fraco na ressonância: erro_GRWA(Δ=1, g=0.05) < erro_VVP",
            [MethodTag.GRWA, MethodTag.VVP], grwa < vvp, f"{grwa:.3e} < {vvp:.3e}",
        )

    if MethodTag.EXACT in pedidos:
        if grids and MethodTag.EXACT in grids:
            celulas = grids[MethodTag.EXACT].cells
        else:
            celulas = np.array([_erro_em(MethodTag.EXACT, base, 1.0, 1.0, k, l)])
        nulo = bool(np.all(celulas == 0.0))
        registrar(
            "exato_autoconsistente",
            "O mapa do método exato contra o oráculo é identicamente nulo",
            [MethodTag.EXACT], nulo, f"máximo {float(np.max(celulas)):.1e}",
        )
    return claims


def summarize_grids(grids: Dict[MethodTag, ErrorGrid], threshold: float) -> List[Dict[str, Any]]:
    """Resumo por método: fração válida, erro máximo e células ausentes."""
    linhas = []
    for metodo, grade in grids.items():
        celulas = grade.cells
        finitas = celulas[np.isfinite(celulas)]
        linhas.append({
            "metodo": metodo.value,
            "celulas": int(celulas.size),
            "ausentes": int(celulas.size - finitas.size),
            "fracao_valida": float(np.mean(finitas < threshold)) if finitas.size else 0.0,
            "erro_maximo": float(np.max(finitas)) if finitas.size else None,
            "erro_mediano": float(np.median(finitas)) if finitas.size else None,
        })
    return linhas


# --- Estudo de convergência ---

def convergence_study(params: ModelParams, k: int = 8, tol: float = 1e-8,
                      n_max_cap: Optional[int] = None) -> List[Dict[str, Any]]:
    """
    Tabela da duplicação de n_max do oráculo: (n_max, desvio máximo dos k
    níveis contra o passo anterior em unidades de Ω, convergiu?).
    """
    convergido = model_service.converged_spectrum(params, k, tol, n_max_cap=n_max_cap)
    n_max = model_service.initial_n_max(params, k)
    linhas = []
    anterior = None
    while n_max <= convergido.n_max:
        energias = model_service.exact_levels(params, k, n_max).energies()
        desvio = math.nan if anterior is None else float(np.max(np.abs(energias - anterior))) / params.omega
        linhas.append({
            "n_max": n_max,
            "max_shift_over_omega": desvio,
            "converged": bool(anterior is not None and desvio < tol),
        })
        anterior = energias
        n_max *= 2
    return linhas


# --- Goldens ---

class GoldenSet(BaseModel):
    nome: str
    tipo: str
    params: ModelParams
    sweep: Optional[SweepSpec] = None
    descricao: str = ""


def _conjuntos() -> Dict[str, GoldenSet]:
    conjuntos: Dict[str, GoldenSet] = {}
    desloc = SweepSpec(parameter="omega-detuning", start=-0.8, stop=2.0, count=29)
    for i, g in enumerate((0.1, 0.5, 1.0, 1.5), start=1):
        conjuntos[f"fig{i:02d}"] = GoldenSet(
            nome=f"fig{i:02d}", tipo="spectrum", params=ModelParams(eps=0.0, delta=1.0, g=g),
            sweep=desloc, descricao=f"ε=0, g={g}, varredura em δ",
        )
    varredura_g = SweepSpec(parameter="g", start=0.0, stop=2.0, count=21)
    for i, delta in zip((5, 6, 7), (0.5, 1.0, 1.5)):
        conjuntos[f"fig{i:02d}"] = GoldenSet(
            nome=f"fig{i:02d}", tipo="spectrum", params=ModelParams(eps=0.0, delta=delta, g=0.0),
            sweep=varredura_g, descricao=f"ε=0, Δ={delta}, varredura em g",
        )
    conjuntos["fig09"] = GoldenSet(
        nome="fig09", tipo="spectrum", params=ModelParams(eps=0.0, delta=1.0, g=1.0),
        sweep=SweepSpec(parameter="eps", start=0.0, stop=3.0, count=31), descricao="g=1, Δ=1, varredura em ε",
    )
    for i, delta in zip((10, 11, 12), (0.5, 1.0, 1.5)):
        conjuntos[f"fig{i:02d}"] = GoldenSet(
            nome=f"fig{i:02d}", tipo="spectrum", params=ModelParams(eps=1.0, delta=delta, g=0.0),
            sweep=varredura_g, descricao=f"ε=1, Δ={delta}, varredura em g",
        )
    conjuntos["fig14"] = GoldenSet(
        nome="fig14", tipo="spectrum", params=ModelParams(eps=3.0, delta=1.5, g=0.0),
        sweep=varredura_g, descricao="ε=3, Δ=1.5, varredura em g",
    )
    raiz_meio = math.sqrt(0.5)
    dinamicas = {
        "fig15": (ModelParams(eps=0.0, delta=0.5, g=1.0), "ε=0, Δ=0.5, g=1"),
        "fig17": (ModelParams(eps=0.0, delta=0.5, g=2.0), "ε=0, Δ=0.5, g=2"),
        "fig19": (ModelParams(eps=raiz_meio, delta=raiz_meio, g=1.0), "ε=Δ=√0.5 (Δ_b=Ω), g=1"),
        "fig20": (ModelParams(eps=1.5, delta=0.5, g=1.0), "ε=1.5, Δ=0.5, g=1"),
    }
    for nome, (params, descricao) in dinamicas.items():
        conjuntos[nome] = GoldenSet(nome=nome, tipo="trace", params=params, descricao=descricao)
    return conjuntos


FIGURE_SETS = _conjuntos()
SUITES = {
    "espectros": [n for n, c in FIGURE_SETS.items() if c.tipo == "spectrum"],
    "dinamica": [n for n, c in FIGURE_SETS.items() if c.tipo == "trace"],
    "todos": list(FIGURE_SETS),
}
GOLDEN_K = 8
GOLDEN_TOL = 1e-10
GOLDEN_DINAMICA = DynamicsSpec(t_max=40.0, samples=201, beta_hbar_omega=10.0)


def resolve_suite(suite: str) -> List[GoldenSet]:
    if suite in SUITES:
        return [FIGURE_SETS[n] for n in SUITES[suite]]
    if suite in FIGURE_SETS:
        return [FIGURE_SETS[suite]]
    raise DomainError(f"Suíte desconhecida: '{suite}'. Opções: {sorted(SUITES) + sorted(FIGURE_SETS)}")


def golden_path(directory: str, nome: str) -> str:
    return os.path.join(directory, VERSAO_GOLDEN, f"{nome}.csv")


def _tabela_golden(conjunto: GoldenSet) -> Tuple[List[str], List[List[Any]], Dict[str, Any]]:
    metadata: Dict[str, Any] = {
        "golden": VERSAO_GOLDEN,
        "conjunto": conjunto.nome,
        "descricao": conjunto.descricao,
        "metodo": MethodTag.EXACT.value,
        "params": conjunto.params.model_dump(),
    }
    if conjunto.tipo == "spectrum":
        linhas, n_maxes = [], []
        for valor in conjunto.sweep.values():
            params = conjunto.sweep.apply(conjunto.params, float(valor))
            niveis = model_service.converged_spectrum(params, GOLDEN_K, GOLDEN_TOL)
            n_maxes.append(niveis.n_max)
            for nivel in niveis.entries:
                linhas.append([float(valor), nivel.index, nivel.energy / params.omega])
        metadata.update({"sweep": conjunto.sweep.model_dump(), "tolerancia": TOL_GOLDEN_NIVEIS, "n_max": n_maxes})
        return ["sweep_value", "level_index", "energy_over_omega"], linhas, metadata

    spec = InitialStateSpec(beta_hbar_omega=GOLDEN_DINAMICA.beta_hbar_omega)
    traco = dynamics_service.evolve(MethodTag.EXACT, conjunto.params, spec, GOLDEN_DINAMICA.times(conjunto.params.omega))
    linhas = [[float(t) * conjunto.params.omega, float(v)] for t, v in zip(traco.times, traco.values)]
    metadata.update({"dinamica": GOLDEN_DINAMICA.model_dump(), "tolerancia": TOL_GOLDEN_TRACOS, "n_max": traco.n_max})
    return ["t_omega", "sigma_z"], linhas, metadata


def pin_goldens(suite: str, directory: str, report: Optional[ReportService] = None) -> List[str]:
    """Grava os goldens convergidos da suíte; devolve os caminhos escritos."""
    report = report or ReportService()
    caminhos = []
    for conjunto in resolve_suite(suite):
        colunas, linhas, metadata = _tabela_golden(conjunto)
        caminho = golden_path(directory, conjunto.nome)
        report.write_table(caminho, colunas, linhas, metadata, "csv")
        log("ValidationService", f"Golden '{conjunto.nome}' gravado em {caminho}")
        caminhos.append(caminho)
    return caminhos


def compare_goldens(suite: str, directory: str, report: Optional[ReportService] = None) -> List[str]:
    """Recalcula a suíte e lista divergências além da tolerância (vazia = ok)."""
    report = report or ReportService()
    divergencias = []
    for conjunto in resolve_suite(suite):
        caminho = golden_path(directory, conjunto.nome)
        if not os.path.exists(caminho):
            divergencias.append(f"{conjunto.nome}: golden ausente em {caminho}")
            continue
        _, _, gravadas = report.read_table(caminho)
        _, atuais, _ = _tabela_golden(conjunto)
        tol = TOL_GOLDEN_NIVEIS if conjunto.tipo == "spectrum" else TOL_GOLDEN_TRACOS
        if len(gravadas) != len(atuais):
            divergencias.append(f"{conjunto.nome}: {len(gravadas)} linhas gravadas, {len(atuais)} calculadas")
            continue
        valores_g = np.array([r[-1] for r in gravadas], dtype=float)
        valores_a = np.array([r[-1] for r in atuais], dtype=float)
        desvio = float(np.max(np.abs(valores_g - valores_a))) if valores_a.size else 0.0
        if desvio > tol:
            divergencias.append(f"{conjunto.nome}: desvio {desvio:.3e} acima de {tol:.0e}")
    return divergencias
