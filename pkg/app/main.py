# app/main.py
# CLI em lote do RabiVV: varreduras de espectro, dinâmica, picos de Fourier,
# grades de validação, goldens e estudo de convergência.

import functools
import os
from typing import Any, Callable, Dict, List, Optional

import click
import numpy as np
from dotenv import dotenv_values

from app import __version__
from app.core.config import get_settings
from app.core.errors import RabiVVError
from app.core.logs import log
from app.core.performance import cronometro
from app.models import DynamicsSpec, InitialStateSpec, MethodTag, ModelParams, RunConfig, SweepSpec
from app.services import dynamics_service, validation_service
from app.services.pool_service import WorkPool
from app.services.report_service import ReportService

report_service = ReportService()

METODOS_DINAMICA = (MethodTag.EXACT, MethodTag.VVP, MethodTag.ADIABATIC, MethodTag.JCM)


# --- Infraestrutura da CLI ---

def _sair(codigo: int, motivo: Any) -> None:
    primeira_linha = str(motivo).strip().splitlines()[0] if str(motivo).strip() else type(motivo).__name__
    click.echo(f"Erro: {primeira_linha}", err=True)
    click.get_current_context().exit(codigo)


def _tratar_erros(func: Callable) -> Callable:
    """Entrada inválida ou combinação sem suporte: código 2; falha numérica: 1."""
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except click.exceptions.Exit:
            raise
        except ValueError as e:
            _sair(2, e)
        except (RabiVVError, RuntimeError, ArithmeticError) as e:
            log("Main", f"Falha numérica: {e}", "ERROR")
            _sair(1, e)
    return wrapper


def _opcoes_modelo(func: Callable) -> Callable:
    opcoes = [
        click.option("--eps", type=float, default=0.0, show_default=True, help="Viés ε (unidades absolutas)."),
        click.option("--delta", type=float, default=1.0, show_default=True, help="Tunelamento Δ."),
        click.option("--g", "g", type=float, default=0.0, show_default=True, help="Acoplamento g."),
        click.option("--omega", type=float, default=1.0, show_default=True, help="Frequência do oscilador Ω."),
        click.option("--tol", type=float, default=1e-8, show_default=True, help="Tolerância do oráculo em unidades de Ω."),
    ]
    for opcao in reversed(opcoes):
        func = opcao(func)
    return func


_opcao_l = click.option("--l", "l_override", type=int, default=None,
                        help="Força o índice l do dubleto (VVP/adiabático).")


def _opcoes_saida(func: Callable) -> Callable:
    opcoes = [
        click.option("--output", "output_path", type=click.Path(dir_okay=False), default=None,
                     help="Arquivo de saída (padrão: stdout)."),
        click.option("--format", "output_format", type=click.Choice(["csv", "json"], case_sensitive=False),
                     default="csv", show_default=True),
    ]
    for opcao in reversed(opcoes):
        func = opcao(func)
    return func


def _pool(ctx: click.Context) -> WorkPool:
    return WorkPool(workers=ctx.obj.get("workers"))


def _metadata(config: RunConfig, n_max: Any, **extra: Any) -> Dict[str, Any]:
    return {"comando": config.command, "config": config.resumo(), "n_max": n_max, **extra}


def _emitir(config: RunConfig, colunas: List[str], linhas: List[List[Any]], metadata: Dict[str, Any],
            path: Optional[str] = None) -> None:
    path = path if path is not None else config.output_path
    conteudo = report_service.write_table(path, colunas, linhas, metadata, config.output_format)
    if not path:
        click.echo(conteudo, nl=False)


def _params(eps: float, delta: float, g: float, omega: float) -> ModelParams:
    return ModelParams(eps=eps, delta=delta, g=g, omega=omega)


def _exigir_dinamica(metodos: List[MethodTag], params: ModelParams) -> None:
    for metodo in metodos:
        if metodo not in METODOS_DINAMICA:
            raise ValueError(f"Método '{metodo.value}' não suporta dinâmica (use exact, vvp, adiabatic ou jcm).")
        validation_service.check_supported(metodo, params)


# --- Grupo ---

@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Arquivo chave=valor com padrões para as opções.")
@click.option("--workers", type=int, default=None, help="Tamanho do pool (padrão: RABIVV_POOL_SIZE).")
@click.version_option(__version__, prog_name="rabivv")
@click.pass_context
def cli(ctx: click.Context, config_path: Optional[str], workers: Optional[int]):
    """RabiVV: espectro e dinâmica do modelo de Rabi quântico."""
    ctx.ensure_object(dict)
    if config_path:
        valores = {
            chave.strip().lower().replace("-", "_"): valor
            for chave, valor in dotenv_values(config_path).items()
            if valor is not None
        }
        if workers is None and "workers" in valores:
            workers = int(valores.pop("workers"))
        # flags explícitas continuam vencendo os valores do arquivo
        ctx.default_map = {nome: valores for nome in cli.commands}
        log("Main", f"Configuração lida de {config_path}: {sorted(valores)}", "DEBUG")
    ctx.obj["workers"] = workers


# --- spectrum ---

@cli.command()
@_opcoes_modelo
@_opcao_l
@click.option("--methods", default="vvp,exact", show_default=True, help="Lista separada por vírgulas.")
@click.option("--levels", type=int, default=8, show_default=True)
@click.option("--sweep", "sweep_texto", default=None, help="nome:início:fim:quantidade (eps, delta, g, omega-detuning).")
@_opcoes_saida
@click.pass_context
@_tratar_erros
def spectrum(ctx, eps, delta, g, omega, l_override, tol, methods, levels, sweep_texto, output_path, output_format):
    """Níveis de energia por método ao longo de uma varredura."""
    config = RunConfig(
        command="spectrum", params=_params(eps, delta, g, omega), methods=methods, levels=levels,
        sweep=SweepSpec.parse(sweep_texto) if sweep_texto else None, l_override=l_override, tol=tol,
        output_path=output_path, output_format=output_format,
    )
    if config.sweep:
        nome_varredura = config.sweep.parameter
        valores = [float(v) for v in config.sweep.values()]
        pontos = [config.sweep.apply(config.params, v) for v in valores]
    else:
        nome_varredura, valores, pontos = "none", [0.0], [config.params]

    # combinações sem suporte saem antes de qualquer cálculo
    for ponto in pontos:
        for metodo in config.methods:
            validation_service.check_supported(metodo, ponto)

    payloads = [{
        "params": ponto.model_dump(),
        "methods": [m.value for m in config.methods],
        "k": config.levels,
        "l": config.l_override,
        "tol": config.tol,
    } for ponto in pontos]

    with cronometro("Main", f"spectrum com {len(payloads)} pontos"):
        resultados = _pool(ctx).map(validation_service.spectrum_point, payloads)

    linhas = []
    for valor, resultado in zip(valores, resultados):
        for metodo in config.methods:
            for indice, (rotulo, energia) in enumerate(resultado["levels"][metodo.value]):
                linhas.append([nome_varredura, valor, metodo.value, indice, rotulo, energia])

    extra = {}
    if MethodTag.VVP in config.methods:
        extra["validity_ratio"] = [r["validity_ratio"] for r in resultados]
    _emitir(
        config,
        ["sweep_param", "sweep_value", "method", "level_index", "label", "energy_over_omega"],
        linhas,
        _metadata(config, [r["n_max"] for r in resultados], **extra),
    )


# --- dynamics ---

def _opcoes_dinamica(func: Callable) -> Callable:
    opcoes = [
        click.option("--t-max", "t_max", type=float, default=40.0, show_default=True, help="Tempo final em unidades de 1/Ω."),
        click.option("--samples", type=int, default=401, show_default=True),
        click.option("--beta-hbar-omega", "beta_hbar_omega", type=float, default=10.0, show_default=True),
    ]
    for opcao in reversed(opcoes):
        func = opcao(func)
    return func


@cli.command()
@_opcoes_modelo
@_opcao_l
@click.option("--methods", default="exact,vvp", show_default=True)
@_opcoes_dinamica
@_opcoes_saida
@click.pass_context
@_tratar_erros
def dynamics(ctx, eps, delta, g, omega, l_override, tol, methods, t_max, samples, beta_hbar_omega,
             output_path, output_format):
    """⟨σ_z(t)⟩ a partir de |↑⟩ com o oscilador térmico."""
    config = RunConfig(
        command="dynamics", params=_params(eps, delta, g, omega), methods=methods, l_override=l_override,
        tol=tol, dynamics=DynamicsSpec(t_max=t_max, samples=samples, beta_hbar_omega=beta_hbar_omega),
        output_path=output_path, output_format=output_format,
    )
    _exigir_dinamica(config.methods, config.params)

    payloads = [{
        "params": config.params.model_dump(),
        "method": metodo.value,
        "dynamics": config.dynamics.model_dump(),
        "l": config.l_override,
    } for metodo in config.methods]
    with cronometro("Main", f"dynamics para {len(payloads)} métodos"):
        tracos = _pool(ctx).map(dynamics_service.trace_point, payloads)

    omega_ = config.params.omega
    linhas = []
    for metodo, traco in zip(config.methods, tracos):
        for t, valor in zip(traco["times"], traco["values"]):
            linhas.append([t * omega_, metodo.value, valor])
    n_max = {m.value: t["n_max"] for m, t in zip(config.methods, tracos)}
    _emitir(config, ["t_omega", "method", "sigma_z"], linhas, _metadata(config, n_max))


# --- fourier ---

def _caminho_amostrado(path: str) -> str:
    raiz, extensao = os.path.splitext(path)
    return f"{raiz}.sampled{extensao or '.csv'}"


@cli.command()
@_opcoes_modelo
@_opcao_l
@click.option("--methods", default="exact,vvp", show_default=True)
@_opcoes_dinamica
@click.option("--amp-cutoff", "amp_cutoff", type=float, default=1e-4, show_default=True)
@click.option("--eta", type=float, default=0.01, show_default=True, help="Amortecimento da transformada amostrada (unidades de Ω).")
@click.option("--nu-max", "nu_max", type=float, default=3.0, show_default=True, help="Maior ν/Ω da grade amostrada.")
@click.option("--nu-samples", "nu_samples", type=int, default=601, show_default=True)
@click.option("--sampled/--no-sampled", default=False, show_default=True, help="Inclui a transformada amostrada F(ν).")
@_opcoes_saida
@click.pass_context
@_tratar_erros
def fourier(ctx, eps, delta, g, omega, l_override, tol, methods, t_max, samples, beta_hbar_omega,
            amp_cutoff, eta, nu_max, nu_samples, sampled, output_path, output_format):
    """Picos (ω, A) de ⟨σ_z(t)⟩ e, opcionalmente, a transformada amostrada."""
    config = RunConfig(
        command="fourier", params=_params(eps, delta, g, omega), methods=methods, l_override=l_override, tol=tol,
        dynamics=DynamicsSpec(t_max=t_max, samples=samples, beta_hbar_omega=beta_hbar_omega,
                              eta=eta, amp_cutoff=amp_cutoff),
        output_path=output_path, output_format=output_format,
    )
    _exigir_dinamica(config.methods, config.params)
    if nu_samples < 2 or nu_max <= 0:
        raise ValueError("--nu-samples precisa ser >= 2 e --nu-max positivo.")

    estado = InitialStateSpec(beta_hbar_omega=beta_hbar_omega)
    linhas, n_max = [], {}
    with cronometro("Main", f"fourier para {len(config.methods)} métodos"):
        for metodo in config.methods:
            espectro = dynamics_service.fourier_peaks(metodo, config.params, estado, amp_cutoff, l=config.l_override)
            n_max[metodo.value] = espectro.n_max
            for pico in espectro.peaks:
                linhas.append([metodo.value, pico.frequency, pico.amplitude, pico.group, pico.label])
    _emitir(
        config,
        ["method", "omega_over_Omega", "amplitude", "group", "label"],
        linhas,
        _metadata(config, n_max),
    )

    if not sampled:
        return
    omega_ = config.params.omega
    nu = np.linspace(0.0, nu_max, nu_samples)
    amostradas = []
    for metodo in config.methods:
        traco = dynamics_service.evolve(metodo, config.params, estado, config.dynamics.times(omega_), l=config.l_override)
        transformada = dynamics_service.sampled_transform(traco, nu * omega_, eta * omega_)
        amostradas.extend([metodo.value, float(v), float(f)] for v, f in zip(nu, transformada))
    caminho = _caminho_amostrado(config.output_path) if config.output_path else None
    _emitir(config, ["method", "nu_over_Omega", "F"], amostradas,
            _metadata(config, n_max, bloco="sampled"), path=caminho)


# --- validate ---

@cli.command()
@click.option("--methods", default="vvp,grwa,adiabatic,jcm", show_default=True)
@click.option("--eps", type=float, default=0.0, show_default=True, help="ε fixo da grade.")
@click.option("--omega", type=float, default=1.0, show_default=True)
@click.option("--threshold", type=float, default=validation_service.LIMIAR_PADRAO, show_default=True,
              help="Erro máximo (unidades de Ω) para um método ser válido.")
@click.option("--grid-size", "grid_size", type=int, default=40, show_default=True)
@click.option("--levels", type=int, default=8, show_default=True)
@click.option("--l", "l_override", type=int, default=None)
@click.option("--tol", type=float, default=1e-8, show_default=True)
@click.option("--output-dir", "output_dir", type=click.Path(file_okay=False), default="validacao", show_default=True)
@click.pass_context
@_tratar_erros
def validate(ctx, methods, eps, omega, threshold, grid_size, levels, l_override, tol, output_dir):
    """Grades de erro contra o oráculo e verificação das afirmações qualitativas."""
    if threshold <= 0:
        raise ValueError("--threshold precisa ser positivo.")
    fixo = ModelParams(eps=eps, delta=omega, g=0.0, omega=omega)
    config = RunConfig(command="validate", params=fixo, methods=methods, levels=levels,
                       l_override=l_override, tol=tol, output_path=output_dir)
    for metodo in config.methods:
        validation_service.check_supported(metodo, fixo)

    pool = _pool(ctx)
    eixo1, eixo2 = validation_service.default_axes(omega, grid_size)
    with cronometro("Main", f"validate em grade {grid_size}x{grid_size}"):
        grades = validation_service.error_maps(config.methods, eixo1, eixo2, fixo, levels, tol=tol,
                                               l=l_override, mapper=pool.map)
        claims = validation_service.check_claims(config.methods, threshold, levels, omega, l_override,
                                                 grids=grades, mapper=pool.map)

    arquivos = []
    for metodo, grade in grades.items():
        caminho = os.path.join(output_dir, f"erro_{metodo.value}.csv")
        report_service.write_table(
            caminho,
            [f"{grade.axis1_name}_over_omega", f"{grade.axis2_name}_over_omega", "method", "max_error_over_omega"],
            validation_service.error_grid_rows(grade),
            _metadata(config, grade.oracle_n_max, threshold=threshold),
        )
        arquivos.append(caminho)

    caminho_claims = os.path.join(output_dir, "afirmacoes.csv")
    report_service.write_table(
        caminho_claims,
        ["claim", "methods", "passed", "detail"],
        [[c.nome, "+".join(m.value for m in c.metodos), c.passou, c.detalhe] for c in claims],
        _metadata(config, None, threshold=threshold),
    )
    arquivos.append(caminho_claims)

    report_service.write_validation_report(output_dir, {
        "eixo1": f"{eixo1[0]}/Ω", "eixo2": f"{eixo2[0]}/Ω", "n1": grid_size, "n2": grid_size,
        "k": levels, "threshold": threshold,
        "resumo": validation_service.summarize_grids(grades, threshold),
        "claims": [c.model_dump() for c in claims],
        "arquivos": [os.path.basename(a) for a in arquivos],
    })

    falhas = [c for c in claims if not c.passou]
    if falhas:
        _sair(1, f"{len(falhas)} afirmação(ões) falharam: {', '.join(c.nome for c in falhas)}")
    log("Main", f"Validação ok: {len(claims)} afirmações verificadas.")


# --- goldens ---

@cli.command()
@click.option("--suite", default="todos", show_default=True, help="espectros, dinamica, todos ou um conjunto (ex. fig03).")
@click.option("--dir", "directory", type=click.Path(file_okay=False), default=None, help="Padrão: RABIVV_GOLDEN_DIR.")
@click.option("--check", is_flag=True, default=False, help="Compara em vez de gravar.")
@click.pass_context
@_tratar_erros
def goldens(ctx, suite, directory, check):
    """Grava ou confere os goldens de regressão."""
    directory = directory or get_settings().golden_dir
    if not check:
        caminhos = validation_service.pin_goldens(suite, directory, report_service)
        for caminho in caminhos:
            click.echo(caminho)
        return
    divergencias = validation_service.compare_goldens(suite, directory, report_service)
    for linha in divergencias:
        log("Main", linha, "ERROR")
    if divergencias:
        _sair(1, f"{len(divergencias)} golden(s) divergentes na suíte '{suite}'.")
    log("Main", f"Goldens da suíte '{suite}' conferem.")


# --- convergence ---

@cli.command()
@_opcoes_modelo
@click.option("--levels", type=int, default=8, show_default=True)
@_opcoes_saida
@click.pass_context
@_tratar_erros
def convergence(ctx, eps, delta, g, omega, tol, levels, output_path, output_format):
    """Tabela da duplicação de n_max do oráculo para um ponto."""
    config = RunConfig(command="convergence", params=_params(eps, delta, g, omega), levels=levels, tol=tol,
                       output_path=output_path, output_format=output_format)
    tabela = validation_service.convergence_study(config.params, levels, tol)
    linhas = [[t["n_max"], t["max_shift_over_omega"], t["converged"]] for t in tabela]
    _emitir(config, ["n_max", "max_shift_over_omega", "converged"], linhas,
            _metadata(config, [t["n_max"] for t in tabela]))


if __name__ == "__main__":
    cli()
