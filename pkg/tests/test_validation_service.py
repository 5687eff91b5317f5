import math
import os

import numpy as np
import pytest
from unittest.mock import MagicMock

from app.core.errors import DegenerateDenominatorError, DomainError, UnsupportedRegimeError
from app.models import MethodTag, ModelParams
from app.services import validation_service
from app.services.report_service import ReportService

GOLDENS_DO_REPOSITORIO = os.path.join(os.path.dirname(__file__), "..", "goldens")


# Configuração de fixtures para testes
@pytest.fixture
def eixos_pequenos():
    return ("delta", np.array([0.3, 0.8])), ("g", np.array([0.1, 0.4]))


@pytest.fixture
def mapper_serial():
    return MagicMock(side_effect=lambda tarefa, itens: [tarefa(i) for i in itens])


class TestEspectroPorMetodo:

    def test_regime_nao_suportado(self):
        """Testa GRWA e JCM recusando ε ≠ 0"""
        params = ModelParams(eps=0.5, delta=1.0, g=0.1)
        for metodo in (MethodTag.GRWA, MethodTag.JCM):
            with pytest.raises(UnsupportedRegimeError):
                validation_service.check_supported(metodo, params)
        validation_service.check_supported(MethodTag.VVP, params)

    def test_grwa_truncado(self):
        """Testa GRWA devolvendo exatamente k níveis"""
        niveis = validation_service.method_levels(MethodTag.GRWA, ModelParams(delta=0.7, g=0.2), 5)
        assert len(niveis) == 5

    def test_spectrum_point(self):
        """Testa o payload de um ponto de varredura"""
        saida = validation_service.spectrum_point({
            "params": ModelParams(delta=0.5, g=0.3).model_dump(),
            "methods": ["vvp", "exact"],
            "k": 4,
        })
        assert set(saida["levels"]) == {"vvp", "exact"}
        assert len(saida["levels"]["exact"]) == 4
        assert saida["n_max"] > 0
        assert 0.0 < saida["validity_ratio"] < 0.25


class TestMapasDeErro:

    def test_exato_identicamente_nulo(self, eixos_pequenos):
        """Testa o mapa do oráculo contra ele mesmo"""
        grade = validation_service.error_map(MethodTag.EXACT, *eixos_pequenos, ModelParams(), k=4)
        assert grade.cells.shape == (2, 2)
        assert np.all(grade.cells == 0.0)
        assert grade.oracle_n_max > 0

    def test_grwa_com_vies_vira_ausente(self, eixos_pequenos):
        """Testa células NaN quando o método não cobre o ponto"""
        grade = validation_service.error_map(MethodTag.GRWA, *eixos_pequenos, ModelParams(eps=0.5), k=4)
        assert np.all(np.isnan(grade.cells))

    def test_mapper_injetado(self, eixos_pequenos, mapper_serial):
        """Testa que as células passam pelo mapper e o oráculo é compartilhado"""
        grades = validation_service.error_maps(
            [MethodTag.VVP, MethodTag.EXACT], *eixos_pequenos, ModelParams(), k=4, mapper=mapper_serial,
        )
        mapper_serial.assert_called_once()
        tarefa, itens = mapper_serial.call_args.args
        assert tarefa is validation_service.evaluate_cell
        assert len(itens) == 4
        assert set(grades) == {MethodTag.VVP, MethodTag.EXACT}
        assert np.all(np.isfinite(grades[MethodTag.VVP].cells))

    def test_eixo_desconhecido(self):
        """Testa a rejeição de eixos fora de eps, delta, g, omega"""
        with pytest.raises(DomainError):
            validation_service.error_map(MethodTag.VVP, ("beta", np.array([1.0])), ("g", np.array([0.1])), ModelParams())

    def test_linhas_em_unidades_de_omega(self, eixos_pequenos):
        """Testa error_grid_rows na ordem da grade"""
        grade = validation_service.error_map(MethodTag.EXACT, *eixos_pequenos, ModelParams(), k=2)
        linhas = validation_service.error_grid_rows(grade)
        assert linhas[0] == [0.3, 0.1, "exact", 0.0]
        assert linhas[-1][:2] == [0.8, 0.4]

    def test_resumo_das_grades(self, eixos_pequenos):
        """Testa frações, máximos e células ausentes"""
        grades = {
            MethodTag.GRWA: validation_service.error_map(MethodTag.GRWA, *eixos_pequenos, ModelParams(eps=0.5), k=2),
            MethodTag.EXACT: validation_service.error_map(MethodTag.EXACT, *eixos_pequenos, ModelParams(), k=2),
        }
        resumo = {r["metodo"]: r for r in validation_service.summarize_grids(grades, 0.02)}
        assert resumo["grwa"]["ausentes"] == 4
        assert resumo["grwa"]["erro_maximo"] is None
        assert resumo["exact"]["fracao_valida"] == 1.0

    def test_eixos_padrao(self):
        """Testa a grade padrão 40 × 40"""
        (n1, v1), (n2, v2) = validation_service.default_axes()
        assert (n1, n2) == ("delta", "g")
        assert v1.size == v2.size == 40
        assert v1[0] == pytest.approx(0.1) and v2[-1] == pytest.approx(2.0)
        with pytest.raises(DomainError):
            validation_service.default_axes(tamanho=1)


class TestRazaoDeValidade:

    def test_sem_acoplamento(self):
        """Testa razão nula em g = 0"""
        assert validation_service.validity_ratio(ModelParams(delta=0.5), 0, 8, 8) == 0.0

    def test_linear_em_delta(self):
        """Testa a escala linear com Δ"""
        r1 = validation_service.validity_ratio(ModelParams(delta=0.1, g=0.7), 0, 6, 6)
        r2 = validation_service.validity_ratio(ModelParams(delta=0.2, g=0.7), 0, 6, 6)
        assert r2 == pytest.approx(2.0 * r1, rel=1e-12)

    def test_acoplamento_forte(self):
        """Testa a supressão exponencial em g = 2Ω"""
        assert validation_service.validity_ratio(ModelParams(delta=0.5, g=2.0), 0, 8, 8) < 0.25

    def test_denominador_nulo(self):
        """Testa ε = Ω com l = 0"""
        with pytest.raises(DegenerateDenominatorError):
            validation_service.validity_ratio(ModelParams(eps=1.0, delta=0.5, g=0.3), 0, 4, 4)

    def test_razao_pequena_implica_erro_pequeno(self):
        """Testa erro VVP < 0.01·Ω nos 4 primeiros níveis onde a razão fica abaixo de 0.05"""
        validos = 0
        for delta in (0.05, 0.1, 0.2):
            for g in (0.1, 0.5, 1.0, 2.0):
                params = ModelParams(eps=0.0, delta=delta, g=g)
                if validation_service.validity_ratio(params, 0, 4, 4) >= 0.05:
                    continue
                validos += 1
                erro = validation_service.evaluate_cell({"params": params.model_dump(), "methods": ["vvp"], "k": 4})
                assert erro["errors"]["vvp"] < 0.01, (delta, g)
        assert validos > 0


class TestConvergencia:

    def test_tabela_de_duplicacao(self):
        """Testa n_max dobrando até o convergido"""
        linhas = validation_service.convergence_study(ModelParams(delta=0.5, g=0.5), k=4)
        assert math.isnan(linhas[0]["max_shift_over_omega"])
        assert linhas[0]["converged"] is False
        assert linhas[-1]["converged"] is True
        for anterior, atual in zip(linhas, linhas[1:]):
            assert atual["n_max"] == 2 * anterior["n_max"]


class TestAfirmacoes:

    def test_exato_sozinho(self):
        """Testa a única afirmação aplicável ao método exato"""
        claims = validation_service.check_claims([MethodTag.EXACT], k=4)
        assert [c.nome for c in claims] == ["exato_autoconsistente"]
        assert claims[0].passou is True

    def test_limiar_impossivel(self):
        """Testa a afirmação de referência falhando com limiar 1e−9"""
        claims = {c.nome: c for c in validation_service.check_claims([MethodTag.VVP], threshold=1e-9)}
        assert claims["vvp_valido_referencia"].passou is False


class TestGoldens:

    def test_suite_desconhecida(self):
        """Testa a rejeição de suítes inexistentes"""
        with pytest.raises(DomainError):
            validation_service.resolve_suite("fig99")

    def test_suites(self):
        """Testa os conjuntos de espectros e dinâmica"""
        assert "fig03" in validation_service.SUITES["espectros"]
        assert "fig15" in validation_service.SUITES["dinamica"]
        assert validation_service.FIGURE_SETS["fig19"].params.delta_b == pytest.approx(1.0)

    def test_regenera_identico(self, tmp_path):
        """Testa o golden do conjunto fig03 gravado duas vezes com bytes iguais"""
        caminho = validation_service.pin_goldens("fig03", str(tmp_path))[0]
        assert caminho == os.path.join(str(tmp_path), "v1", "fig03.csv")
        primeiro = open(caminho, "rb").read()
        validation_service.pin_goldens("fig03", str(tmp_path))
        assert open(caminho, "rb").read() == primeiro
        assert validation_service.compare_goldens("fig03", str(tmp_path)) == []

    def test_detecta_alteracao(self, tmp_path):
        """Testa a divergência acusada num golden adulterado"""
        report = ReportService()
        caminho = validation_service.pin_goldens("fig01", str(tmp_path), report)[0]
        metadata, colunas, linhas = report.read_table(caminho)
        metadata.pop("rabivv")
        linhas[0][-1] += 1e-6
        report.write_table(caminho, colunas, linhas, metadata)
        divergencias = validation_service.compare_goldens("fig01", str(tmp_path), report)
        assert len(divergencias) == 1
        assert divergencias[0].startswith("fig01")

    def test_golden_ausente(self, tmp_path):
        """Testa a divergência quando o arquivo não existe"""
        assert "ausente" in validation_service.compare_goldens("fig15", str(tmp_path))[0]

    def test_goldens_de_dinamica(self, tmp_path):
        """Testa os goldens de traço dos conjuntos fig15 e fig19"""
        for nome in ("fig15", "fig19"):
            caminho = validation_service.pin_goldens(nome, str(tmp_path))[0]
            _, colunas, linhas = ReportService().read_table(caminho)
            assert colunas == ["t_omega", "sigma_z"]
            assert len(linhas) == validation_service.GOLDEN_DINAMICA.samples
            assert linhas[0][1] == pytest.approx(1.0, abs=1e-8)

    def test_goldens_versionados_completos(self):
        """Testa um golden versionado por conjunto, com as linhas esperadas"""
        for conjunto in validation_service.resolve_suite("todos"):
            caminho = validation_service.golden_path(GOLDENS_DO_REPOSITORIO, conjunto.nome)
            metadata, colunas, linhas = ReportService().read_table(caminho)
            assert metadata["conjunto"] == conjunto.nome
            if conjunto.tipo == "spectrum":
                assert colunas[-1] == "energy_over_omega"
                assert len(linhas) == conjunto.sweep.count * validation_service.GOLDEN_K
            else:
                assert colunas == ["t_omega", "sigma_z"]
                assert len(linhas) == validation_service.GOLDEN_DINAMICA.samples
                assert linhas[0][1] == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.slow
    def test_confere_goldens_versionados(self):
        """Testa a suíte completa contra os goldens versionados em goldens/v1"""
        assert validation_service.compare_goldens("todos", GOLDENS_DO_REPOSITORIO) == []
