import math

import numpy as np
import pytest
from pydantic import ValidationError

from app.core.errors import DegenerateDenominatorError, DomainError, TruncationError
from app.models import DoubletIndex, DoubletSolution, FockTruncation, MethodTag, ModelParams, Spin
from app.services import model_service, vvp_service

# desdobramento exato medido em ε=0, Δ=0.5, g=0.5: 0.0183·Ω
LIMIAR_DESDOBRAMENTO_ORACULO = 0.025


class TestEscolhaDeL:

    @pytest.mark.parametrize("eps, esperado", [(0.0, 0), (0.4, 0), (1.5, 2), (-1.5, -2), (2.49, 2), (-0.6, -1)])
    def test_arredondamento(self, eps, esperado):
        """Testa round(ε/Ω) com meio-inteiros afastando do zero"""
        assert vvp_service.choose_l(ModelParams(eps=eps, delta=0.5)) == esperado

    def test_em_unidades_de_omega(self):
        """Testa que l usa ε/Ω e não ε"""
        assert vvp_service.choose_l(ModelParams(eps=3.0, delta=0.5, omega=2.0)) == 2


class TestSegundaOrdem:

    def test_corte_explicito_converge(self):
        """Testa a soma adaptativa contra um corte fixo longo"""
        params = ModelParams(eps=0.2, delta=0.6, g=0.4)
        adaptativa = vvp_service.epsilon2(Spin.DOWN, 1, params, 0)
        explicita = vvp_service.epsilon2(Spin.DOWN, 1, params, 0, k_cut=200)
        assert adaptativa == pytest.approx(explicita, abs=1e-12)

    def test_cancelamento_sem_vies(self):
        """Testa ε⁽²⁾_↓ = −ε⁽²⁾_↑ em ε = 0, l = 0"""
        params = ModelParams(eps=0.0, delta=0.5, g=0.7)
        for j in range(4):
            sol = vvp_service.doublet_solution(params, j, 0)
            assert sol.eps2_down == -sol.eps2_up
            assert sol.theta == math.pi / 2

    def test_denominador_degenerado(self):
        """Testa l inconsistente com ε (ε = Ω com l = 0)"""
        params = ModelParams(eps=1.0, delta=0.5, g=0.3)
        with pytest.raises(DegenerateDenominatorError):
            vvp_service.epsilon2(Spin.DOWN, 0, params, 0)

    def test_j_negativo(self):
        """Testa a rejeição de j < 0"""
        with pytest.raises(DomainError):
            vvp_service.epsilon2(Spin.UP, -1, ModelParams(delta=0.5), 0)


class TestDubletos:

    def test_sem_tunelamento(self):
        """Testa Δ = 0: as energias voltam às não perturbadas e Θ = 0"""
        params = ModelParams(eps=0.3, delta=0.0, g=0.5)
        sol = vvp_service.doublet_solution(params, 1, 0)
        assert sol.theta == 0.0
        assert sol.energy_minus == pytest.approx(vvp_service.unperturbed_energy(Spin.UP, 1, params), abs=1e-14)
        assert sol.energy_plus == pytest.approx(vvp_service.unperturbed_energy(Spin.DOWN, 1, params), abs=1e-14)

    def test_angulo_com_vies_negativo(self):
        """Testa Θ ∈ (π/2, π] quando o denominador é negativo"""
        sol = vvp_service.doublet_solution(ModelParams(eps=-0.3, delta=0.5, g=0.3), 0, 0)
        assert math.pi / 2 < sol.theta <= math.pi

    def test_degenerescencia_no_zero_de_laguerre(self):
        """Testa E_{+,1} = E_{−,1} em ε = 0, g/Ω = 0.5"""
        params = ModelParams(eps=0.0, delta=0.5, g=0.5)
        sol = vvp_service.doublet_solution(params, 1, 0)
        assert abs(sol.energy_plus - sol.energy_minus) <= 1e-14
        exatas = model_service.converged_spectrum(params, 8).energies()
        assert exatas[3] - exatas[2] < LIMIAR_DESDOBRAMENTO_ORACULO

    def test_frequencias_iguais_em_alpha_4(self):
        """Testa Ω_0^0 = Ω_2^0 em g = Ω (L_2(4) = 1)"""
        params = ModelParams(eps=0.0, delta=0.5, g=1.0)
        w0 = vvp_service.doublet_solution(params, 0, 0).omega_jl
        w2 = vvp_service.doublet_solution(params, 2, 0).omega_jl
        assert w0 == pytest.approx(w2, rel=1e-14)

    def test_rotulos_sem_parceiro(self):
        """Testa os níveis ↑ sem parceiro para l > 0"""
        niveis = vvp_service.vvp_levels(ModelParams(eps=2.0, delta=0.4, g=0.2), 12)
        assert "unpaired(up,0)" in niveis.labels()
        assert "unpaired(up,1)" in niveis.labels()
        assert niveis.method == MethodTag.VVP

    def test_fraco_contra_oraculo(self):
        """Testa concordância com o oráculo para Δ pequeno"""
        params = ModelParams(eps=0.0, delta=0.05, g=0.5)
        erro = np.abs(vvp_service.vvp_levels(params, 8).energies() - model_service.converged_spectrum(params, 8).energies())
        assert np.max(erro) < 1e-3

    def test_identidade_do_gap(self):
        """Testa E_{+,j} − E_{−,j} = Ω_j^l em sorteios aleatórios"""
        rng = np.random.default_rng(11)
        for _ in range(25):
            params = ModelParams(
                eps=float(rng.uniform(0.0, 2.5)), delta=float(rng.uniform(0.05, 1.0)), g=float(rng.uniform(0.0, 2.0))
            )
            j = int(rng.integers(0, 6))
            sol = vvp_service.doublet_solution(params, j, vvp_service.choose_l(params))
            assert sol.energy_plus - sol.energy_minus == pytest.approx(sol.omega_jl, rel=1e-12, abs=1e-12)

    def test_theta_nulo_so_desacoplado(self):
        """Testa Θ = 0 aceito apenas com Δ_j^(j+l) = 0"""
        campos = dict(index=DoubletIndex(j=0, l=0), eps2_down=0.0, eps2_up=0.0, omega_jl=0.3,
                      theta=0.0, energy_minus=-0.15, energy_plus=0.15)
        assert DoubletSolution(delta_jl=0.0, **campos).theta == 0.0
        with pytest.raises(ValidationError):
            DoubletSolution(delta_jl=0.1, **campos)

    def test_robustez_em_l_com_vies_semi_inteiro(self):
        """Testa os 6 primeiros níveis com l = 1 e l = 2 em ε = 1.5Ω"""
        params = ModelParams(eps=1.5, delta=0.5, g=1.0)
        l1 = vvp_service.vvp_levels(params, 6, l=1).energies()
        l2 = vvp_service.vvp_levels(params, 6, l=2).energies()
        assert np.max(np.abs(l1 - l2)) < 0.02


class TestFormasFechadas:

    @pytest.mark.parametrize("alpha", [0.25, 1.0, 4.0, 9.0])
    def test_estado_fundamental(self, alpha):
        """Testa E_{∓,0} fechado contra a soma direta"""
        params = ModelParams(eps=0.0, delta=0.5, g=math.sqrt(alpha) / 2)
        fechado = vvp_service.closed_form_levels(params)
        sol = vvp_service.doublet_solution(params, 0, 0)
        assert fechado["minus_0"] == pytest.approx(sol.energy_minus, abs=1e-10)
        assert fechado["plus_0"] == pytest.approx(sol.energy_plus, abs=1e-10)

    def test_primeiro_excitado_alpha_pequeno(self):
        """Testa E_{∓,1} fechado contra a soma direta com α pequeno"""
        params = ModelParams(eps=0.0, delta=0.5, g=0.05)
        fechado = vvp_service.closed_form_levels(params)
        sol = vvp_service.doublet_solution(params, 1, 0)
        assert fechado["minus_1"] == pytest.approx(sol.energy_minus, abs=1e-6)
        assert fechado["plus_1"] == pytest.approx(sol.energy_plus, abs=1e-6)

    def test_exige_sem_vies(self):
        """Testa a rejeição de ε ≠ 0"""
        with pytest.raises(DomainError):
            vvp_service.closed_form_levels(ModelParams(eps=0.5, delta=0.5, g=0.2))


class TestGerador:

    def test_primeira_ordem_antissimetrica(self):
        """Testa T1 antissimétrico e nulo entre parceiros do dubleto"""
        params = ModelParams(eps=0.0, delta=0.5, g=0.4)
        assert vvp_service.s_matrix_element(1, (Spin.DOWN, 0), (Spin.UP, 0), params, 0) == 0.0
        a = vvp_service.s_matrix_element(1, (Spin.DOWN, 0), (Spin.UP, 1), params, 0)
        b = vvp_service.s_matrix_element(1, (Spin.UP, 1), (Spin.DOWN, 0), params, 0)
        assert a != 0.0
        assert a == pytest.approx(-b, abs=1e-14)

    def test_segunda_ordem_antissimetrica(self):
        """Testa T2 antissimétrico entre estados do mesmo spin"""
        params = ModelParams(eps=0.0, delta=0.5, g=0.4)
        a = vvp_service.s_matrix_element(2, (Spin.DOWN, 0), (Spin.DOWN, 1), params, 0)
        b = vvp_service.s_matrix_element(2, (Spin.DOWN, 1), (Spin.DOWN, 0), params, 0)
        assert a == pytest.approx(-b, abs=1e-10)

    def test_combinacoes_invalidas(self):
        """Testa ordem e spins inconsistentes"""
        params = ModelParams(eps=0.0, delta=0.5, g=0.4)
        with pytest.raises(DomainError):
            vvp_service.s_matrix_element(1, (Spin.DOWN, 0), (Spin.DOWN, 1), params, 0)
        with pytest.raises(DomainError):
            vvp_service.s_matrix_element(2, (Spin.DOWN, 0), (Spin.UP, 1), params, 0)
        with pytest.raises(DomainError):
            vvp_service.s_matrix_element(3, (Spin.DOWN, 0), (Spin.DOWN, 1), params, 0)


class TestEstados:

    def test_ordens_baixas(self):
        """Testa Φ⁽⁰⁾ normalizado e Φ⁽¹⁾ ortogonal a ele"""
        params = ModelParams(eps=0.0, delta=0.3, g=0.4)
        estado = vvp_service.vvp_state(params, "-", 0, 0, FockTruncation(n_max=40))
        assert estado.order0.shape == (80,)
        assert np.linalg.norm(estado.order0) == pytest.approx(1.0, abs=1e-9)
        assert abs(float(estado.order0 @ estado.order1)) < 1e-9
        assert estado.label == "doublet(-,0,0)"

    def test_defeito_de_norma_cubico(self):
        """Testa o defeito de norma caindo como Δ³ na ressonância ε = 0, g = Ω"""
        defeitos = []
        for delta in (0.2, 0.1, 0.05):
            params = ModelParams(eps=0.0, delta=delta, g=1.0)
            estado = vvp_service.vvp_state(params, "-", 0, 0, FockTruncation(n_max=40))
            defeitos.append(estado.norm_defect)
        assert 6.0 <= defeitos[0] / defeitos[1] <= 10.0
        assert 6.0 <= defeitos[1] / defeitos[2] <= 10.0

    @pytest.mark.parametrize("delta", [0.2, 0.5])
    def test_fundamental_contra_oraculo(self, delta):
        """Testa |⟨Φ_exato|Φ_vvp⟩| >= 0.999 para o fundamental em ε = 0, g = Ω"""
        params = ModelParams(eps=0.0, delta=delta, g=1.0)
        trunc = FockTruncation(n_max=40)
        estado = vvp_service.vvp_state(params, "-", 0, 0, trunc)
        _, vetores = model_service.exact_eigs(model_service.build_hamiltonian(params, trunc), 1)
        total = estado.total
        assert abs(float(vetores[:, 0] @ total)) / np.linalg.norm(total) >= 0.999

    def test_segunda_ordem_na_ressonancia(self):
        """Testa S⁽²⁾ finito em ε = lΩ, onde E_n − E_parceiro(n) se anula"""
        params = ModelParams(eps=1.0, delta=0.3, g=0.5)
        a = vvp_service.s_matrix_element(2, (Spin.UP, 1), (Spin.UP, 3), params, 1)
        b = vvp_service.s_matrix_element(2, (Spin.UP, 3), (Spin.UP, 1), params, 1)
        assert math.isfinite(a)
        assert a == pytest.approx(-b, abs=1e-10)

    def test_sem_parceiro(self):
        """Testa o estado sem parceiro e ramos inválidos"""
        params = ModelParams(eps=1.0, delta=0.3, g=0.3)
        estado = vvp_service.vvp_state(params, "unpaired", 0, 1, FockTruncation(n_max=40))
        assert estado.label == "unpaired(up,0)"
        with pytest.raises(DomainError):
            vvp_service.vvp_state(params, "unpaired", 3, 1, FockTruncation(n_max=40))
        with pytest.raises(DomainError):
            vvp_service.vvp_state(params, "x", 0, 1, FockTruncation(n_max=40))

    def test_exige_tunelamento(self):
        """Testa Δ = 0 sem ângulo de mistura definido"""
        with pytest.raises(DomainError):
            vvp_service.vvp_state(ModelParams(g=0.3), "-", 0, 0, FockTruncation(n_max=20))

    def test_autosistema_quase_ortonormal(self):
        """Testa a base aproximada próxima de ortonormal"""
        params = ModelParams(eps=0.0, delta=0.1, g=0.3)
        energias, estados, rotulos = vvp_service.vvp_eigensystem(params, 30)
        assert estados.shape[1] == energias.size == len(rotulos)
        desvio = np.max(np.abs(estados.T @ estados - np.eye(energias.size)))
        assert desvio < 1e-2


class TestEstadosDeslocados:

    def test_sem_acoplamento_e_estado_nu(self):
        """Testa g = 0: |(s,j)~⟩ é o vetor unitário |s,j⟩"""
        trunc = FockTruncation(n_max=10)
        for spin in (Spin.DOWN, Spin.UP):
            estado = vvp_service.displaced_state(spin, 3, ModelParams(delta=0.5), trunc)
            esperado = np.zeros(20)
            esperado[model_service.basis_index(spin, 3)] = 1.0
            np.testing.assert_allclose(estado, esperado, atol=1e-15)

    def test_sobreposicao_com_o_vacuo(self):
        """Testa ⟨↑,0|(↑,0)~⟩ = e^{−(g/Ω)²/2}"""
        params = ModelParams(delta=0.5, g=0.7)
        estado = vvp_service.displaced_state(Spin.UP, 0, params, FockTruncation(n_max=40))
        assert estado[model_service.basis_index(Spin.UP, 0)] == pytest.approx(math.exp(-0.49 / 2), abs=1e-12)

    def test_ortonormais(self):
        """Testa ⟨(s,j)~|(s′,j′)~⟩ = δ para j, j′ < 6"""
        params = ModelParams(delta=0.5, g=0.7)
        trunc = FockTruncation(n_max=40)
        estados = np.column_stack([
            vvp_service.displaced_state(spin, j, params, trunc) for spin in (Spin.DOWN, Spin.UP) for j in range(6)
        ])
        np.testing.assert_allclose(estados.T @ estados, np.eye(12), atol=1e-10)

    def test_truncamento_curto(self):
        """Testa TruncationError quando a cauda passa de 1e−10"""
        with pytest.raises(TruncationError):
            vvp_service.displaced_state(Spin.UP, 2, ModelParams(delta=0.5, g=2.0), FockTruncation(n_max=6))
