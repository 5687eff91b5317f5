# app/models.py
# Tipos de domínio compartilhados pelos serviços (pydantic v2).

import math
from enum import Enum
from typing import Any, Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class MethodTag(str, Enum):
    JCM = "jcm"
    ADIABATIC = "adiabatic"
    GRWA = "grwa"
    VVP = "vvp"
    EXACT = "exact"


class Spin(str, Enum):
    DOWN = "down"
    UP = "up"

    @property
    def sinal(self) -> int:
        """Autovalor de σ_z: +1 para ↑, −1 para ↓."""
        return 1 if self is Spin.UP else -1


# --- Parâmetros físicos ---

class ModelParams(BaseModel):
    """Frequências ε, Δ, g, Ω do modelo (ħ = 1)."""
    model_config = ConfigDict(frozen=True)

    eps: float = 0.0
    delta: float = Field(default=0.0, ge=0.0)
    g: float = Field(default=0.0, ge=0.0)
    omega: float = Field(default=1.0, gt=0.0)

    @model_validator(mode="after")
    def verificar_finitos(self) -> "ModelParams":
        for nome in ("eps", "delta", "g", "omega"):
            if not math.isfinite(getattr(self, nome)):
                raise ValueError(f"Parâmetro '{nome}' precisa ser finito.")
        return self

    @property
    def alpha(self) -> float:
        return (2.0 * self.g / self.omega) ** 2

    @property
    def delta_b(self) -> float:
        return math.hypot(self.eps, self.delta)

    @property
    def detuning(self) -> float:
        return self.delta_b - self.omega

    def com(self, **alteracoes: float) -> "ModelParams":
        """Cópia validada com campos alterados."""
        dados = self.model_dump()
        dados.update(alteracoes)
        return ModelParams(**dados)


class FockTruncation(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_max: int = Field(ge=2)

    @property
    def dimensao(self) -> int:
        return 2 * self.n_max


# --- Espectros ---

class Level(BaseModel):
    index: int = Field(ge=0)
    label: str
    energy: float


class LevelSet(BaseModel):
    """Energias rotuladas de um método, ordenadas de forma crescente."""
    method: MethodTag
    entries: List[Level]
    n_max: Optional[int] = None

    @model_validator(mode="after")
    def verificar_ordem(self) -> "LevelSet":
        energias = [e.energy for e in self.entries]
        # folga para empates reordenados por ⟨n⟩
        if any(b < a - 1e-9 * max(1.0, abs(a)) for a, b in zip(energias, energias[1:])):
            raise ValueError("Energias de um LevelSet precisam estar em ordem crescente.")
        rotulos = [e.label for e in self.entries]
        if len(set(rotulos)) != len(rotulos):
            raise ValueError("Rótulos de um LevelSet precisam ser únicos.")
        return self

    def energies(self) -> np.ndarray:
        return np.array([e.energy for e in self.entries], dtype=float)

    def labels(self) -> List[str]:
        return [e.label for e in self.entries]

    def __len__(self) -> int:
        return len(self.entries)


def montar_levelset(method: MethodTag, pares: List[tuple], k: Optional[int] = None,
                    n_max: Optional[int] = None) -> LevelSet:
    """
    Ordena pares (energia, rótulo), trunca em k e reindexa.
    Empates de energia mantêm a ordem de entrada (ordenação estável).
    """
    ordenados = sorted(pares, key=lambda p: p[0])
    if k is not None:
        ordenados = ordenados[:k]
    entries = [Level(index=i, label=rotulo, energy=float(e)) for i, (e, rotulo) in enumerate(ordenados)]
    return LevelSet(method=method, entries=entries, n_max=n_max)


# --- VVP ---

class DoubletIndex(BaseModel):
    model_config = ConfigDict(frozen=True)

    j: int = Field(ge=0)
    l: int = 0


class DoubletSolution(BaseModel):
    """
    Solução 2×2 de um dubleto. Θ fica em (0, π]; Θ = 0 só quando o elemento
    vestido Δ_j^{j+l} é nulo (Δ = 0 ou zero de Laguerre) e o dubleto desacopla.
    """
    index: DoubletIndex
    eps2_down: float
    eps2_up: float
    delta_jl: float
    omega_jl: float = Field(ge=0.0)
    theta: float
    energy_minus: float
    energy_plus: float

    @field_validator("theta")
    @classmethod
    def theta_no_intervalo(cls, v: float) -> float:
        if not (0.0 <= v <= math.pi):
            raise ValueError(f"Ângulo de mistura fora de [0, π]: {v}")
        return v

    @model_validator(mode="after")
    def theta_nulo_so_desacoplado(self) -> "DoubletSolution":
        if self.theta == 0.0 and self.delta_jl != 0.0:
            raise ValueError(f"Θ = 0 exige Δ_j^(j+l) = 0 (recebido {self.delta_jl}).")
        return self


class VvpState(BaseModel):
    """Autoestado aproximado em segunda ordem, componentes na base nua."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    label: str
    branch: Literal["-", "+", "unpaired"]
    index: DoubletIndex
    order0: np.ndarray
    order1: np.ndarray
    order2: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.order0 + self.order1 + self.order2

    @property
    def norm_defect(self) -> float:
        return abs(float(np.linalg.norm(self.total)) - 1.0)


# --- Dinâmica ---

class InitialStateSpec(BaseModel):
    """Qubit preparado em |↑⟩, oscilador térmico com ħβΩ dado (math.inf = vácuo)."""
    model_config = ConfigDict(frozen=True)

    beta_hbar_omega: float = Field(default=10.0, gt=0.0)


class DynamicsTrace(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    times: np.ndarray
    values: np.ndarray
    method: MethodTag
    params: ModelParams
    n_max: Optional[int] = None

    @model_validator(mode="after")
    def verificar_formas(self) -> "DynamicsTrace":
        if self.times.shape != self.values.shape:
            raise ValueError("times e values precisam ter o mesmo tamanho.")
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("times precisa ser estritamente crescente.")
        return self


class Peak(BaseModel):
    frequency: float = Field(ge=0.0)
    amplitude: float
    group: int
    label: str


class PeakSpectrum(BaseModel):
    method: MethodTag
    params: ModelParams
    peaks: List[Peak]
    n_max: Optional[int] = None

    def total_amplitude(self) -> float:
        return float(sum(p.amplitude for p in self.peaks))

    def frequencies(self) -> np.ndarray:
        return np.array([p.frequency for p in self.peaks], dtype=float)

    def amplitudes(self) -> np.ndarray:
        return np.array([p.amplitude for p in self.peaks], dtype=float)


# --- Validação ---

class ErrorGrid(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    method: MethodTag
    axis1_name: str
    axis1_values: np.ndarray
    axis2_name: str
    axis2_values: np.ndarray
    cells: np.ndarray
    fixed: ModelParams
    k: int
    oracle_n_max: int = 0

    @model_validator(mode="after")
    def verificar_grade(self) -> "ErrorGrid":
        if self.cells.shape != (self.axis1_values.size, self.axis2_values.size):
            raise ValueError("Dimensões da grade não batem com os eixos.")
        finitos = self.cells[np.isfinite(self.cells)]
        if np.any(finitos < 0):
            raise ValueError("Células de erro precisam ser não negativas.")
        return self


# --- CLI ---

SweepName = Literal["eps", "delta", "g", "omega-detuning"]


class SweepSpec(BaseModel):
    parameter: SweepName
    start: float
    stop: float
    count: int = Field(ge=1)

    @classmethod
    def parse(cls, texto: str) -> "SweepSpec":
        """Lê 'nome:início:fim:quantidade', ex. 'delta:0.2:3.0:100'."""
        partes = texto.split(":")
        if len(partes) != 4:
            raise ValueError(f"Varredura inválida '{texto}'; esperado nome:início:fim:quantidade.")
        nome, inicio, fim, qtd = partes
        return cls(parameter=nome, start=float(inicio), stop=float(fim), count=int(qtd))

    def values(self) -> np.ndarray:
        if self.count == 1:
            return np.array([self.start])
        return np.linspace(self.start, self.stop, self.count)

    def apply(self, base: ModelParams, valor: float) -> ModelParams:
        """Parâmetros do ponto da varredura; 'omega-detuning' fixa Δ_b = Ω + δ."""
        if self.parameter == "omega-detuning":
            delta_b = base.omega + valor
            if delta_b < abs(base.eps):
                raise ValueError(f"Dessintonia {valor} incompatível com ε={base.eps}.")
            return base.com(delta=math.sqrt(delta_b ** 2 - base.eps ** 2))
        return base.com(**{self.parameter: valor})


class DynamicsSpec(BaseModel):
    t_max: float = Field(default=40.0, gt=0.0)
    samples: int = Field(default=401, ge=2)
    beta_hbar_omega: float = Field(default=10.0, gt=0.0)
    eta: float = Field(default=0.01, gt=0.0)
    amp_cutoff: float = Field(default=1e-4, ge=0.0)

    def times(self, omega: float) -> np.ndarray:
        return np.linspace(0.0, self.t_max / omega, self.samples)


class RunConfig(BaseModel):
    """Configuração completa de uma execução da CLI, gravada no cabeçalho da saída."""
    command: Literal["spectrum", "dynamics", "fourier", "validate", "goldens", "convergence"]
    params: ModelParams
    sweep: Optional[SweepSpec] = None
    methods: List[MethodTag] = Field(default_factory=lambda: [MethodTag.EXACT])
    levels: int = Field(default=8, ge=1)
    dynamics: DynamicsSpec = Field(default_factory=DynamicsSpec)
    output_path: Optional[str] = None
    output_format: Literal["csv", "json"] = "csv"
    l_override: Optional[int] = None
    tol: float = Field(default=1e-8, gt=0.0)

    @field_validator("methods", mode="before")
    @classmethod
    def normalizar_metodos(cls, v: Any) -> Any:
        if isinstance(v, str):
            v = [m.strip() for m in v.split(",") if m.strip()]
        if not v:
            raise ValueError("Pelo menos um método é obrigatório.")
        return [m.lower() if isinstance(m, str) else m for m in v]

    def resumo(self) -> Dict[str, Any]:
        # sem o destino: o cabeçalho depende só dos parâmetros
        return self.model_dump(mode="json", exclude={"output_path"})
