# app/core/config.py
# Configuração central lida do ambiente (.env + variáveis de processo).

import os
from typing import Literal

from dotenv import load_dotenv
from pydantic import BaseModel, Field

load_dotenv()


class Settings(BaseModel):
    """
    Configuração resolvida do RabiVV.

    Os valores são relidos do ambiente a cada chamada de get_settings(),
    então testes podem usar monkeypatch.setenv sem recarregar módulos.
    """
    log_level: Literal["DEBUG", "INFO", "WARNING", "ERROR"] = "INFO"
    enable_cache: bool = True
    cache_max_size: int = Field(default=256, ge=1)
    pool_size: int = Field(default=1, ge=1)
    pool_backend: Literal["local", "rq"] = "local"
    nmax_cap: int = Field(default=2048, ge=4)
    ksum_cap: int = Field(default=4096, ge=16)
    redis_url: str = "redis://localhost:6379"
    queue_prefix: str = ""
    golden_dir: str = "goldens"


def _env_int(nome: str, padrao: int) -> int:
    valor = os.getenv(nome)
    if not valor:
        return padrao
    try:
        return int(valor)
    except (ValueError, TypeError):
        print(f"[Config] Valor inválido para {nome}: '{valor}'. Usando {padrao}.")
        return padrao


def get_settings() -> Settings:
    nivel = os.getenv("LOG_LEVEL", "INFO").upper()
    if nivel not in ("DEBUG", "INFO", "WARNING", "ERROR"):
        nivel = "INFO"
    backend = os.getenv("RABIVV_POOL_BACKEND", "local").lower()
    if backend not in ("local", "rq"):
        backend = "local"

    return Settings(
        log_level=nivel,
        enable_cache=os.getenv("ENABLE_CACHE", "true").lower() == "true",
        cache_max_size=max(1, _env_int("CACHE_MAX_SIZE", 256)),
        pool_size=max(1, _env_int("RABIVV_POOL_SIZE", 1)),
        pool_backend=backend,
        nmax_cap=max(4, _env_int("RABIVV_NMAX_CAP", 2048)),
        ksum_cap=max(16, _env_int("RABIVV_KSUM_CAP", 4096)),
        redis_url=os.getenv("REDIS_URL", "redis://localhost:6379"),
        queue_prefix=os.getenv("RQ_QUEUE_PREFIX", ""),
        golden_dir=os.getenv("RABIVV_GOLDEN_DIR", "goldens"),
    )
