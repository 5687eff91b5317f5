# app/core/logs.py
import sys

from app.core.config import get_settings

NIVEIS = {"DEBUG": 10, "INFO": 20, "WARNING": 30, "ERROR": 40}


def log(componente: str, mensagem: str, nivel: str = "INFO") -> None:
    """
    Escreve '[Componente] mensagem' em stderr se o nível passar pelo LOG_LEVEL.
    stdout fica reservado para os dados emitidos pela CLI.
    """
    limite = NIVEIS.get(get_settings().log_level, 20)
    if NIVEIS.get(nivel, 20) < limite:
        return
    prefixo = "" if nivel == "INFO" else f"{nivel}: "
    print(f"[{componente}] {prefixo}{mensagem}", file=sys.stderr)
