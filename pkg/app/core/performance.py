# app/core/performance.py
import time
from contextlib import contextmanager
from typing import Dict, Iterator

from app.core.logs import log


@contextmanager
def cronometro(componente: str, rotulo: str) -> Iterator[Dict[str, float]]:
    """
    Mede o tempo de execução de um bloco e registra no log ao final.

    O dicionário devolvido recebe a chave 'duracao' (segundos) na saída,
    para quem precisar do valor. Tempos nunca vão para arquivos de saída.
    """
    registro: Dict[str, float] = {}
    inicio = time.perf_counter()
    try:
        yield registro
    finally:
        registro["duracao"] = time.perf_counter() - inicio
        log(componente, f"{rotulo} concluído em {registro['duracao']:.2f}s")
