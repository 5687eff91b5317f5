# app/services/pool_service.py
# Execução de itens independentes (pontos de varredura, células de grade):
# serial, pool de processos local ou fila rq consumida por worker.py.

import time
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable, Dict, List, Optional, Sequence

import redis
from rq import Queue

from app.core.config import get_settings
from app.core.logs import log
from app.core.performance import cronometro

# Tarefas locais -> entradas equivalentes do worker (com log e tempo).
TAREFAS_RQ: Dict[str, str] = {
    "app.services.validation_service.evaluate_cell": "worker_tasks.compute_error_cell",
    "app.services.validation_service.spectrum_point": "worker_tasks.compute_spectrum_point",
    "app.services.dynamics_service.trace_point": "worker_tasks.compute_trace",
}


class WorkPool:
    """
    Aplica uma tarefa a uma lista de itens e devolve os resultados na ordem
    dos itens, qualquer que seja o backend.
    """

    def __init__(self, workers: Optional[int] = None, backend: Optional[str] = None,
                 intervalo: float = 0.5, timeout_job: int = 1800):
        settings = get_settings()
        self.workers = max(1, workers or settings.pool_size)
        self.backend = (backend or settings.pool_backend).lower()
        if self.backend not in ("local", "rq"):
            raise ValueError(f"Backend de pool desconhecido: {self.backend}")
        self.intervalo = intervalo
        self.timeout_job = timeout_job
        self.redis_url = settings.redis_url
        self.queue_name = f"{settings.queue_prefix}sweeps"

    def map(self, tarefa: Callable, itens: Sequence[Any]) -> List[Any]:
        itens = list(itens)
        if not itens:
            return []
        nome = getattr(tarefa, "__name__", "tarefa")
        with cronometro("WorkPool", f"{len(itens)} itens de '{nome}' ({self.backend}, {self.workers} workers)"):
            if self.backend == "rq":
                return self._map_rq(tarefa, itens)
            return self._map_local(tarefa, itens)

    def _map_local(self, tarefa: Callable, itens: List[Any]) -> List[Any]:
        if self.workers == 1 or len(itens) == 1:
            return [tarefa(item) for item in itens]
        chunk = max(1, len(itens) // (4 * self.workers))
        with ProcessPoolExecutor(max_workers=self.workers) as executor:
            return list(executor.map(tarefa, itens, chunksize=chunk))

    def _map_rq(self, tarefa: Callable, itens: List[Any]) -> List[Any]:
        conn = redis.from_url(self.redis_url)
        fila = Queue(self.queue_name, connection=conn)
        chave = f"{tarefa.__module__}.{tarefa.__name__}"
        destino = TAREFAS_RQ.get(chave, tarefa)

        jobs = [fila.enqueue(destino, item, job_timeout=self.timeout_job) for item in itens]
        log("WorkPool", f"{len(jobs)} jobs enfileirados em '{self.queue_name}'")

        pendentes = set(range(len(jobs)))
        resultados: List[Any] = [None] * len(jobs)
        while pendentes:
            for i in sorted(pendentes):
                status = jobs[i].get_status()
                if status == "finished":
                    resultados[i] = jobs[i].result
                    pendentes.discard(i)
                elif status in ("failed", "stopped", "canceled"):
                    raise RuntimeError(f"Job {jobs[i].id} terminou com status '{status}': {jobs[i].exc_info}")
            if pendentes:
                time.sleep(self.intervalo)
        return resultados
