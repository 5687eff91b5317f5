# worker_tasks.py
# Tarefas executadas pelo worker rq (fila '{RQ_QUEUE_PREFIX}sweeps').
# Cada tarefa recebe e devolve dicts simples, iguais aos do pool local.

import time
import traceback

from dotenv import load_dotenv

load_dotenv()

from app.services import dynamics_service, validation_service


def _run_with_logs(task_func, *args, **kwargs):
    """
    Executa a tarefa registrando início, duração e falhas no log do worker.
    """
    print(f"[WorkerTask] Executando: {task_func.__name__}")
    start_time = time.time()
    try:
        result = task_func(*args, **kwargs)
        end_time = time.time()
        print(f"[WorkerTask] Sucesso: {task_func.__name__}. Duração: {end_time - start_time:.2f}s")
        return result
    except Exception as e:
        print(f"[WorkerTask] FALHA: {task_func.__name__}. Erro: {e}")
        traceback.print_exc()
        raise e


def compute_spectrum_point(payload: dict) -> dict:
    return _run_with_logs(validation_service.spectrum_point, payload)


def compute_error_cell(payload: dict) -> dict:
    return _run_with_logs(validation_service.evaluate_cell, payload)


def compute_trace(payload: dict) -> dict:
    return _run_with_logs(dynamics_service.trace_point, payload)
