import math

import pytest
from unittest.mock import MagicMock, patch

import worker_tasks
from app.services import validation_service
from app.services.pool_service import WorkPool


# Configuração de fixtures para testes
@pytest.fixture
def mock_redis():
    with patch('app.services.pool_service.redis') as mock_redis:
        yield mock_redis


@pytest.fixture
def mock_queue():
    with patch('app.services.pool_service.Queue') as mock_queue:
        yield mock_queue


def _job(status, resultado=None):
    job = MagicMock()
    job.get_status.return_value = status
    job.result = resultado
    job.id = "job-1"
    job.exc_info = "Traceback"
    return job


class TestPoolLocal:

    def test_serial_preserva_ordem(self):
        """Testa o caminho serial com um worker"""
        pool = WorkPool(workers=1, backend="local")
        assert pool.map(abs, [-3, 2, -1]) == [3, 2, 1]

    def test_processos_preserva_ordem(self):
        """Testa o pool de processos com dois workers"""
        pool = WorkPool(workers=2, backend="local")
        assert pool.map(math.sqrt, [1.0, 4.0, 9.0, 16.0]) == [1.0, 2.0, 3.0, 4.0]

    def test_lista_vazia(self):
        """Testa map sem itens"""
        assert WorkPool(workers=1, backend="local").map(abs, []) == []

    def test_backend_invalido(self):
        """Testa a rejeição de backends desconhecidos"""
        with pytest.raises(ValueError):
            WorkPool(backend="celery")

    def test_configuracao_do_ambiente(self, monkeypatch):
        """Testa RABIVV_POOL_SIZE e RQ_QUEUE_PREFIX"""
        monkeypatch.setenv("RABIVV_POOL_SIZE", "3")
        monkeypatch.setenv("RQ_QUEUE_PREFIX", "teste_")
        pool = WorkPool(backend="local")
        assert pool.workers == 3
        assert pool.queue_name == "teste_sweeps"


class TestPoolRQ:

    def test_enfileira_tarefa_do_worker(self, mock_redis, mock_queue):
        """Testa o destino worker_tasks e a coleta em ordem"""
        # Configurar o mock para retornar valores específicos
        fila = mock_queue.return_value
        fila.enqueue.side_effect = [_job("finished", {"i": 0}), _job("finished", {"i": 1})]

        pool = WorkPool(workers=2, backend="rq", intervalo=0.0)
        resultados = pool.map(validation_service.evaluate_cell, [{"a": 0}, {"a": 1}])

        assert resultados == [{"i": 0}, {"i": 1}]
        mock_redis.from_url.assert_called_once()
        primeira = fila.enqueue.call_args_list[0]
        assert primeira.args == ("worker_tasks.compute_error_cell", {"a": 0})
        assert primeira.kwargs["job_timeout"] == pool.timeout_job

    def test_aguarda_jobs_pendentes(self, mock_redis, mock_queue):
        """Testa a espera enquanto o job não termina"""
        job = _job("queued", 7)
        job.get_status.side_effect = ["queued", "started", "finished"]
        mock_queue.return_value.enqueue.return_value = job

        pool = WorkPool(workers=1, backend="rq", intervalo=0.0)
        assert pool.map(abs, [1]) == [7]
        assert job.get_status.call_count == 3

    def test_job_falho(self, mock_redis, mock_queue):
        """Testa RuntimeError quando um job falha"""
        mock_queue.return_value.enqueue.return_value = _job("failed")
        pool = WorkPool(workers=1, backend="rq", intervalo=0.0)
        with pytest.raises(RuntimeError):
            pool.map(abs, [1])


class TestWorkerTasks:

    def test_celula_pelo_worker(self):
        """Testa a tarefa do worker devolvendo o mesmo dict do pool local"""
        payload = {"params": {"eps": 0.0, "delta": 0.5, "g": 0.2, "omega": 1.0}, "methods": ["exact"], "k": 3}
        assert worker_tasks.compute_error_cell(payload) == validation_service.evaluate_cell(payload)

    def test_falha_propagada(self):
        """Testa que a exceção da tarefa chega ao rq"""
        with pytest.raises(KeyError):
            worker_tasks.compute_trace({})
