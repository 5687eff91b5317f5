from functools import lru_cache
from typing import Any, Callable, Dict, List

from app.core.config import get_settings


class CacheService:
    """
    Cache em memória das tabelas numéricas caras (fatores de vestimenta).
    Usa lru_cache por função registrada; desligado com ENABLE_CACHE=false.
    """

    def __init__(self, max_size: int = None):
        settings = get_settings()
        self.max_size = max_size or settings.cache_max_size
        self.enabled = settings.enable_cache
        self._funcoes: List[Callable] = []

    def apply_to_function(self, func: Callable) -> Callable:
        """
        Aplica cache a uma função pura de argumentos hasheáveis.

        Args:
            func: Função a ser decorada com cache

        Returns:
            Função decorada (ou a própria função, se o cache estiver desligado)
        """
        if not self.enabled:
            return func

        cached_func = lru_cache(maxsize=self.max_size)(func)
        self._funcoes.append(cached_func)
        return cached_func

    def clear_cache(self) -> None:
        for func in self._funcoes:
            func.cache_clear()

    def get_cache_info(self) -> Dict[str, Any]:
        """
        Retorna estatísticas agregadas de todas as funções registradas.
        """
        hits = misses = current = 0
        for func in self._funcoes:
            info = func.cache_info()
            hits += info.hits
            misses += info.misses
            current += info.currsize
        return {
            "enabled": self.enabled,
            "max_size": self.max_size,
            "hits": hits,
            "misses": misses,
            "current_size": current,
        }

    def is_enabled(self) -> bool:
        return self.enabled


cache_tabelas = CacheService()
