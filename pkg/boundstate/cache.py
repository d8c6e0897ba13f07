"""Cache management for tabulated bath kernels."""

import logging
import threading
from typing import Callable

import numpy as np

from boundstate import app_settings

logger = logging.getLogger(__name__)

_store: dict[str, np.ndarray] = {}
_lock = threading.Lock()


class KernelCache:
    """Process-wide cache of correlation kernels tabulated on a solver grid."""

    # Cache key prefixes
    PREFIX_G = "kernel:g"
    PREFIX_GTILDE = "kernel:gtilde"

    @classmethod
    def get_g_key(cls, model_key: str, dt: float, n: int) -> str:
        """Get cache key for g(k*dt), k = 0..n."""
        return f"{cls.PREFIX_G}:{model_key}:{dt!r}:{n}"

    @classmethod
    def get_gtilde_key(
        cls, model_key: str, bath_key: str, dt: float, n: int, sign: int = 1
    ) -> str:
        """Get cache key for gtilde(sign*k*dt), k = 0..n."""
        return f"{cls.PREFIX_GTILDE}:{model_key}:{bath_key}:{dt!r}:{n}:{sign:+d}"

    @classmethod
    def get_or_compute(cls, key: str, fetch_func: Callable[[], np.ndarray]) -> np.ndarray:
        """
        Get a kernel table from cache or compute and cache it.

        Args:
            key: Cache key built by one of the ``get_*_key`` helpers
            fetch_func: Function to call on a cache miss

        Returns:
            Read-only array of kernel samples
        """
        with _lock:
            table = _store.get(key)

        if table is not None:
            logger.debug("Cache HIT for %s", key)
            return table

        logger.debug("Cache MISS for %s", key)
        table = np.asarray(fetch_func())
        table.setflags(write=False)
        evicted = 0
        with _lock:
            _store[key] = table
            while len(_store) > max(1, app_settings.BOUNDSTATE_KERNEL_CACHE_SIZE):
                del _store[next(iter(_store))]
                evicted += 1

        if evicted:
            logger.info("Evicted %d kernel tables, %d remain cached", evicted, cls.size())
        return table

    @classmethod
    def size(cls) -> int:
        """Number of cached tables."""
        with _lock:
            return len(_store)

    @classmethod
    def clear_all(cls) -> None:
        """Clear all cached kernels."""
        with _lock:
            _store.clear()
        logger.warning("Cleared ALL kernel caches")
