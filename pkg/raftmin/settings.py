import logging
import os

logger = logging.getLogger(__name__)


def _threads_from_env() -> int:
    default = min(4, os.cpu_count() or 1)
    raw = os.getenv("RAFTMIN_THREADS")
    if raw is None:
        return default
    try:
        value = int(raw)
    except ValueError:
        logger.warning(f"Ignoring RAFTMIN_THREADS={raw!r}; using {default}")
        return default
    if value < 1:
        logger.warning(f"Ignoring RAFTMIN_THREADS={raw!r}; using {default}")
        return default
    return value


# Upper bound on sweep parallelism
THREADS = _threads_from_env()

LOG_LEVEL = os.getenv("RAFTMIN_LOG_LEVEL", "INFO").upper()
