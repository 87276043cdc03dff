"""Base utilities shared by the ftcl MCP tools."""

import functools
import logging
import threading
from typing import Callable, TypeVar, ParamSpec

from ..cache import Cache
from ..config import config
from ..errors import ComputationFailure, HypothesisFailure

P = ParamSpec('P')
T = TypeVar('T')

logger = logging.getLogger(__name__)

# Thread-local storage for the current workspace cache
_thread_local = threading.local()


def with_workspace(func: Callable[P, T]) -> Callable[P, T]:
    """Decorator that opens the configured cache and makes it available via get_current_workspace()."""

    @functools.wraps(func)
    def wrapper(*args: P.args, **kwargs: P.kwargs) -> T:
        with Cache(config.cache_dir) as cache:
            _thread_local.workspace = cache
            try:
                return func(*args, **kwargs)
            finally:
                if hasattr(_thread_local, 'workspace'):
                    delattr(_thread_local, 'workspace')

    return wrapper


def get_current_workspace() -> Cache:
    """Get the cache of the current tool call.

    This function should only be called from within a function decorated with @ftcl_tool.
    """
    if not hasattr(_thread_local, 'workspace'):
        raise RuntimeError("get_current_workspace() called outside of @ftcl_tool decorated function")
    return _thread_local.workspace


def handle_ftcl_errors(func: Callable[P, T]) -> Callable[P, T]:
    """Decorator to turn library failures into user-facing ValueErrors naming the failing stage."""

    @functools.wraps(func)
    def wrapper(*args: P.args, **kwargs: P.kwargs) -> T:
        try:
            return func(*args, **kwargs)
        except HypothesisFailure as e:
            conditions = ", ".join(e.conditions) or "unspecified"
            raise ValueError(f"Hypotheses not satisfied ({conditions}): {e}")
        except ComputationFailure as e:
            logger.error("%s failed: %s", func.__name__, e)
            raise ValueError(f"Computation failed in {func.__name__} ({type(e).__name__}): {e}")

    return wrapper


def ftcl_tool(func: Callable[P, T]) -> Callable[P, T]:
    """Convenience decorator that combines the workspace context and error handling."""
    return handle_ftcl_errors(with_workspace(func))
