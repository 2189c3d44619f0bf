import logging
import time
from functools import wraps
from typing import Any, Callable, TypeVar

T = TypeVar("T")

_logger = logging.getLogger("hlps.timing")


def format_duration(elapsed: float) -> str:
    """Human-readable duration.

    - elapsed >= 60 s: minutes and integer seconds ("2min 12s")
    - 10 s <= elapsed < 60 s: integer seconds ("12s")
    - elapsed < 10 s: seconds with 3 decimals ("0.123s")
    """
    if elapsed >= 60:
        minutes = int(elapsed // 60)
        seconds = elapsed - minutes * 60
        return f"{minutes}min {int(seconds)}s"
    if elapsed >= 10:
        return f"{int(elapsed)}s"
    return f"{elapsed:.3f}s"


def measure_time(
    func: Callable[..., T] | None = None,
    *,
    logger: Callable[[str], None] = _logger.info,
    message_fmt: str = "{func_name} finished in {duration}",
) -> Callable[..., T] | Callable[[Callable[..., T]], Callable[..., T]]:
    """
    Decorator that measures the execution time of a function and logs a human-readable duration.

    Can be used with or without parentheses:
        @measure_time
        def train(config): ...

        @measure_time(logger=logger.debug)
        def evaluate(policy, config, episodes): ...

    Parameters
    ----------
    func : callable, optional
        The function to wrap and time. If None, returns a decorator.
    logger : callable, optional
        Sink for the timing message (default: ``logging.getLogger("hlps.timing").info``).
    message_fmt : str, optional
        Format string with placeholders {func_name} and {duration}.

    Returns
    -------
    callable
        The decorated function; its return value is passed through unchanged.

    Notes
    -----
    - Timing uses time.perf_counter().
    - The message is emitted even when the wrapped function raises; the exception propagates.
    """

    def decorator(f: Callable[..., T]) -> Callable[..., T]:
        @wraps(f)
        def wrapper(*args: Any, **kwargs: Any) -> T:
            start = time.perf_counter()
            try:
                return f(*args, **kwargs)
            finally:
                elapsed = time.perf_counter() - start
                logger(message_fmt.format(func_name=f.__name__, duration=format_duration(elapsed)))

        return wrapper

    # Support for both @measure_time and @measure_time() syntax
    if func is None:
        return decorator
    else:
        return decorator(func)
