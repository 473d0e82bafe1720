import functools
from collections.abc import Callable
from typing import ParamSpec, TypeVar

from src.core._exceptions import OfframpError
from src.infra.logger import get_logger

logger = get_logger()

P = ParamSpec("P")
T = TypeVar("T")


def generic_error_handler(func: Callable[P, T]) -> Callable[P, T]:
    """Log unexpected failures with the function name and re-raise with the original context."""

    @functools.wraps(func)
    def wrapper(*args: P.args, **kwargs: P.kwargs) -> T:
        try:
            return func(*args, **kwargs)
        except OfframpError:
            raise
        except Exception as e:
            logger.exception(f"Unexpected error in {func.__name__}: {e}")
            raise

    return wrapper


def cli_error_boundary(func: Callable[P, int]) -> Callable[P, int]:
    """
    Turn domain errors raised by a CLI handler into a non-zero exit status.

    Args:
        func: A subcommand handler returning an exit status.

    Returns:
        The wrapped handler. OfframpError becomes exit status 1 after being logged;
        SystemExit raised by argparse (status 2) passes through untouched.
    """

    @functools.wraps(func)
    def wrapper(*args: P.args, **kwargs: P.kwargs) -> int:
        try:
            return func(*args, **kwargs)
        except OfframpError as e:
            logger.error(f"{func.__name__} failed: {e.error_message}")
            return 1

    return wrapper
