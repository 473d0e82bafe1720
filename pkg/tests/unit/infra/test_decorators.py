import pytest

from src.core._exceptions import ConfigurationError
from src.infra.decorators import cli_error_boundary, generic_error_handler


def test_domain_errors_become_exit_status_one():
    @cli_error_boundary
    def handler() -> int:
        raise ConfigurationError("paths.vocab is required")

    assert handler() == 1


def test_successful_handlers_pass_their_status_through():
    @cli_error_boundary
    def handler() -> int:
        return 0

    assert handler() == 0


def test_unexpected_errors_escape_the_boundary():
    @cli_error_boundary
    def handler() -> int:
        raise RuntimeError("bug")

    with pytest.raises(RuntimeError):
        handler()


def test_generic_handler_reraises_unchanged():
    @generic_error_handler
    def boom() -> None:
        raise KeyError("k")

    with pytest.raises(KeyError):
        boom()


def test_generic_handler_keeps_the_function_name():
    @generic_error_handler
    def named() -> int:
        return 4

    assert named.__name__ == "named"
    assert named() == 4
