import inspect
import json
import logging
import sys
from enum import Enum

import logfire
from colorama import Fore, Style, init
from tqdm import tqdm

init(autoreset=True)

ROOT_LOGGER = "offramp"
_PACKAGE_PREFIX = "src."


class LogSymbols(str, Enum):
    """Symbols shown in front of each console line."""

    SUCCESS = "✓"
    ERROR = "✗"
    INFO = "→"
    WARNING = "⚠"
    DEBUG = "•"
    CRITICAL = "‼"


class ColoredFormatter(logging.Formatter):
    """One line per record: symbol, level, time, short logger name, message."""

    COLORS = {
        logging.INFO: Fore.GREEN,
        logging.DEBUG: Fore.LIGHTCYAN_EX,
        logging.WARNING: Fore.YELLOW,
        logging.ERROR: Fore.RED,
        logging.CRITICAL: Fore.MAGENTA + Style.BRIGHT,
    }

    SYMBOLS = {
        logging.INFO: LogSymbols.INFO.value,
        logging.DEBUG: LogSymbols.DEBUG.value,
        logging.WARNING: LogSymbols.WARNING.value,
        logging.ERROR: LogSymbols.ERROR.value,
        logging.CRITICAL: LogSymbols.CRITICAL.value,
    }

    def format(self, record: logging.LogRecord) -> str:
        record.message = record.getMessage()
        color = self.COLORS.get(record.levelno, "")
        symbol = f"{color}{self.SYMBOLS.get(record.levelno, '')}{Style.RESET_ALL}"
        level = f"{color}{record.levelname}{Style.RESET_ALL}:"
        timestamp = self.formatTime(record, "%H:%M:%S")
        name = record.name.removeprefix(f"{ROOT_LOGGER}.")

        line = f"{symbol} {level} [{timestamp}] {name}:{record.lineno} - {record.message}"
        if record.args:
            line += f" Args: {json.dumps(record.args, default=str)}"
        if record.exc_info and not record.exc_text:
            record.exc_text = self.formatException(record.exc_info)
        if record.exc_text:
            line = f"{line}\n{record.exc_text}"
        if record.stack_info:
            line = f"{line}\n{self.formatStack(record.stack_info)}"
        return line


class TqdmHandler(logging.StreamHandler):
    """Writes through tqdm so log lines do not tear an active progress bar."""

    def emit(self, record: logging.LogRecord) -> None:
        try:
            tqdm.write(self.format(record), file=self.stream)
        except Exception:
            self.handleError(record)


def configure_logging(debug: bool = False) -> None:
    """Console logging on stderr and, when a write token is set, Logfire."""
    from src.infra.settings import settings

    log_level = logging.DEBUG if debug else logging.INFO

    app_logger = logging.getLogger(ROOT_LOGGER)
    app_logger.setLevel(log_level)
    app_logger.handlers.clear()

    # stdout carries records and tables
    console_handler = TqdmHandler(sys.stderr)
    console_handler.setLevel(log_level)
    console_handler.setFormatter(ColoredFormatter())
    app_logger.addHandler(console_handler)

    if settings.logfire_write_token:
        logfire.configure(
            token=settings.logfire_write_token,
            environment=settings.environment.value,
            service_name=settings.project_name,
            console=False,
        )
        app_logger.addHandler(logfire.LogfireLoggingHandler())

    app_logger.propagate = False


def get_logger() -> logging.LoggerAdapter:
    """Retrieve a logger named after the calling module, e.g. ``offramp.core.decoding.early_exit``.

    Returns:
        logging.LoggerAdapter: A logger adapter that supports extra context fields.
    """
    frame = inspect.currentframe()
    try:
        caller_frame = frame.f_back if frame else None
        module = inspect.getmodule(caller_frame)
        module_name = module.__name__.removeprefix(_PACKAGE_PREFIX) if module else ROOT_LOGGER
    finally:
        del frame  # Prevent reference cycles

    logger = logging.getLogger(f"{ROOT_LOGGER}.{module_name}")
    return logging.LoggerAdapter(logger, extra={})
