"""
Provide logging functionality for the harness.
"""

import inspect
import logging
import sys
from typing import Optional

from loguru._logger import Core, Logger


class Logging:
    """
    Owns a private loguru logger so the harness never touches the global ``loguru.logger``.
    Results go to files or stdout; everything written here goes to stderr.

    :ivar _logger: The logger instance.
    :vartype _logger: loguru._logger.Logger
    """

    def __init__(
        self, debug_mode: bool = False, format: Optional[str] = None, sink=sys.stderr
    ) -> None:
        """
        Initialize the logger instance.

        :param debug_mode: Log at DEBUG level instead of INFO.
        :type debug_mode: bool
        :param format: The loguru format string, the loguru default if omitted.
        :type format: str, optional
        :param sink: Where records are written.
        """
        level = "DEBUG" if debug_mode else "INFO"
        self._logger = Logger(
            core=Core(),
            exception=None,
            depth=0,
            record=False,
            lazy=False,
            colors=False,
            raw=False,
            capture=True,
            patchers=[],
            extra={},
        )
        options = {"level": level, "diagnose": False}
        if format:
            options["format"] = format
        self._logger.add(sink, **options)
        self._logger.debug(f"Logger ready at level {level}.")

    def get_logger(self) -> Logger:
        """
        The logger instance.

        :return: The logger instance.
        :rtype: loguru._logger.Logger
        """
        return self._logger


def warning_text(formatted: str) -> str:
    """
    Reduce ``path:line: Category: text\n  source`` (as produced by ``warnings.formatwarning``)
    to ``Category: text``.
    """
    first = formatted.splitlines()[0] if formatted else formatted
    return first.split(": ", 1)[-1]


class InterceptHandler(logging.Handler):
    """
    Forwards standard library log records to a loguru logger. Captured warnings
    (the ``py.warnings`` logger) arrive as ``[warnings] Category: text``.
    """

    def __init__(self, logger: Logger) -> None:
        super().__init__()
        self.logger = logger

    def emit(self, record: logging.LogRecord) -> None:
        """
        Emit a log record to loguru.

        :param record: The log record to emit.
        :type record: logging.LogRecord
        """
        try:
            level = self.logger.level(record.levelname).name
        except ValueError:
            level = record.levelno
        message = record.getMessage()
        if record.name == "py.warnings":
            message = f"[warnings] {warning_text(message)}"

        # walk out of the logging module so loguru reports the real caller
        frame, depth = inspect.currentframe(), 0
        while frame and (depth == 0 or frame.f_code.co_filename == logging.__file__):
            frame = frame.f_back
            depth += 1

        self.logger.opt(depth=depth, exception=record.exc_info).log(level, message)
