import logging
import logging.handlers
import os
import sys
from pathlib import Path
from typing import Optional

import coloredlogs

from truss_shm.constants import Logging

TRACE = 5

FORMAT_STRING = "%(asctime)s | %(name)s | %(levelname)s | %(message)s"


def setup(verbosity: Optional[int] = None) -> None:
    """
    Set up loggers.

    `verbosity` comes from the command line (-v / -q). When it is None the level
    follows TRUSS_SHM_DEBUG; otherwise 0 is INFO, 1 is DEBUG, 2 and above TRACE, and -1 is WARNING.
    """
    logging.TRACE = TRACE
    logging.addLevelName(TRACE, "TRACE")
    logging.Logger.trace = _monkeypatch_trace

    root_logger = logging.getLogger()

    if Logging.file_logs and not any(
        isinstance(handler, logging.handlers.RotatingFileHandler) for handler in root_logger.handlers
    ):
        log_file = Path(Logging.file_path)
        log_file.parent.mkdir(parents=True, exist_ok=True)

        # File handler rotates logs every 5 MB
        file_handler = logging.handlers.RotatingFileHandler(
            log_file, maxBytes=5 * (2 ** 20), backupCount=10, encoding="utf-8",
        )
        file_handler.setFormatter(logging.Formatter(FORMAT_STRING))
        root_logger.addHandler(file_handler)

    if "COLOREDLOGS_LEVEL_STYLES" not in os.environ:
        coloredlogs.DEFAULT_LEVEL_STYLES = {
            **coloredlogs.DEFAULT_LEVEL_STYLES,
            "trace": {"color": 246},
            "critical": {"background": "red"},
            "debug": coloredlogs.DEFAULT_LEVEL_STYLES["info"],
        }

    if "COLOREDLOGS_LOG_FORMAT" not in os.environ:
        coloredlogs.DEFAULT_LOG_FORMAT = FORMAT_STRING

    # Results are written to stdout, diagnostics never are
    coloredlogs.install(level=TRACE, stream=sys.stderr)

    root_logger.setLevel(_level_for(verbosity))
    logging.getLogger("joblib").setLevel(logging.WARNING)

    _set_trace_loggers()

    root_logger.trace("Logging initialization complete")


def _level_for(verbosity: Optional[int]) -> int:
    """Map a -q/-v count onto a logging level."""
    if verbosity is None:
        return logging.DEBUG if Logging.debug else logging.INFO
    if verbosity < 0:
        return logging.WARNING
    return (logging.INFO, logging.DEBUG)[verbosity] if verbosity < 2 else TRACE


def _monkeypatch_trace(self: logging.Logger, msg: str, *args, **kwargs) -> None:
    """
    Log 'msg % args' with severity 'TRACE'.

    To pass exception information, use the keyword argument exc_info with a true value, e.g.
    logger.trace("Sweep %d left an off-diagonal norm of %s", sweep, off, exc_info=1)
    """
    if self.isEnabledFor(TRACE):
        self._log(TRACE, msg, args, **kwargs)


def _set_trace_loggers() -> None:
    """
    Set loggers to the trace level according to the value from the TRUSS_SHM_TRACE_LOGGERS env var.

    A comma separated list of logger names puts each of them at the trace level,
    e.g. `truss_shm.firefly,truss_shm.detection`.

    Prefixing the list with "!" puts the root logger at the trace level and keeps the listed ones at DEBUG.

    A value starting with "*" puts the root logger at the trace level and ignores the rest.
    """
    level_filter = Logging.trace_loggers
    if not level_filter:
        return

    if level_filter.startswith("*"):
        logging.getLogger().setLevel(TRACE)
    elif level_filter.startswith("!"):
        logging.getLogger().setLevel(TRACE)
        for logger_name in level_filter.strip("!,").split(","):
            logging.getLogger(logger_name).setLevel(logging.DEBUG)
    else:
        for logger_name in level_filter.strip(",").split(","):
            logging.getLogger(logger_name).setLevel(TRACE)
