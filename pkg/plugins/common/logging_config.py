import os
import logging
from datetime import datetime

LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s - %(message)s"


def configure_logging(log_dir=None, level=None):
    """
    Configure the root logger for command-line and API use.

    Args:
        log_dir: Directory for a date-stamped log file; console only when None.
            Falls back to the CMIBOUND_LOG_DIR environment variable.
        level: Logging level name or number; defaults to CMIBOUND_LOG_LEVEL or INFO.

    Returns:
        The application logger
    """
    log_dir = log_dir or os.environ.get('CMIBOUND_LOG_DIR')
    level = level or os.environ.get('CMIBOUND_LOG_LEVEL', 'INFO')
    if isinstance(level, str):
        level = getattr(logging, level.upper(), logging.INFO)

    handlers = [logging.StreamHandler()]
    if log_dir:
        os.makedirs(log_dir, exist_ok=True)
        log_filename = os.path.join(log_dir, f"cmibound_{datetime.now().strftime('%Y-%m-%d')}.log")
        handlers.append(logging.FileHandler(log_filename))

    logging.basicConfig(level=level, format=LOG_FORMAT, handlers=handlers, force=True)

    logging.getLogger('werkzeug').setLevel(logging.WARNING)

    return logging.getLogger('cmibound')
