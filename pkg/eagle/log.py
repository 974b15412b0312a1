import logging
import sys
from datetime import datetime

FORMAT = '%(asctime)s [%(name)s] [%(levelname)s] %(message)s'
DATE_FORMAT = '%Y-%m-%d %H:%M:%S'


def get_logger(name):
    """Get a module logger under the 'eagle' namespace

    If nothing configured logging yet, a basic stderr handler is attached to the
    package root so library use still shows progress.
    """
    root = logging.getLogger('eagle')
    if not root.handlers:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter('[%(name)s] %(message)s'))
        root.addHandler(handler)
        root.setLevel(logging.INFO)
    return logging.getLogger(name)


def setup_logger(log_file=None, debug=False, timestamped_file=False):
    """Configure console and optional file logging for the whole package

    :param log_file: path of the log file, or None for console only
    :type log_file: str
    :param debug: lower every handler to DEBUG
    :type debug: bool
    :param timestamped_file: when no log_file is given, log to eagle_TIMESTAMP.log
    :type timestamped_file: bool
    :return: the log file path in use, if any
    :rtype: str
    """
    level = logging.DEBUG if debug else logging.INFO
    if log_file is None and timestamped_file:
        log_file = f'eagle_{datetime.now().strftime("%Y%m%d_%H%M%S")}.log'

    formatter = logging.Formatter(FORMAT, datefmt=DATE_FORMAT)

    root = logging.getLogger('eagle')
    root.setLevel(level)
    root.handlers = []

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(level)
    console_handler.setFormatter(formatter)
    root.addHandler(console_handler)

    if log_file is not None:
        file_handler = logging.FileHandler(log_file, mode='w', encoding='utf-8')
        file_handler.setLevel(level)
        file_handler.setFormatter(formatter)
        root.addHandler(file_handler)
        root.info(f"Logging to: {log_file}")
    return log_file
