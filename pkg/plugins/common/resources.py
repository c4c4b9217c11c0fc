import os
import logging

import psutil

from plugins.common.errors import ResourceExceededError

logger = logging.getLogger(__name__)

DEFAULT_MAX_TERMS = 10**7


def max_terms():
    """Enumeration budget, overridable with CMIBOUND_MAX_TERMS."""
    return int(os.environ.get('CMIBOUND_MAX_TERMS', DEFAULT_MAX_TERMS))


def default_threads():
    return int(os.environ.get('CMIBOUND_THREADS', min(8, os.cpu_count() or 1)))


def check_memory_usage(required_bytes=0):
    """
    False when this process already holds more than
    CMIBOUND_MEMORY_LIMIT_PERCENT of system memory, or when
    ``required_bytes`` more would not fit in what the system has available.
    """
    limit = float(os.environ.get('CMIBOUND_MEMORY_LIMIT_PERCENT', 85))
    try:
        held = psutil.Process(os.getpid()).memory_percent()
        available = psutil.virtual_memory().available
    except psutil.Error as e:
        logger.error(f"Memory check unavailable: {e}")
        return True

    if held > limit:
        logger.warning(f"Process holds {held:.1f}% of system memory (limit {limit:g}%)")
        return False
    if required_bytes > available:
        logger.warning(f"Need about {required_bytes / 2**20:.1f} MiB but only "
                       f"{available / 2**20:.1f} MiB are available")
        return False
    return True


def guard_enumeration(terms, what="enumeration"):
    """
    Raise ResourceExceededError when an exact enumeration would exceed the budget.

    Args:
        terms: Number of terms the enumeration would visit
        what: Label used in the error message
    """
    budget = max_terms()
    if terms > budget:
        raise ResourceExceededError(
            f"{what} needs {terms:,} terms, above the budget of {budget:,}",
            param_info=f"terms = {terms}",
            suggestion="Reduce n, k or the alphabet sizes, or raise CMIBOUND_MAX_TERMS."
        )
    if not check_memory_usage(8 * terms):
        raise ResourceExceededError(
            f"Not enough memory for {what} ({terms:,} terms)",
            suggestion="Reduce n, k or the alphabet sizes."
        )
    logger.debug(f"{what}: {terms:,} terms within budget")
