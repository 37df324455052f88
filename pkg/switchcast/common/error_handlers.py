"""
Module: error_handlers

Maps exceptions raised during a run onto process exit codes. Handlers are
registered with @errorhandler and looked up along the exception's MRO, so
the most specific registered class wins.
"""

import logging
from typing import Callable, Dict, Type

from switchcast.models import (
    ConfigurationError,
    DataValidationError,
    EnumerationCapError,
    InvariantViolation,
    UndefinedPosteriorError,
)
from . import status

logger = logging.getLogger("switchcast.errors")

_HANDLERS: Dict[Type[BaseException], Callable[[BaseException], int]] = {}


def errorhandler(exception_class: Type[BaseException]):
    """Registers the decorated function as the handler for exception_class"""

    def register(function):
        _HANDLERS[exception_class] = function
        return function

    return register


def handle_error(error: BaseException) -> int:
    """Logs the error through its handler and returns the exit status"""
    for klass in type(error).__mro__:
        if klass in _HANDLERS:
            return _HANDLERS[klass](error)
    return internal_error(error)


def _message(error: BaseException) -> str:
    """Module-qualified message: '<module>: <message>'"""
    origin = getattr(error, "__traceback__", None)
    while origin is not None and origin.tb_next is not None:
        origin = origin.tb_next
    module = origin.tb_frame.f_globals.get("__name__", "switchcast") if origin else type(error).__module__
    return f"{module}: {error}"


######################################################################
# Error Handlers
######################################################################
@errorhandler(DataValidationError)
def data_validation_error(error):
    """Handles bad data and bad settings with EX_DATAERR"""
    logger.warning(_message(error))
    return status.EX_DATAERR


@errorhandler(FileNotFoundError)
def input_not_found(error):
    """Handles missing input files with EX_NOINPUT"""
    logger.warning(_message(error))
    return status.EX_NOINPUT


@errorhandler(OSError)
def io_error(error):
    """Handles read and write failures with EX_IOERR"""
    logger.error(_message(error))
    return status.EX_IOERR


@errorhandler(ConfigurationError)
def configuration_error(error):
    """Handles priors that cannot define a switch distribution with EX_CONFIG"""
    logger.warning(_message(error))
    return status.EX_CONFIG


@errorhandler(EnumerationCapError)
def enumeration_cap(error):
    """Handles oracle requests beyond the enumeration caps with EX_USAGE"""
    logger.warning(_message(error))
    return status.EX_USAGE


@errorhandler(InvariantViolation)
def invariant_violation(error):
    """Handles failed runtime assertions with EX_INVARIANT"""
    logger.error(_message(error))
    return status.EX_INVARIANT


@errorhandler(UndefinedPosteriorError)
def undefined_posterior(error):
    """Handles all-zero weights with EX_SOFTWARE"""
    logger.error(_message(error))
    return status.EX_SOFTWARE


@errorhandler(Exception)
def internal_error(error):
    """Handles anything unexpected with EX_SOFTWARE"""
    logger.critical(_message(error))
    return status.EX_SOFTWARE
