# -*- coding: utf-8 -*-
"""
sdlab - laboratory for the social distancing game on networks

System wide settings and the exception hierarchy shared by all modules.

:copyright:
    The sdlab Development Team
:license:
    GNU Lesser General Public License, Version 3
    (https://www.gnu.org/copyleft/lesser.html)
"""
from __future__ import absolute_import, division, print_function

import os
import warnings

from .utils import classproperty


def _threads_from_environment():
    value = os.environ.get('LAB_THREADS', '')
    try:
        return max(1, int(value))
    except ValueError:
        return 1


class LabSystem(object):
    """
    Use this class to overwrite default settings on global scale

    >>> from sdlab import LabSystem
    >>> LabSystem.debug = True
    >>> LabSystem.reset()
    >>> LabSystem.debug
    False

    ``debug`` : bool
        Enables debug output on stdout.
    ``threads`` : int
        Number of worker processes used for independent batches (sessions,
        Monte Carlo replications). Defaults to ``LAB_THREADS`` if set.
    ``enumeration_guard`` : int
        Largest number of positions accepted by the exact solvers.
    ``edge_guard`` : int
        Largest number of contact edges enumerated by the exact
        infection probability solver.
    ``tolerance`` : float
        Absolute tolerance used when comparing expected payoffs.
    ``raise_on_warning`` : bool
        Raise a :class:`SdlabError` instead of emitting a
        :class:`SdlabWarning`.
    """
    debug = False
    threads = _threads_from_environment()
    enumeration_guard = 16
    edge_guard = 24
    tolerance = 1e-9
    raise_on_warning = False

    def __init__(self, debug=False, threads=None):
        self._debug = debug
        self._threads = threads

    def __enter__(self):
        self._system_debug = LabSystem.debug
        self._system_threads = LabSystem.threads
        if self._debug:
            LabSystem.debug = True
        if self._threads is not None:
            LabSystem.threads = max(1, int(self._threads))
        return self

    def __exit__(self, exc_type, exc_value, traceback):  # @UnusedVariable
        LabSystem.debug = self._system_debug
        LabSystem.threads = self._system_threads

    @classmethod
    def reset(cls):
        """
        Reset to default settings
        """
        cls.debug = False
        cls.threads = _threads_from_environment()
        cls.enumeration_guard = 16
        cls.edge_guard = 24
        cls.tolerance = 1e-9
        cls.raise_on_warning = False

    @classproperty
    def is_parallel(cls):  # @NoSelf
        return cls.threads > 1


class SdlabWarning(UserWarning):
    """
    Recoverable anomaly, e.g. a subject dropped for missing covariates.
    """


class SdlabError(Exception):
    """
    Base class of all domain errors.
    """


class ValidationError(SdlabError, ValueError):
    pass


class EnumerationGuardError(ValidationError):
    pass


class NoPureEquilibriumError(SdlabError):
    pass


class FineCalibrationError(SdlabError):
    pass


class IncompleteLogError(SdlabError):
    pass


class ConvergenceInputError(ValidationError):
    pass


class RankDeficiencyError(SdlabError):
    def __init__(self, columns):
        self.columns = list(columns)
        msg = 'design matrix is rank deficient, collinear columns: {}'
        super(RankDeficiencyError, self).__init__(
            msg.format(', '.join(self.columns)))


class SeparationError(SdlabError):
    pass


class NonConvergenceError(SdlabError):
    pass


class MissingCoefficientError(SdlabError, KeyError):
    pass


class InfeasibleTargetError(ValidationError):
    pass


class EmptyRangeError(SdlabError):
    pass


class DegenerateInputError(ValidationError):
    pass


class MissingColumnsError(ValidationError):
    pass


def warn(msg, category=SdlabWarning):
    """
    Emit a recoverable diagnostic or raise if ``LabSystem.raise_on_warning``
    """
    if LabSystem.raise_on_warning:
        raise SdlabError(msg)
    warnings.warn(msg, category, stacklevel=2)
