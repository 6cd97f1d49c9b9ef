# -*- coding: utf-8 -*-

__version__ = '0.1.0'

from .core import LabSystem, SdlabError, SdlabWarning  # noqa: E402
from .network import (ActionProfile, EnvironmentKind, GameParams,  # noqa
                      Network, make_environment)
from .equilibrium import corrective_fine_interval, solve  # noqa: E402
from .session import SessionConfig, run_session  # noqa: E402
