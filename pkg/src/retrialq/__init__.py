"""Stationary queue-length tails of the batch-arrival (M^X/G/1) retrial queue.

Exact truncated distributions (:mod:`retrialq.exact`), closed-form tail
asymptotics (:mod:`retrialq.asymptotics`) and discrete-event simulation
(:mod:`retrialq.simulate`), driven from the command line by :mod:`retrialq.cli`.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError,
    DomainError,
    InfiniteMeanError,
    NumericalError,
    RetrialError,
    StabilityError,
    TruncationMismatchError,
    UnsupportedModelError,
)
from .model import Deterministic, Exponential, Geometric, Lomax, ModelParams, Pareto, ParetoTail  # noqa: E402
from .series import TruncSeries  # noqa: E402

__all__ = [
    "__version__",
    "ConfigError",
    "DomainError",
    "InfiniteMeanError",
    "NumericalError",
    "RetrialError",
    "StabilityError",
    "TruncationMismatchError",
    "UnsupportedModelError",
    "Deterministic",
    "Exponential",
    "Geometric",
    "Lomax",
    "ModelParams",
    "Pareto",
    "ParetoTail",
    "TruncSeries",
]
