"""Second-order tail expansion of a sum of two regularly varying variables.

For independent ``X1``, ``X2`` with ``P{X1 > t} ~ c1 t^-(d-1) L`` and
``P{X2 > t} ~ c2 t^-d L``::

    P{X1 + X2 > t} = F1(t) + (d-1) E[X2] F1(t)/t (1 + o(1)) + F2(t) (1 + o(1))

This is the expansion behind the refined comparison of the retrial and
no-retrial system sizes. :func:`second_order_ratio` evaluates

    (P{X1 + X2 > t} - F1(t)) / ((d-1) E[X2] F1(t)/t + F2(t))

exactly for discrete Pareto-type laws ``P{X > j} = (theta/(theta+j))^index``
on ``{1, 2, ...}``, which should tend to 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import ConfigError, DomainError

__all__ = ["DiscretePareto", "second_order_ratio", "SecondOrderResult", "INDEX_MATCH_TOL"]

INDEX_MATCH_TOL = 1e-12


@dataclass(frozen=True)
class DiscretePareto:
    """``P{X > j} = (theta / (theta + j))**index`` for integer ``j >= 0``."""

    theta: float
    index: float

    def __post_init__(self):
        if not (self.theta > 0 and self.index > 0):
            raise DomainError("theta and index must be positive")

    def tail(self, n: int) -> np.ndarray:
        j = np.arange(n + 1, dtype=float)
        return (self.theta / (self.theta + j)) ** self.index

    def pmf(self, n: int) -> np.ndarray:
        t = self.tail(n)
        p = np.zeros(n + 1)
        p[1:] = t[:-1] - t[1:]
        return p

    @property
    def mean(self) -> float:
        # sum_{j>=0} (theta/(theta+j))^index = theta^index * zeta(index, theta)
        if self.index <= 1:
            return float("inf")
        return float(self.theta**self.index * special.zeta(self.index, self.theta))


@dataclass(frozen=True)
class SecondOrderResult:
    t: np.ndarray
    ratio: np.ndarray
    sum_tail: np.ndarray  # P{X1 + X2 > t}
    f1_tail: np.ndarray
    f2_tail: np.ndarray
    d: float
    mean2: float


def second_order_ratio(f1: DiscretePareto, f2: DiscretePareto, t_grid, trunc: int = 16384) -> SecondOrderResult:
    """Exact second-order ratio on ``t_grid`` (integers in ``[1, trunc]``).

    Requires ``f2.index == f1.index + 1`` (the common ``d`` is ``f2.index``).
    """
    if abs(f2.index - f1.index - 1.0) > INDEX_MATCH_TOL:
        raise ConfigError(f"indices must satisfy d2 = d1 + 1, got d1={f1.index}, d2={f2.index}")
    d = f2.index
    if d <= 1:
        raise ConfigError("the common index d must exceed 1")
    ts = np.asarray(t_grid, dtype=np.int64)
    if ts.size == 0 or ts.min() < 1 or ts.max() > trunc:
        raise ConfigError(f"t grid must lie in [1, {trunc}]")
    F1, F2, p2 = f1.tail(trunc), f2.tail(trunc), f2.pmf(trunc)
    mean2 = f2.mean
    ratio = np.empty(ts.size)
    total = np.empty(ts.size)
    for i, t in enumerate(ts):
        # P{S > t} - F1(t) without cancellation: every term is nonnegative
        excess = np.dot(p2[1 : t + 1], F1[t - 1 :: -1][:t] - F1[t]) + F2[t] * (1.0 - F1[t])
        total[i] = F1[t] + excess
        ratio[i] = excess / ((d - 1.0) * mean2 * F1[t] / t + F2[t])
    return SecondOrderResult(ts, ratio, total, F1[ts], F2[ts], d, mean2)
