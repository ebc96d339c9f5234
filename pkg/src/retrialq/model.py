"""Primitive inputs of the batch-arrival retrial queue.

Batch laws live on ``{1, 2, ...}``; service laws on ``(0, inf)``. Heavy-tailed
families carry a tail index ``d`` and a constant slowly varying part; light
families report ``d = inf`` and a zero constant, so regime classification is
total.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from functools import cached_property, lru_cache
from typing import Union

import numpy as np
from scipy import integrate, special

from .errors import DomainError, InfiniteMeanError, NumericalError, StabilityError
from .series import TruncSeries

__all__ = [
    "Deterministic",
    "Geometric",
    "ParetoTail",
    "Exponential",
    "Lomax",
    "Pareto",
    "ModelParams",
    "BatchDist",
    "ServiceDist",
    "ServiceNodes",
    "rho",
    "service_lst",
    "mixed_poisson_weights",
    "service_nodes",
    "batch_pmf",
    "batch_tail",
    "chi1",
    "sample_batch",
    "sample_service",
]

CHI1_CUTOFF = 10**6


def _positive(name, value):
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
        raise DomainError(f"{name} must be a positive finite number, got {value!r}")


def _unit_open(u):
    u = np.asarray(u, dtype=float)
    if np.any((u <= 0.0) | (u >= 1.0)):
        raise DomainError("uniform variate must lie in (0, 1)")
    return u


# -- batch laws ---------------------------------------------------------------


class _BatchLaw:
    def pmf(self, j):
        j = np.asarray(j, dtype=float)
        return np.where(j >= 1, self.tail(j - 1) - self.tail(j), 0.0)

    def pmf_array(self, trunc: int) -> np.ndarray:
        """``P{X = j}`` for ``j = 0..trunc`` (entry 0 is zero)."""
        return self.pmf(np.arange(trunc + 1))


@dataclass(frozen=True)
class Deterministic(_BatchLaw):
    """Every batch has exactly ``m`` customers."""

    m: int
    kind = "deterministic"

    def __post_init__(self):
        if not (isinstance(self.m, (int, np.integer)) and self.m >= 1):
            raise DomainError(f"deterministic batch size must be an integer >= 1, got {self.m!r}")

    def tail(self, j):
        return np.where(np.asarray(j) < self.m, 1.0, 0.0)

    @property
    def chi1(self) -> float:
        return float(self.m)

    tail_index = math.inf
    tail_constant = 0.0

    def sample(self, u):
        _unit_open(u)
        return np.full(np.shape(u), self.m, dtype=np.int64)[()]


@dataclass(frozen=True)
class Geometric(_BatchLaw):
    """``P{X = k} = (1 - p) p**(k-1)`` on ``k >= 1``."""

    p: float
    kind = "geometric"

    def __post_init__(self):
        if not (0.0 < self.p < 1.0):
            raise DomainError(f"geometric parameter must be in (0, 1), got {self.p!r}")

    def tail(self, j):
        j = np.asarray(j, dtype=float)
        return np.where(j < 0, 1.0, self.p ** np.maximum(j, 0.0))

    @property
    def chi1(self) -> float:
        return 1.0 / (1.0 - self.p)

    tail_index = math.inf
    tail_constant = 0.0

    def sample(self, u):
        u = _unit_open(u)
        return (1 + np.floor(np.log(u) / math.log(self.p))).astype(np.int64)[()]


@dataclass(frozen=True)
class ParetoTail(_BatchLaw):
    """Discrete Pareto batch law with ``P{X > j} = (theta / (theta + j))**d``.

    The tail is ``~ theta**d * j**-d``; the constant ``theta**d`` plays the role
    of ``c_X`` with a unit slowly varying part.
    """

    theta: float
    d: float
    kind = "pareto_tail"

    def __post_init__(self):
        _positive("theta", self.theta)
        _positive("d", self.d)
        if self.d <= 1.0:
            raise InfiniteMeanError(f"batch tail index must exceed 1 for a finite mean, got {self.d!r}")

    def tail(self, j):
        j = np.asarray(j, dtype=float)
        return np.where(j < 0, 1.0, (self.theta / (self.theta + np.maximum(j, 0.0))) ** self.d)

    def pmf(self, j):
        j = np.asarray(j, dtype=float)
        prev = self.tail(j - 1)
        # tail(j-1) * (1 - ((theta+j-1)/(theta+j))**d) without cancellation
        ratio = -np.expm1(self.d * np.log1p(-1.0 / (self.theta + np.maximum(j, 1.0))))
        return np.where(j >= 1, prev * ratio, 0.0)

    @cached_property
    def chi1(self) -> float:
        # direct sum below the cutoff, Euler-Maclaurin remainder above it
        jj = np.arange(CHI1_CUTOFF, dtype=float)
        head = math.fsum(self.tail(jj))
        th, d, big_j = self.theta, self.d, float(CHI1_CUTOFF)
        integral = th**d * (th + big_j) ** (1.0 - d) / (d - 1.0)
        f_j = (th / (th + big_j)) ** d
        df_j = -d * th**d * (th + big_j) ** (-d - 1.0)
        return head + integral + 0.5 * f_j - df_j / 12.0

    @property
    def tail_index(self) -> float:
        return self.d

    @property
    def tail_constant(self) -> float:
        return self.theta**self.d

    def sample(self, u):
        u = _unit_open(u)
        return (np.floor(self.theta * (u ** (-1.0 / self.d) - 1.0)) + 1).astype(np.int64)[()]


BatchDist = Union[Deterministic, Geometric, ParetoTail]


# -- service laws -------------------------------------------------------------


@dataclass(frozen=True)
class Exponential:
    rate: float
    kind = "exponential"

    def __post_init__(self):
        _positive("rate", self.rate)

    @property
    def mean(self) -> float:
        return 1.0 / self.rate

    lower = 0.0
    tail_index = math.inf
    tail_constant = 0.0

    @property
    def scale(self) -> float:
        return 1.0 / self.rate

    def sf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x <= 0, 1.0, np.exp(-self.rate * np.maximum(x, 0.0)))

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x < 0, 0.0, self.rate * np.exp(-self.rate * np.maximum(x, 0.0)))

    def equilibrium_sf(self, x):
        return self.sf(x)

    def quantile_upper(self, v):
        """``x`` with ``P{B > x} = v``."""
        return -np.log(v) / self.rate


@dataclass(frozen=True)
class Lomax:
    """``P{B > x} = (1 + x/sigma)**-d``; slowly varying part ``sigma**d``."""

    sigma: float
    d: float
    kind = "lomax"

    def __post_init__(self):
        _positive("sigma", self.sigma)
        _positive("d", self.d)
        if self.d <= 1.0:
            raise InfiniteMeanError(f"service tail index must exceed 1 for a finite mean, got {self.d!r}")

    @property
    def mean(self) -> float:
        return self.sigma / (self.d - 1.0)

    lower = 0.0

    @property
    def scale(self) -> float:
        return self.sigma

    @property
    def tail_index(self) -> float:
        return self.d

    @property
    def tail_constant(self) -> float:
        return self.sigma**self.d

    def sf(self, x):
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        return (1.0 + x / self.sigma) ** -self.d

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        val = (self.d / self.sigma) * (1.0 + np.maximum(x, 0.0) / self.sigma) ** (-self.d - 1.0)
        return np.where(x < 0, 0.0, val)

    def equilibrium_sf(self, x):
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        return (1.0 + x / self.sigma) ** (1.0 - self.d)

    def quantile_upper(self, v):
        return self.sigma * (np.asarray(v, dtype=float) ** (-1.0 / self.d) - 1.0)


@dataclass(frozen=True)
class Pareto:
    """``P{B > x} = (x_m / x)**d`` for ``x >= x_m``; slowly varying part ``x_m**d``."""

    x_m: float
    d: float
    kind = "pareto"

    def __post_init__(self):
        _positive("x_m", self.x_m)
        _positive("d", self.d)
        if self.d <= 1.0:
            raise InfiniteMeanError(f"service tail index must exceed 1 for a finite mean, got {self.d!r}")

    @property
    def mean(self) -> float:
        return self.x_m * self.d / (self.d - 1.0)

    @property
    def lower(self) -> float:
        return self.x_m

    @property
    def scale(self) -> float:
        return self.x_m

    @property
    def tail_index(self) -> float:
        return self.d

    @property
    def tail_constant(self) -> float:
        return self.x_m**self.d

    def sf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x < self.x_m, 1.0, (self.x_m / np.maximum(x, self.x_m)) ** self.d)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        val = self.d * self.x_m**self.d * np.maximum(x, self.x_m) ** (-self.d - 1.0)
        return np.where(x < self.x_m, 0.0, val)

    def equilibrium_sf(self, x):
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        head = 1.0 - x / self.mean
        far = self.x_m**self.d * np.maximum(x, self.x_m) ** (1.0 - self.d) / ((self.d - 1.0) * self.mean)
        return np.where(x < self.x_m, head, far)

    def quantile_upper(self, v):
        return self.x_m * np.asarray(v, dtype=float) ** (-1.0 / self.d)


ServiceDist = Union[Exponential, Lomax, Pareto]


def _equilibrium_pdf(service, x):
    return service.sf(x) / service.mean


# -- the model ----------------------------------------------------------------


@dataclass(frozen=True)
class ModelParams:
    """Arrival rate ``lam`` (batches per unit time), per-customer retrial rate ``mu``."""

    lam: float
    mu: float
    batch: BatchDist
    service: ServiceDist

    def __post_init__(self):
        _positive("lambda", self.lam)
        _positive("mu", self.mu)

    @property
    def chi1(self) -> float:
        return self.batch.chi1

    @property
    def beta1(self) -> float:
        return self.service.mean

    @property
    def rho(self) -> float:
        return self.lam * self.beta1 * self.chi1

    @property
    def is_stable(self) -> bool:
        return self.rho < 1.0

    def require_stable(self):
        if not self.is_stable:
            raise StabilityError(f"unstable model: rho = {self.rho:.6g} >= 1")

    @property
    def psi(self) -> float:
        """Mean of the retrial increment ``D0``."""
        self.require_stable()
        r = self.rho
        return self.lam * (r + self.chi1 - 1.0) / (self.mu * (1.0 - r))

    def with_mu(self, mu: float) -> "ModelParams":
        return replace(self, mu=mu)

    def describe(self) -> dict:
        return {
            "lambda": self.lam,
            "mu": self.mu,
            "batch": {"kind": self.batch.kind, **asdict(self.batch)},
            "service": {"kind": self.service.kind, **asdict(self.service)},
        }


def rho(params: ModelParams) -> float:
    return params.rho


def chi1(batch: BatchDist) -> float:
    return batch.chi1


def batch_tail(batch: BatchDist, j):
    """``P{X > j}`` for ``j >= 0``."""
    if np.any(np.asarray(j) < 0):
        raise DomainError("batch_tail needs j >= 0")
    return batch.tail(j)[()]


def batch_pmf(batch: BatchDist, j):
    """``P{X = j}`` for ``j >= 1``."""
    if np.any(np.asarray(j) < 1):
        raise DomainError("batch_pmf needs j >= 1")
    return batch.pmf(j)[()]


def sample_batch(batch: BatchDist, u):
    return batch.sample(u)


def sample_service(service: ServiceDist, u):
    """Inverse-CDF service time for ``u`` in (0, 1)."""
    u = _unit_open(u)
    return service.quantile_upper(1.0 - u)[()]


def service_lst(service: ServiceDist, s: float) -> float:
    """Laplace-Stieltjes transform ``E exp(-s B)``."""
    if s < 0:
        raise DomainError("service_lst needs s >= 0")
    if s == 0:
        return 1.0
    if isinstance(service, Exponential):
        return service.rate / (service.rate + s)
    # integrate over the upper-tail probability v = P{B > x}: E f(B) = int_0^1 f(Q(v)) dv
    val, err = integrate.quad(
        lambda v: math.exp(-s * float(service.quantile_upper(v))), 0.0, 1.0,
        epsabs=1e-13, epsrel=1e-13, limit=400,
    )
    if err > 1e-10:
        raise NumericalError(f"service LST quadrature error estimate {err:.2e} at s={s}")
    return val


# -- quadrature over the service time ----------------------------------------

GL_ORDER = 8
QUAD_TOL = 1e-10
MAX_REFINE = 6
_NODE_CHUNK = 256


@dataclass(frozen=True, eq=False)
class ServiceNodes:
    """Quadrature rule ``sum_i w_i f(x_i) ~ E f(B)`` on ``[lower, x_max]``.

    ``counts`` holds the converged mixed-Poisson weights
    ``P{N = k} = E[exp(-lam B) (lam B)**k / k!]`` for ``k <= k_max``.
    """

    x: np.ndarray
    w: np.ndarray
    lam: float
    x_max: float
    tail_mass: float  # P{B > x_max}, not covered by the nodes
    level: int
    counts: np.ndarray = field(repr=False)

    def mixed_poisson(self, k_max: int) -> np.ndarray:
        if k_max < self.counts.size:
            return self.counts[: k_max + 1]
        return _mixed_poisson(self.x, self.w, self.lam, k_max)


def _mixed_poisson(x, w, lam, k_max):
    k = np.arange(k_max + 1, dtype=float)
    lgk = special.gammaln(k + 1.0)
    out = np.zeros(k_max + 1)
    for lo in range(0, x.size, _NODE_CHUNK):
        r = lam * x[lo : lo + _NODE_CHUNK, None]
        out += w[lo : lo + _NODE_CHUNK] @ np.exp(special.xlogy(k, r) - r - lgk)
    return out


def _base_breakpoints(service, lam, which, k_max):
    lower = 0.0 if which == "equilibrium" else service.lower
    s_lo = math.sqrt(lam * lower)
    # Poisson(lam x) puts negligible mass below k_max once sqrt(lam x) > sqrt(k_max) + 12
    s_max = max(math.sqrt(k_max) + 12.0, s_lo + 12.0)
    x_max = s_max**2 / lam
    pts = [np.arange(s_lo, s_max, 0.5), [s_max]]
    scale = service.scale
    anchor = service.lower
    geo = anchor + scale * 2.0 ** np.arange(-30, 64)
    pts.append(np.sqrt(lam * geo[(geo > lower) & (geo < x_max)]))
    if which == "equilibrium" and service.lower > 0:
        pts.append([math.sqrt(lam * service.lower)])
    s = np.unique(np.concatenate([np.asarray(p, dtype=float) for p in pts]))
    keep = np.concatenate([[True], np.diff(s) > 1e-12 * max(1.0, s_max)])
    return s[keep], x_max


def _nodes_at_level(service, lam, which, k_max, level):
    s_edges, x_max = _base_breakpoints(service, lam, which, k_max)
    if level:
        sub = 2**level
        frac = np.arange(sub) / sub
        left, width = s_edges[:-1], np.diff(s_edges)
        s_edges = np.append((left[:, None] + width[:, None] * frac).ravel(), s_edges[-1])
    t, tw = np.polynomial.legendre.leggauss(GL_ORDER)
    a, b = s_edges[:-1, None], s_edges[1:, None]
    s = (0.5 * (b - a) * t + 0.5 * (b + a)).ravel()
    ws = (0.5 * (b - a) * tw).ravel()
    x = s**2 / lam
    dens = service.pdf(x) if which == "service" else _equilibrium_pdf(service, x)
    w = ws * dens * 2.0 * s / lam
    sf = service.sf if which == "service" else service.equilibrium_sf
    return x, w, x_max, float(sf(x_max))


@lru_cache(maxsize=32)
def service_nodes(service: ServiceDist, lam: float, which: str, k_max: int) -> ServiceNodes:
    """Gauss-Legendre panels in ``sqrt(lam x)``, refined until the weights settle.

    Panels are uniform in ``sqrt(lam x)`` (where the Poisson kernel has constant
    width) merged with a geometric grid around the service scale. Each
    refinement halves every panel; iteration stops when the mixed-Poisson
    weights change by less than ``1e-10`` in sup norm.
    """
    if which not in ("service", "equilibrium"):
        raise DomainError(f"which must be 'service' or 'equilibrium', got {which!r}")
    if k_max < 0:
        raise DomainError("k_max must be >= 0")
    prev = None
    for level in range(MAX_REFINE + 1):
        x, w, x_max, tail = _nodes_at_level(service, lam, which, k_max, level)
        p = _mixed_poisson(x, w, lam, k_max)
        if prev is not None:
            change = float(np.max(np.abs(p - prev)))
            if change < QUAD_TOL:
                return ServiceNodes(x, w, lam, x_max, tail, level, p)
        prev = p
    raise NumericalError(
        f"service quadrature did not settle after {MAX_REFINE} refinements "
        f"(last sup-norm change {change:.2e}, {x.size} nodes)"
    )


def mixed_poisson_weights(params: ModelParams, which: str, k_max: int) -> TruncSeries:
    """Weights ``p_k`` of ``beta(lam - lam z)`` (or of ``beta_e`` for ``which="equilibrium"``).

    ``P{N_B = k}`` for Poisson batch epochs during a service time. The returned
    series' ``mass_deficit`` is ``P{N_B > k_max}``.
    """
    nodes = service_nodes(params.service, params.lam, which, k_max)
    return TruncSeries(nodes.counts, "pmf")
