"""Truncated power series and the generating-function calculus built on them.

Every series is stored as its coefficients ``c[0..N]`` (coefficient of ``z**j``).
Truncated arithmetic is exact in the sense that coefficient ``j`` of a product,
reciprocal or exponential depends only on input coefficients ``0..j``, so the
first ``N + 1`` coefficients are correct whatever mass lies beyond ``N``.

Probability mass functions carry ``kind="pmf"``; their missing mass
``1 - sum(c)`` is exposed as :attr:`TruncSeries.mass_deficit`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DomainError, NumericalError, StabilityError, TruncationMismatchError

__all__ = [
    "TruncSeries",
    "FactorialMoment",
    "point_mass",
    "mul",
    "reciprocal_complement",
    "exp_shifted",
    "integral_to_one",
    "equilibrium_transform",
    "tail_sequence",
    "factorial_moment",
    "compound_poisson",
    "compound_poisson_rows",
    "compound_over_service",
    "shift_down",
    "shift_up",
]

NEG_CLAMP = 1e-12
MASS_SLACK = 1e-9
DEFAULT_TRUNC = 8192


@dataclass(frozen=True, eq=False)
class TruncSeries:
    """Coefficients ``c[0..N]`` of a power series, immutable.

    For ``kind == "pmf"`` coefficients down to ``-1e-12`` are treated as
    round-off and clamped to zero; anything more negative, or a total mass above
    ``1 + 1e-9``, raises :class:`NumericalError`.
    """

    coeffs: np.ndarray
    kind: str = "general"

    def __post_init__(self):
        if self.kind not in ("pmf", "general"):
            raise DomainError(f"unknown series kind {self.kind!r}")
        c = np.array(self.coeffs, dtype=float)
        if c.ndim != 1 or c.size == 0:
            raise DomainError("coefficients must be a non-empty 1-d sequence")
        if not np.all(np.isfinite(c)):
            raise NumericalError("non-finite coefficient in series")
        if self.kind == "pmf":
            lowest = c.min()
            if lowest < -NEG_CLAMP:
                j = int(np.argmin(c))
                raise NumericalError(f"pmf coefficient {j} is {lowest:.3e} < -{NEG_CLAMP}")
            np.maximum(c, 0.0, out=c)
            total = math.fsum(c)
            if total > 1.0 + MASS_SLACK:
                raise NumericalError(f"pmf mass {total!r} exceeds 1")
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    @property
    def trunc(self) -> int:
        return self.coeffs.size - 1

    def __len__(self):
        return self.coeffs.size

    def __getitem__(self, j):
        return self.coeffs[j]

    @property
    def mass(self) -> float:
        return math.fsum(self.coeffs)

    @property
    def mass_deficit(self) -> float:
        """Probability mass beyond the truncation (pmf kind only)."""
        if self.kind != "pmf":
            raise DomainError("mass_deficit is defined for pmf series only")
        return max(0.0, 1.0 - self.mass)

    def tail(self) -> np.ndarray:
        """``P{N > j}`` for ``j = 0..N``, including the mass beyond truncation.

        Summed from the far end so deep-tail values keep their relative accuracy.
        """
        if self.kind != "pmf":
            raise DomainError("tail is defined for pmf series only")
        c = self.coeffs
        out = np.empty_like(c)
        out[-1] = 0.0
        out[:-1] = np.cumsum(c[:0:-1])[::-1]
        return out + self.mass_deficit

    def mean(self) -> float:
        return float(np.dot(np.arange(self.coeffs.size), self.coeffs))

    def evaluate(self, z: float) -> float:
        """Value of the truncated polynomial at ``z`` (Horner)."""
        return float(np.polynomial.polynomial.polyval(z, self.coeffs))

    def with_kind(self, kind: str) -> "TruncSeries":
        return TruncSeries(self.coeffs, kind)


class FactorialMoment(NamedTuple):
    value: float
    truncated: bool  # True when mass beyond N makes ``value`` a lower bound


def _check_same(a: TruncSeries, b: TruncSeries):
    if a.trunc != b.trunc:
        raise TruncationMismatchError(f"truncation {a.trunc} != {b.trunc}")


def _kind(*series: TruncSeries) -> str:
    return "pmf" if all(s.kind == "pmf" for s in series) else "general"


def point_mass(k: int, trunc: int) -> TruncSeries:
    c = np.zeros(trunc + 1)
    if k <= trunc:
        c[k] = 1.0
    return TruncSeries(c, "pmf")


def shift_down(a: TruncSeries) -> TruncSeries:
    """Series of ``A(z)/z``; requires a zero constant term (e.g. ``X`` to ``X - 1``)."""
    if a.coeffs[0] != 0.0:
        raise DomainError("shift_down needs a zero constant coefficient")
    c = np.zeros_like(a.coeffs)
    c[:-1] = a.coeffs[1:]
    return TruncSeries(c, a.kind)


def shift_up(a: TruncSeries) -> TruncSeries:
    """Series of ``z * A(z)`` truncated at the same order."""
    c = np.zeros_like(a.coeffs)
    c[1:] = a.coeffs[:-1]
    return TruncSeries(c, a.kind)


def mul(a: TruncSeries, b: TruncSeries) -> TruncSeries:
    """Cauchy product truncated at ``N`` (law of an independent sum for pmfs)."""
    _check_same(a, b)
    c = np.convolve(a.coeffs, b.coeffs)[: a.trunc + 1]
    return TruncSeries(c, _kind(a, b))


def reciprocal_complement(t: TruncSeries, scale: float) -> TruncSeries:
    """Series of ``(1 - scale) / (1 - scale * T(z))``.

    For a pmf ``t`` and ``0 <= scale < 1`` this is the law of a sum of ``J``
    i.i.d. copies of ``T`` with ``P{J = k} = (1 - scale) * scale**k``.
    """
    if t.kind != "pmf":
        raise DomainError("reciprocal_complement needs a pmf")
    if not scale < 1.0:
        raise StabilityError(f"geometric scale {scale} must be < 1")
    if scale < 0.0:
        raise DomainError("scale must be nonnegative")
    tc = t.coeffs
    n_max = t.trunc
    denom = 1.0 - scale * tc[0]
    gain = scale / denom
    r = np.zeros(n_max + 1)
    r[0] = (1.0 - scale) / denom
    # r_n = gain * sum_{m=1..n} t_m r_{n-m};  trev[N - n + i] == t[n - i]
    trev = tc[::-1].copy()
    for n in range(1, n_max + 1):
        r[n] = gain * np.dot(r[:n], trev[n_max - n : n_max])
    return TruncSeries(r, "pmf")


def exp_shifted(s: TruncSeries, c: float) -> TruncSeries:
    """Series of ``exp(-c) * exp(S(z))`` for ``S`` with ``s_0 = 0``, ``s_m >= 0``.

    Uses ``e_n = (1/n) sum_{m=1..n} m s_m e_{n-m}``. The result is a pmf when
    ``c == S(1)``; it is returned as one whenever its mass does not exceed one.
    """
    sc = s.coeffs
    if sc[0] != 0.0:
        raise DomainError("exp_shifted needs a zero constant coefficient")
    if np.any(sc < -NEG_CLAMP):
        raise DomainError("exp_shifted needs nonnegative coefficients")
    n_max = s.trunc
    ms = np.arange(n_max + 1) * np.maximum(sc, 0.0)
    msrev = ms[::-1].copy()
    e = np.zeros(n_max + 1)
    e[0] = math.exp(-c)
    for n in range(1, n_max + 1):
        e[n] = np.dot(e[:n], msrev[n_max - n : n_max]) / n
    kind = "pmf" if math.fsum(e) <= 1.0 + MASS_SLACK else "general"
    return TruncSeries(e, kind)


def integral_to_one(k: TruncSeries) -> TruncSeries:
    """Series of ``A(z) = int_z^1 K(u) du``.

    ``a_0 = sum_j k_j/(j+1)`` over the available coefficients and
    ``a_j = -k_{j-1}/j``. Mass of ``K`` beyond the truncation is not seen by
    ``a_0``; callers needing that correction add it themselves.
    """
    kc = k.coeffs
    j = np.arange(1, kc.size + 1, dtype=float)
    a = np.empty_like(kc)
    a[0] = math.fsum(kc / j)
    a[1:] = -kc[:-1] / j[:-1]
    return TruncSeries(a, "general")


def equilibrium_transform(q: TruncSeries, mean: float) -> TruncSeries:
    """Discrete equilibrium law ``q_de(n) = P{N > n} / mean``."""
    if not mean > 0.0:
        raise DomainError(f"equilibrium_transform needs mean > 0, got {mean}")
    if q.kind != "pmf":
        raise DomainError("equilibrium_transform needs a pmf")
    return TruncSeries(q.tail() / mean, "pmf")


def tail_sequence(q: TruncSeries, n: int) -> TruncSeries:
    """``g_n`` from ``g_0 = q`` and ``g_{m+1}(j) = sum_{i>j} g_m(i)``.

    The first step includes the pmf's mass beyond truncation; later steps sum
    the available coefficients only, so ``g_n`` for ``n >= 2`` is a truncation
    lower bound near ``j = N``.
    """
    if n < 1:
        raise DomainError("tail_sequence order must be >= 1")
    g = q.tail() if q.kind == "pmf" else _upper_sums(q.coeffs)
    for _ in range(n - 1):
        g = _upper_sums(g)
    return TruncSeries(g, "general")


def _upper_sums(c: np.ndarray) -> np.ndarray:
    out = np.zeros_like(c)
    out[:-1] = np.cumsum(c[:0:-1])[::-1]
    return out


def factorial_moment(q: TruncSeries, n: int) -> FactorialMoment:
    """``sum_k k(k-1)...(k-n+1) q(k)`` over the available coefficients."""
    if n < 0:
        raise DomainError("factorial moment order must be >= 0")
    k = np.arange(q.coeffs.size, dtype=float)
    falling = np.ones_like(k)
    for i in range(n):
        falling *= k - i
    value = math.fsum(falling * q.coeffs)
    truncated = q.kind == "pmf" and q.mass_deficit > 0.0
    return FactorialMoment(value, truncated)


# -- compound Poisson ---------------------------------------------------------

_LOG_START = 600.0  # exp(-600) is safely representable
_RESCALE_AT = 1e50
_BLOCK = 32
_ROW_CHUNK = 256


def compound_poisson_rows(rates: np.ndarray, batch: np.ndarray) -> np.ndarray:
    """Compound Poisson pmfs ``exp(r (X(z) - 1))`` for many rates at once.

    Row ``i`` is the pmf for ``rates[i]``. Runs the Panjer recursion
    ``f_n = (r/n) sum_j j x_j f_{n-j}`` in blocks so that the bulk of the work
    is one matrix product per block. Rows are rescaled in log space to survive
    ``exp(-r)`` underflow for large rates.
    """
    rates = np.asarray(rates, dtype=float)
    x = np.asarray(batch, dtype=float)
    n_max = x.size - 1
    m = rates.size
    jx = np.arange(n_max + 1) * x
    start = np.minimum(rates, _LOG_START)
    logscale = start - rates
    f = np.zeros((m, n_max + 1))
    f[:, 0] = np.exp(-start)
    s = 1
    while s <= n_max:
        e = min(s + _BLOCK, n_max + 1)
        idx = np.arange(s, e)[None, :] - np.arange(s)[:, None]
        known = f[:, :s] @ jx[idx]
        for n in range(s, e):
            acc = known[:, n - s]
            if n > s:
                acc = acc + f[:, s:n] @ jx[n - s : 0 : -1]
            f[:, n] = rates * acc / n
        peak = f[:, s:e].max(axis=1)
        big = peak > _RESCALE_AT
        if np.any(big):
            with np.errstate(under="ignore"):
                f[big, :e] /= peak[big, None]
            logscale[big] += np.log(peak[big])
        s = e
    with np.errstate(under="ignore"):
        f *= np.exp(logscale)[:, None]
    return f


def compound_poisson(rate: float, batch_pmf: TruncSeries, trunc: int | None = None) -> TruncSeries:
    """Compound Poisson pmf ``exp(rate * (X(z) - 1))`` truncated at ``N``."""
    if rate < 0.0:
        raise DomainError("rate must be nonnegative")
    if batch_pmf.kind != "pmf":
        raise DomainError("batch law must be a pmf")
    if batch_pmf.coeffs[0] != 0.0:
        raise DomainError("batch law must put no mass at zero")
    x = batch_pmf.coeffs
    if trunc is not None and trunc != batch_pmf.trunc:
        x = np.zeros(trunc + 1)
        n = min(trunc, batch_pmf.trunc)
        x[: n + 1] = batch_pmf.coeffs[: n + 1]
    row = compound_poisson_rows(np.array([rate]), x)[0]
    return TruncSeries(row, "pmf")


def compound_over_service(params, which: str, trunc: int) -> TruncSeries:
    """pmf of customers arriving during a service (or equilibrium service) time.

    Generating function ``beta(lam - lam X(z))`` for ``which="service"`` and
    ``beta_e(lam - lam X(z))`` for ``which="equilibrium"``, assembled as a
    quadrature mixture of compound Poisson laws over the service time.
    """
    from .model import Deterministic, service_nodes

    batch = params.batch
    if isinstance(batch, Deterministic):
        # X == m: counts of batches spread onto multiples of m
        counts = service_nodes(params.service, params.lam, which, trunc).mixed_poisson(trunc // batch.m)
        c = np.zeros(trunc + 1)
        c[:: batch.m][: counts.size] = counts
        return TruncSeries(c, "pmf")
    nodes = service_nodes(params.service, params.lam, which, trunc)
    xpmf = batch.pmf_array(trunc)
    acc = np.zeros(trunc + 1)
    for lo in range(0, nodes.x.size, _ROW_CHUNK):
        hi = lo + _ROW_CHUNK
        acc += nodes.w[lo:hi] @ compound_poisson_rows(params.lam * nodes.x[lo:hi], xpmf)
    return TruncSeries(acc, "pmf")
