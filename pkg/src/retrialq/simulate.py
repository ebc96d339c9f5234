"""Discrete-event simulation of the batch-arrival retrial queue and its
no-retrial counterpart.

The retrial system is tracked as (server busy?, orbit size n). Failed retrials
while the server is busy leave the state unchanged and, by memorylessness,
need not be simulated: an idle server races one Exp(lam) arrival clock against
one Exp(n mu) orbit clock, a busy one races arrivals against its scheduled
completion.

Random streams: replication ``r`` draws from
``Generator(Philox(SeedSequence([base_seed, r])))``. ``SeedSequence`` hashes the
pair into the Philox key, so streams are reproducible on any machine and
independent across ``r``. Uniforms are fed to compiled kernels in fixed-size
chunks; the kernels are resumable, so chunking does not change results.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import DomainError
from .model import Deterministic, Exponential, Geometric, Lomax, ModelParams, Pareto, ParetoTail

__all__ = [
    "SimConfig",
    "SimEstimate",
    "ReplicationResult",
    "simulate_retrial",
    "simulate_standard",
    "replicate",
    "run_replication",
    "stream",
    "MIN_UPCROSSINGS",
]

CHUNK = 1 << 18
MIN_UPCROSSINGS = 100  # fewer observed excursions above j -> estimate flagged unreliable
Z95 = 1.959963984540054

_SVC_EXP, _SVC_LOMAX, _SVC_PARETO = 0, 1, 2
_BAT_DET, _BAT_GEO, _BAT_PARETO = 0, 1, 2


@dataclass(frozen=True)
class SimConfig:
    """Run lengths in simulated time; ``warmup=None`` means 5% of the horizon."""

    horizon: float
    warmup: float | None = None
    replications: int = 1
    base_seed: int = 0
    max_tracked_level: int = 64
    workers: int = 1

    def __post_init__(self):
        if not (self.horizon > 0 and math.isfinite(self.horizon)):
            raise DomainError("horizon must be positive and finite")
        if self.warmup is not None and not self.warmup >= 0:
            raise DomainError("warmup must be >= 0")
        if not self.horizon > self.effective_warmup:
            raise DomainError("horizon must exceed warmup (nothing left to observe)")
        if self.replications < 1:
            raise DomainError("replications must be >= 1")
        if self.max_tracked_level < 1:
            raise DomainError("max_tracked_level must be >= 1")
        if not 0 <= self.base_seed < 2**64:
            raise DomainError("base_seed must be a 64-bit unsigned integer")
        if self.workers < 1:
            raise DomainError("workers must be >= 1")

    @property
    def effective_warmup(self) -> float:
        return 0.05 * self.horizon if self.warmup is None else float(self.warmup)


def stream(base_seed: int, r: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([base_seed, r])))


# -- compiled kernels ---------------------------------------------------------

def _encode(params: ModelParams):
    s = params.service
    if isinstance(s, Exponential):
        svc = (_SVC_EXP, s.rate, 0.0)
    elif isinstance(s, Lomax):
        svc = (_SVC_LOMAX, s.sigma, s.d)
    elif isinstance(s, Pareto):
        svc = (_SVC_PARETO, s.x_m, s.d)
    else:
        raise DomainError(f"no sampler for service law {s!r}")
    b = params.batch
    if isinstance(b, Deterministic):
        bat = (_BAT_DET, float(b.m), 0.0)
    elif isinstance(b, Geometric):
        bat = (_BAT_GEO, b.p, 0.0)
    elif isinstance(b, ParetoTail):
        bat = (_BAT_PARETO, b.theta, b.d)
    else:
        raise DomainError(f"no sampler for batch law {b!r}")
    return svc, bat


@numba.njit(cache=True, nogil=True)
def _service(v, kind, p1, p2):
    # v in (0, 1] plays the role of the upper-tail probability
    if kind == _SVC_EXP:
        return -math.log(v) / p1
    if kind == _SVC_LOMAX:
        return p1 * (v ** (-1.0 / p2) - 1.0)
    return p1 * v ** (-1.0 / p2)


@numba.njit(cache=True, nogil=True)
def _batch(v, kind, p1, p2):
    if kind == _BAT_DET:
        return np.int64(p1)
    if kind == _BAT_GEO:
        return np.int64(1.0 + math.floor(math.log(v) / math.log(p1)))
    x = math.floor(p1 * (v ** (-1.0 / p2) - 1.0))
    return np.int64(min(x, 4.0e18)) + 1


@numba.njit(cache=True, nogil=True)
def _record(fs, occ, t0, t1, row, level, busy, size, warmup, horizon):
    lo = max(t0, warmup)
    hi = min(t1, horizon)
    if hi > lo:
        dt = hi - lo
        top = occ.shape[1] - 1
        occ[row, min(level, top)] += dt
        fs[2] += dt * busy
        fs[3] += dt * size


@numba.njit(cache=True, nogil=True)
def _upcross(diff, t, warmup, l0, l1):
    if t >= warmup and l1 > l0:
        top = diff.size - 1
        if l0 < top:
            diff[l0] += 1
            diff[min(l1, top)] -= 1


@numba.njit(cache=True, nogil=True)
def _retrial_kernel(u, fs, ist, occ, diff, lam, mu, sk, s1, s2, bk, b1, b2, warmup, horizon):
    """Advance the retrial system until the horizon or the uniforms run out.

    fs = [t, s_end, busy_time, size_time]; ist = [busy, n, events, done].
    Returns the number of uniforms consumed.
    """
    pos = 0
    m = u.size
    t, s_end = fs[0], fs[1]
    busy, n, ev = ist[0], ist[1], ist[2]
    while pos + 4 <= m:
        if busy == 0:
            rate = lam + n * mu
            t_next = t - math.log(u[pos]) / rate
            if t_next >= horizon:
                _record(fs, occ, t, horizon, 0, n, 0, n, warmup, horizon)
                t = horizon
                ist[3] = 1
                pos += 1
                break
            _record(fs, occ, t, t_next, 0, n, 0, n, warmup, horizon)
            t = t_next
            if u[pos + 1] * rate < lam:
                x = _batch(u[pos + 2], bk, b1, b2)
                _upcross(diff, t, warmup, n, n + x)
                n += x - 1
            else:
                n -= 1  # the system size is unchanged
            busy = 1
            s_end = t + _service(u[pos + 3], sk, s1, s2)
            pos += 4
        else:
            t_arr = t - math.log(u[pos]) / lam
            if t_arr < s_end:
                if t_arr >= horizon:
                    _record(fs, occ, t, horizon, 1, n, 1, n + 1, warmup, horizon)
                    t = horizon
                    ist[3] = 1
                    pos += 1
                    break
                _record(fs, occ, t, t_arr, 1, n, 1, n + 1, warmup, horizon)
                t = t_arr
                x = _batch(u[pos + 1], bk, b1, b2)
                _upcross(diff, t, warmup, n + 1, n + 1 + x)
                n += x
                pos += 2
            else:
                if s_end >= horizon:
                    _record(fs, occ, t, horizon, 1, n, 1, n + 1, warmup, horizon)
                    t = horizon
                    ist[3] = 1
                    pos += 1
                    break
                _record(fs, occ, t, s_end, 1, n, 1, n + 1, warmup, horizon)
                t = s_end
                busy = 0
                pos += 1
        ev += 1
    fs[0], fs[1] = t, s_end
    ist[0], ist[1], ist[2] = busy, n, ev
    return pos


@numba.njit(cache=True, nogil=True)
def _standard_kernel(u, fs, ist, occ, diff, lam, mu, sk, s1, s2, bk, b1, b2, warmup, horizon):
    """FIFO queue without retrials; ``ist[1]`` is the number in system."""
    pos = 0
    m = u.size
    t, s_end = fs[0], fs[1]
    size, ev = ist[1], ist[2]
    while pos + 4 <= m:
        if size == 0:
            t_next = t - math.log(u[pos]) / lam
            if t_next >= horizon:
                _record(fs, occ, t, horizon, 0, 0, 0, 0, warmup, horizon)
                t = horizon
                ist[3] = 1
                pos += 1
                break
            _record(fs, occ, t, t_next, 0, 0, 0, 0, warmup, horizon)
            t = t_next
            x = _batch(u[pos + 1], bk, b1, b2)
            _upcross(diff, t, warmup, 0, x)
            size = x
            s_end = t + _service(u[pos + 2], sk, s1, s2)
            pos += 3
        else:
            t_arr = t - math.log(u[pos]) / lam
            t_ev = min(t_arr, s_end)
            if t_ev >= horizon:
                _record(fs, occ, t, horizon, 0, size, 1, size, warmup, horizon)
                t = horizon
                ist[3] = 1
                pos += 1
                break
            _record(fs, occ, t, t_ev, 0, size, 1, size, warmup, horizon)
            t = t_ev
            if t_arr < s_end:
                x = _batch(u[pos + 1], bk, b1, b2)
                _upcross(diff, t, warmup, size, size + x)
                size += x
                pos += 2
            else:
                size -= 1
                if size > 0:
                    s_end = t + _service(u[pos + 1], sk, s1, s2)
                pos += 2
        ev += 1
    fs[0], fs[1] = t, s_end
    ist[1], ist[2] = size, ev
    return pos


# -- one replication ----------------------------------------------------------

@dataclass(frozen=True)
class ReplicationResult:
    occupancy: np.ndarray  # (2, J+1) time in (server state, level); level J means >= J
    upcrossings: np.ndarray  # (J,) up-crossings of level j by the system size
    busy_time: float
    size_time: float
    observed: float
    events: int


def run_replication(params: ModelParams, config: SimConfig, r: int, *, retrial: bool = True) -> ReplicationResult:
    params.require_stable()
    (sk, s1, s2), (bk, b1, b2) = _encode(params)
    J = config.max_tracked_level
    warmup, horizon = config.effective_warmup, float(config.horizon)
    gen = stream(config.base_seed, r)
    fs = np.zeros(4)
    ist = np.zeros(4, dtype=np.int64)
    occ = np.zeros((2, J + 1))
    diff = np.zeros(J + 1, dtype=np.int64)
    kernel = _retrial_kernel if retrial else _standard_kernel
    left = np.empty(0)
    while ist[3] == 0:
        u = np.concatenate((left, 1.0 - gen.random(CHUNK)))  # (0, 1]
        pos = kernel(u, fs, ist, occ, diff, params.lam, params.mu, sk, s1, s2, bk, b1, b2, warmup, horizon)
        left = u[pos:]
    return ReplicationResult(
        occupancy=occ,
        upcrossings=np.cumsum(diff)[:J],
        busy_time=fs[2],
        size_time=fs[3],
        observed=horizon - warmup,
        events=int(ist[2]),
    )


# -- aggregation --------------------------------------------------------------

def _tail_from_pmf(p: np.ndarray) -> np.ndarray:
    """``P{V > j}`` for ``j = 0..len(p)-2`` from a pmf whose last cell is the top bucket."""
    return np.clip(1.0 - np.cumsum(p)[:-1], 0.0, 1.0)


def _mean_hw(x: np.ndarray):
    x = np.asarray(x, dtype=float)
    mean = x.mean(axis=0)
    if x.shape[0] < 2:
        return mean, np.full_like(mean, np.nan)
    return mean, Z95 * x.std(axis=0, ddof=1) / math.sqrt(x.shape[0])


@dataclass(frozen=True)
class SimEstimate:
    """Replication means and 95% normal half-widths.

    ``tail[j]`` estimates ``P{L > j}`` (``L_mu`` for the retrial system, ``L_inf``
    otherwise); ``d0_tail``/``d1_tail`` are orbit tails given an idle/busy
    server (retrial system only). Entries with ``reliable[j] == False`` rest on
    fewer than ``MIN_UPCROSSINGS`` observed excursions above ``j``.
    """

    system: str
    busy_fraction: float
    busy_fraction_hw: float
    mean_size: float
    mean_size_hw: float
    tail: np.ndarray
    tail_hw: np.ndarray
    pmf: np.ndarray
    d0_tail: np.ndarray | None
    d0_tail_hw: np.ndarray | None
    d1_tail: np.ndarray | None
    d1_tail_hw: np.ndarray | None
    d0_pmf: np.ndarray | None
    d1_pmf: np.ndarray | None
    upcrossings: np.ndarray
    reliable: np.ndarray
    events: tuple[int, ...]
    seeds: tuple[tuple[int, int], ...]
    per_replication: dict = field(default_factory=dict)

    @property
    def replications(self) -> int:
        return len(self.events)


def _aggregate(results: list[ReplicationResult], config: SimConfig, retrial: bool) -> SimEstimate:
    J = config.max_tracked_level
    busy, size, tails, pmfs, d0t, d1t, d0p, d1p = [], [], [], [], [], [], [], []
    for res in results:
        occ = res.occupancy / res.observed
        busy.append(res.busy_time / res.observed)
        size.append(res.size_time / res.observed)
        if retrial:
            # P{L = j} = P{idle, n = j} + P{busy, n = j - 1}
            p = occ[0].copy()
            p[1:] += occ[1, :-1]
            p[-1] += occ[1, -1]
            i0, i1 = occ[0].sum(), occ[1].sum()
            q0 = occ[0] / i0 if i0 > 0 else np.zeros(J + 1)
            q1 = occ[1] / i1 if i1 > 0 else np.zeros(J + 1)
            d0p.append(q0)
            d1p.append(q1)
            d0t.append(_tail_from_pmf(q0))
            d1t.append(_tail_from_pmf(q1))
        else:
            p = occ[0]
        pmfs.append(p)
        tails.append(_tail_from_pmf(p))
    bf, bf_hw = _mean_hw(busy)
    ms, ms_hw = _mean_hw(size)
    tail, tail_hw = _mean_hw(tails)
    ups = np.sum([res.upcrossings for res in results], axis=0)
    per = {"busy_fraction": np.array(busy), "mean_size": np.array(size), "tail": np.array(tails)}
    if retrial:
        d0, d0_hw = _mean_hw(d0t)
        d1, d1_hw = _mean_hw(d1t)
        d0pm, d1pm = np.mean(d0p, axis=0), np.mean(d1p, axis=0)
        per["d0_tail"], per["d1_tail"] = np.array(d0t), np.array(d1t)
    else:
        d0 = d0_hw = d1 = d1_hw = d0pm = d1pm = None
    return SimEstimate(
        system="retrial" if retrial else "standard",
        busy_fraction=float(bf),
        busy_fraction_hw=float(bf_hw),
        mean_size=float(ms),
        mean_size_hw=float(ms_hw),
        tail=tail,
        tail_hw=tail_hw,
        pmf=np.mean(pmfs, axis=0),
        d0_tail=d0,
        d0_tail_hw=d0_hw,
        d1_tail=d1,
        d1_tail_hw=d1_hw,
        d0_pmf=d0pm,
        d1_pmf=d1pm,
        upcrossings=ups,
        reliable=ups >= MIN_UPCROSSINGS,
        events=tuple(res.events for res in results),
        seeds=tuple((config.base_seed, r) for r in range(len(results))),
        per_replication=per,
    )


def replicate(params: ModelParams, config: SimConfig, *, retrial: bool = True) -> SimEstimate:
    """Run ``config.replications`` independent replications and aggregate.

    Results are collected in replication order, so the aggregate is identical
    for any ``config.workers``.
    """
    params.require_stable()
    reps = range(config.replications)
    if config.workers > 1 and config.replications > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(lambda r: run_replication(params, config, r, retrial=retrial), reps))
    else:
        results = [run_replication(params, config, r, retrial=retrial) for r in reps]
    return _aggregate(results, config, retrial)


def simulate_retrial(params: ModelParams, config: SimConfig) -> SimEstimate:
    return replicate(params, config, retrial=True)


def simulate_standard(params: ModelParams, config: SimConfig) -> SimEstimate:
    return replicate(params, config, retrial=False)
