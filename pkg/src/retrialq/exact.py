"""Exact (truncated) stationary distributions of the retrial queue.

All laws are assembled from three building blocks, each computed once per
``(params, N)``:

* ``N_BX``   customers arriving during a service time, GF ``beta(lam - lam X(z))``
* ``N_BeX``  customers arriving during an equilibrium service time
* ``X``      the batch law itself

From these::

    K*  = equilibrium law of N_BX + X0          (mean rho + chi1 - 1)
    T   = N_BeX + X_de
    K°  = geometric(rho) compound of T
    K   = K* + K°
    D0  = exp(-psi * int_z^1 K(u) du)
    Linf = N_BX + K°,   Lmu = Linf + D0,   D1 = T + K° + D0
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError
from .model import ModelParams
from .series import (
    TruncSeries,
    compound_over_service,
    equilibrium_transform,
    exp_shifted,
    integral_to_one,
    mul,
    reciprocal_complement,
    shift_down,
    shift_up,
)

__all__ = [
    "ExactDistributions",
    "Blocks",
    "building_blocks",
    "k_star_series",
    "k_circ_series",
    "k_series",
    "d0_series",
    "d0_from_k",
    "l_inf_series",
    "l_mu_series",
    "d1_series",
    "joint_orbit_server",
    "l_mu_from_joint",
    "exact_distributions",
    "ultimately_decreasing",
]


@dataclass(frozen=True)
class Blocks:
    n_bx: TruncSeries
    n_bex: TruncSeries
    batch: TruncSeries
    x0: TruncSeries
    x_de: TruncSeries


def _check(params: ModelParams, trunc: int):
    if trunc < 1:
        raise DomainError("truncation must be >= 1")
    params.require_stable()


@lru_cache(maxsize=8)
def building_blocks(params: ModelParams, trunc: int) -> Blocks:
    _check(params, trunc)
    batch = TruncSeries(params.batch.pmf_array(trunc), "pmf")
    return Blocks(
        n_bx=compound_over_service(params, "service", trunc),
        n_bex=compound_over_service(params, "equilibrium", trunc),
        batch=batch,
        x0=shift_down(batch),
        x_de=equilibrium_transform(batch, params.chi1),
    )


@lru_cache(maxsize=8)
def k_star_series(params: ModelParams, trunc: int) -> TruncSeries:
    b = building_blocks(params, trunc)
    return equilibrium_transform(mul(b.n_bx, b.x0), params.rho + params.chi1 - 1.0)


@lru_cache(maxsize=8)
def _t_series(params: ModelParams, trunc: int) -> TruncSeries:
    b = building_blocks(params, trunc)
    return mul(b.n_bex, b.x_de)


@lru_cache(maxsize=8)
def k_circ_series(params: ModelParams, trunc: int) -> TruncSeries:
    _check(params, trunc)
    return reciprocal_complement(_t_series(params, trunc), params.rho)


@lru_cache(maxsize=8)
def k_series(params: ModelParams, trunc: int) -> TruncSeries:
    return mul(k_star_series(params, trunc), k_circ_series(params, trunc))


def _a0_remainder(k: TruncSeries) -> float:
    """Estimate of ``sum_{j>N} k_j/(j+1)``, the part of ``a_0`` truncation hides.

    With ``P{K>j}`` locally ``~ C j^-e`` the sum is about
    ``P{K>N} * e / ((e+1) N)``; ``e`` is read off the computed tail.
    """
    tail_n = k.mass_deficit
    n = k.trunc
    if tail_n <= 0.0 or n < 4:
        return 0.0
    tail_half = k.tail()[n // 2]
    e = math.log(tail_half / tail_n) / math.log(n / (n // 2)) if tail_half > tail_n else 0.0
    return tail_n * e / ((e + 1.0) * (n + 1))


def d0_from_k(k: TruncSeries, psi: float) -> TruncSeries:
    """``exp(-psi * int_z^1 K(u) du)`` for a pmf ``k``."""
    if k.kind != "pmf":
        raise DomainError("d0_from_k needs a pmf")
    if psi < 0.0:
        raise DomainError("psi must be nonnegative")
    a = integral_to_one(k).coeffs
    a0 = a[0] + _a0_remainder(k)
    s = -psi * a
    s[0] = 0.0
    return exp_shifted(TruncSeries(s), psi * a0).with_kind("pmf")


@lru_cache(maxsize=8)
def d0_series(params: ModelParams, trunc: int) -> TruncSeries:
    return d0_from_k(k_series(params, trunc), params.psi)


@lru_cache(maxsize=8)
def l_inf_series(params: ModelParams, trunc: int) -> TruncSeries:
    return mul(building_blocks(params, trunc).n_bx, k_circ_series(params, trunc))


@lru_cache(maxsize=8)
def l_mu_series(params: ModelParams, trunc: int) -> TruncSeries:
    return mul(l_inf_series(params, trunc), d0_series(params, trunc))


@lru_cache(maxsize=8)
def d1_series(params: ModelParams, trunc: int) -> TruncSeries:
    tk = mul(_t_series(params, trunc), k_circ_series(params, trunc))
    return mul(tk, d0_series(params, trunc))


def joint_orbit_server(params: ModelParams, trunc: int) -> tuple[np.ndarray, np.ndarray]:
    """``(p0, p1)`` with ``p_i[j] = P{server state i, orbit size j}``."""
    rho = params.rho
    return (1.0 - rho) * d0_series(params, trunc).coeffs, rho * d1_series(params, trunc).coeffs


def l_mu_from_joint(params: ModelParams, trunc: int) -> TruncSeries:
    """``p0(z) + z p1(z)``: the system size assembled from the joint law."""
    p0, p1 = joint_orbit_server(params, trunc)
    return TruncSeries(p0 + shift_up(TruncSeries(p1)).coeffs, "general")


def ultimately_decreasing(pmf: TruncSeries, lo: int, hi: int) -> bool:
    """Whether ``pmf[j]`` is nonincreasing for ``lo <= j <= hi``."""
    c = pmf.coeffs[lo : hi + 1]
    return bool(np.all(np.diff(c) <= 0.0))


@dataclass(frozen=True)
class ExactDistributions:
    k_star: TruncSeries
    k_circ: TruncSeries
    k: TruncSeries
    d0: TruncSeries
    d1: TruncSeries
    l_inf: TruncSeries
    l_mu: TruncSeries
    psi: float
    rho: float

    NAMES = ("k_star", "k_circ", "k", "d0", "d1", "l_inf", "l_mu")

    @property
    def trunc(self) -> int:
        return self.k.trunc

    def deficits(self) -> dict[str, float]:
        return {name: getattr(self, name).mass_deficit for name in self.NAMES}


def exact_distributions(params: ModelParams, trunc: int, *, window: tuple[int, int] | None = None) -> ExactDistributions:
    """All seven laws at truncation ``trunc``.

    If ``window`` is given, warns when ``P{Linf = j}`` is not nonincreasing on it.
    """
    out = ExactDistributions(
        k_star=k_star_series(params, trunc),
        k_circ=k_circ_series(params, trunc),
        k=k_series(params, trunc),
        d0=d0_series(params, trunc),
        d1=d1_series(params, trunc),
        l_inf=l_inf_series(params, trunc),
        l_mu=l_mu_series(params, trunc),
        psi=params.psi,
        rho=params.rho,
    )
    if window is not None and not ultimately_decreasing(out.l_inf, *window):
        warnings.warn(f"P{{Linf=j}} is not nonincreasing on j in {list(window)}", RuntimeWarning, stacklevel=2)
    return out
