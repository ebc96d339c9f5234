"""Tail asymptotics of the retrial queue under regularly varying inputs.

Service tail ``P{B > x} ~ x^-d_B L`` and batch tail ``P{X > j} ~ c_X j^-d_X L``
with ``a = min(d_B, d_X)``. Three regimes:

* Case1  ``d_X > d_B``: the service time dominates (``c_X`` is taken as 0)
* Case2  ``d_X < d_B``: the batch size dominates
* Case3  ``d_X == d_B``: both contribute

Every constant is computed twice. :func:`branch_constants` transcribes the
case-by-case closed forms; :func:`component_constants` rebuilds them from the
per-source tails of the building blocks (service contribution plus batch
contribution, summed). The two must agree to rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InfiniteMeanError, UnsupportedModelError
from .model import ModelParams

__all__ = [
    "CASE_EQUAL_TOL",
    "Regime",
    "TailCurve",
    "Absent",
    "AsymptoticReport",
    "classify",
    "psi",
    "c_K",
    "c_K_star",
    "c_K_circ",
    "c_D0",
    "c_D1",
    "refined_coefficient",
    "refined_difference_curve",
    "intermediate_curves",
    "branch_constants",
    "component_constants",
    "asymptotic_report",
]

CASE_EQUAL_TOL = 1e-9

CASE1, CASE2, CASE3 = "Case1", "Case2", "Case3"


@dataclass(frozen=True)
class Regime:
    """``a``, the active case and the constants of both tails against a common ``L``.

    ``L`` is the slowly varying factor every tail curve is written against and
    ``c_X`` the batch constant normalised to it (zero in Case1).
    """

    a: float
    case_id: str
    d_B: float
    d_X: float
    L_service: float | None
    L_batch: float | None
    L: float
    c_X: float

    @property
    def service_active(self) -> bool:
        return self.case_id in (CASE1, CASE3)

    @property
    def batch_active(self) -> bool:
        return self.case_id in (CASE2, CASE3)


@dataclass(frozen=True)
class TailCurve:
    """``j -> c * j**-e * L``."""

    c: float
    e: float
    L: float

    def __post_init__(self):
        if not (self.c > 0 and self.e > 0 and self.L > 0):
            raise DomainError(f"tail curve needs positive c, e, L; got {self.c}, {self.e}, {self.L}")

    def __call__(self, j):
        j = np.asarray(j, dtype=float)
        return (self.c * self.L * j ** (-self.e))[()]

    def as_dict(self) -> dict:
        return {"c": self.c, "e": self.e, "L": self.L}


@dataclass(frozen=True)
class Absent:
    """Marks a curve that does not exist in the active regime."""

    reason: str

    def as_dict(self) -> dict:
        return {"absent": self.reason}


def classify(params: ModelParams) -> Regime:
    d_B = float(params.service.tail_index)
    d_X = float(params.batch.tail_index)
    if math.isinf(d_B) and math.isinf(d_X):
        raise UnsupportedModelError("both service and batch laws are light-tailed; no regularly varying regime")
    for name, d in (("d_B", d_B), ("d_X", d_X)):
        if d <= 1.0:
            raise InfiniteMeanError(f"{name} = {d} <= 1 gives an infinite mean")
    L_s = params.service.tail_constant if math.isfinite(d_B) else None
    # ParetoTail carries its constant as c_X with a unit slowly varying part
    L_b = 1.0 if math.isfinite(d_X) else None
    c_raw = params.batch.tail_constant
    if math.isfinite(d_B) and math.isfinite(d_X) and abs(d_X - d_B) < CASE_EQUAL_TOL:
        return Regime(d_B, CASE3, d_B, d_X, L_s, L_b, L_s, c_raw * L_b / L_s)
    if d_X > d_B:
        return Regime(d_B, CASE1, d_B, d_X, L_s, L_b, L_s, 0.0)
    return Regime(d_X, CASE2, d_B, d_X, L_s, L_b, L_b, c_raw)


def psi(params: ModelParams) -> float:
    return params.psi


# -- closed forms, one branch per case -----------------------------------------

def _parts(params):
    lam, chi1, rho = params.lam, params.chi1, params.rho
    return lam, chi1, rho, params.beta1, params.mu


def c_K(params: ModelParams, regime: Regime) -> float:
    lam, chi1, rho, _, _ = _parts(params)
    a, cx = regime.a, regime.c_X
    den = (a - 1.0) * (1.0 - rho) * (rho + chi1 - 1.0)
    if regime.case_id == CASE1:
        return (lam * chi1) ** a * chi1 / den
    if regime.case_id == CASE2:
        return cx / den
    return ((lam * chi1) ** a * chi1 + cx) / den


def c_K_star(params: ModelParams, regime: Regime) -> float:
    lam, chi1, rho, beta1, _ = _parts(params)
    a, cx = regime.a, regime.c_X
    den = (a - 1.0) * (rho + chi1 - 1.0)
    if regime.case_id == CASE1:
        return (lam * chi1) ** a / den
    if regime.case_id == CASE2:
        return (1.0 + lam * beta1) * cx / den
    return ((lam * chi1) ** a + (1.0 + lam * beta1) * cx) / den


def c_K_circ(params: ModelParams, regime: Regime) -> float:
    lam, chi1, rho, beta1, _ = _parts(params)
    a, cx = regime.a, regime.c_X
    den = (a - 1.0) * (1.0 - rho)
    if regime.case_id == CASE1:
        return (lam * chi1) ** a / den
    if regime.case_id == CASE2:
        return lam * beta1 * cx / den
    return ((lam * chi1) ** a + lam * beta1 * cx) / den


def c_D0(params: ModelParams, regime: Regime) -> float:
    lam, chi1, rho, _, mu = _parts(params)
    a, cx = regime.a, regime.c_X
    den = a * mu * (1.0 - rho) ** 2
    if regime.case_id == CASE1:
        return (lam * chi1) ** (a + 1.0) / den
    if regime.case_id == CASE2:
        return lam * cx / den
    return ((lam * chi1) ** (a + 1.0) + lam * cx) / den


def c_D1(params: ModelParams, regime: Regime) -> float:
    lam, chi1, rho, beta1, _ = _parts(params)
    a, cx = regime.a, regime.c_X
    den = (a - 1.0) * (1.0 - rho) * rho
    if regime.case_id == CASE1:
        return (lam * chi1) ** a / den
    if regime.case_id == CASE2:
        return lam * beta1 * cx / den
    return ((lam * chi1) ** a + lam * beta1 * cx) / den


def refined_coefficient(params: ModelParams, regime: Regime) -> float:
    return (regime.a - 1.0) * params.psi * c_K_circ(params, regime) + c_D0(params, regime)


def refined_difference_curve(params: ModelParams, regime: Regime | None = None) -> TailCurve:
    """Asymptote of ``P{Lmu > j} - P{Linf > j}``, one order below either tail."""
    regime = regime or classify(params)
    return TailCurve(refined_coefficient(params, regime), regime.a, regime.L)


BRANCH_FORMULAS = {
    "c_K": {
        CASE1: "(lam*chi1)^a*chi1/((a-1)(1-rho)(rho+chi1-1))",
        CASE2: "c_X/((a-1)(1-rho)(rho+chi1-1))",
        CASE3: "((lam*chi1)^a*chi1+c_X)/((a-1)(1-rho)(rho+chi1-1))",
    },
    "c_K_star": {
        CASE1: "(lam*chi1)^a/((a-1)(rho+chi1-1))",
        CASE2: "(1+lam*beta1)*c_X/((a-1)(rho+chi1-1))",
        CASE3: "((lam*chi1)^a+(1+lam*beta1)*c_X)/((a-1)(rho+chi1-1))",
    },
    "c_K_circ": {
        CASE1: "(lam*chi1)^a/((a-1)(1-rho))",
        CASE2: "lam*beta1*c_X/((a-1)(1-rho))",
        CASE3: "((lam*chi1)^a+lam*beta1*c_X)/((a-1)(1-rho))",
    },
    "c_D0": {
        CASE1: "(lam*chi1)^(a+1)/(a*mu*(1-rho)^2)",
        CASE2: "lam*c_X/(a*mu*(1-rho)^2)",
        CASE3: "((lam*chi1)^(a+1)+lam*c_X)/(a*mu*(1-rho)^2)",
    },
    "c_D1": {
        CASE1: "(lam*chi1)^a/((a-1)(1-rho)rho)",
        CASE2: "lam*beta1*c_X/((a-1)(1-rho)rho)",
        CASE3: "((lam*chi1)^a+lam*beta1*c_X)/((a-1)(1-rho)rho)",
    },
    "refined_coefficient": dict.fromkeys((CASE1, CASE2, CASE3), "(a-1)*psi*c_K_circ+c_D0"),
    "psi": dict.fromkeys((CASE1, CASE2, CASE3), "lam*(rho+chi1-1)/(mu*(1-rho))"),
}


def branch_constants(params: ModelParams, regime: Regime | None = None) -> dict[str, float]:
    regime = regime or classify(params)
    return {
        "psi": params.psi,
        "c_K": c_K(params, regime),
        "c_K_star": c_K_star(params, regime),
        "c_K_circ": c_K_circ(params, regime),
        "c_D0": c_D0(params, regime),
        "c_D1": c_D1(params, regime),
        "refined_coefficient": refined_coefficient(params, regime),
    }


# -- second path: per-source contributions of the building blocks --------------

def _sources(params: ModelParams, regime: Regime):
    """Tail constants (against ``L``, exponent ``a``) of ``N_BX``, ``X`` and
    (exponent ``a - 1``) of ``N_BeX`` and ``X_de``, split by source."""
    lam, chi1, beta1 = params.lam, params.chi1, params.beta1
    a = regime.a
    # service source: N_B ~ lam^a, scaled by chi1 per batch
    s_nbx = (lam * chi1) ** a if regime.service_active else 0.0
    s_nbex = s_nbx / (lam * chi1) / ((a - 1.0) * beta1) if regime.service_active else 0.0
    # batch source: a sum of about lam*beta1 batches inherits lam*beta1 * c_X
    b_x = regime.c_X if regime.batch_active else 0.0
    b_nbx = lam * beta1 * b_x
    b_xde = b_x / (chi1 * (a - 1.0))
    return s_nbx, s_nbex, b_x, b_nbx, b_xde


def component_constants(params: ModelParams, regime: Regime | None = None) -> dict[str, float]:
    regime = regime or classify(params)
    a, rho, chi1 = regime.a, params.rho, params.chi1
    s_nbx, s_nbex, b_x, b_nbx, b_xde = _sources(params, regime)
    n_bxx0 = s_nbx + b_nbx + b_x  # X0 = X - 1 has the tail of X
    t = s_nbex + b_xde
    k_star = n_bxx0 / ((a - 1.0) * (rho + chi1 - 1.0))
    k_circ = rho / (1.0 - rho) * t  # geometric compound with mean rho/(1-rho)
    k = k_star + k_circ
    psi_ = params.lam * (rho + chi1 - 1.0) / (params.mu * (1.0 - rho))
    d0 = (1.0 - 1.0 / a) * k * psi_
    return {
        "psi": psi_,
        "c_K": k,
        "c_K_star": k_star,
        "c_K_circ": k_circ,
        "c_D0": d0,
        "c_D1": t + k_circ,  # D1 = T + K° + D0 and D0 is one order lighter
        "refined_coefficient": (a - 1.0) * psi_ * k_circ + d0,
    }


# -- curves -------------------------------------------------------------------

CURVE_NAMES = ("N_B", "N_Be", "N_BX", "N_BXX0", "N_BeXXde", "K_star", "K_circ", "K", "D0", "D1", "L_inf", "refined")


def intermediate_curves(params: ModelParams, regime: Regime | None = None) -> dict[str, TailCurve | Absent]:
    regime = regime or classify(params)
    lam, chi1, rho, beta1, _ = _parts(params)
    a, cx, L = regime.a, regime.c_X, regime.L
    out: dict[str, TailCurve | Absent] = {}
    if regime.L_service is not None:
        d = regime.d_B
        out["N_B"] = TailCurve(lam**d, d, regime.L_service)
        out["N_Be"] = TailCurve(lam ** (d - 1.0) / ((d - 1.0) * beta1), d - 1.0, regime.L_service)
    else:
        out["N_B"] = out["N_Be"] = Absent("service law is light-tailed")

    if regime.case_id == CASE1:
        n_bx = n_bxx0 = (lam * chi1) ** a
        t = (lam * chi1) ** (a - 1.0) / ((a - 1.0) * beta1)
    elif regime.case_id == CASE2:
        n_bx = lam * beta1 * cx
        n_bxx0 = (1.0 + lam * beta1) * cx
        t = cx / (chi1 * (a - 1.0))
    else:
        n_bx = (lam * chi1) ** a + lam * beta1 * cx
        n_bxx0 = (lam * chi1) ** a + (1.0 + lam * beta1) * cx
        t = ((lam * chi1) ** a + lam * beta1 * cx) / ((a - 1.0) * rho)
    out["N_BX"] = TailCurve(n_bx, a, L)
    out["N_BXX0"] = TailCurve(n_bxx0, a, L)
    out["N_BeXXde"] = TailCurve(t, a - 1.0, L)
    out["K_star"] = TailCurve(c_K_star(params, regime), a - 1.0, L)
    out["K_circ"] = TailCurve(c_K_circ(params, regime), a - 1.0, L)
    out["K"] = TailCurve(c_K(params, regime), a - 1.0, L)
    out["D0"] = TailCurve(c_D0(params, regime), a, L)
    out["D1"] = TailCurve(c_D1(params, regime), a - 1.0, L)
    out["L_inf"] = TailCurve(c_K_circ(params, regime), a - 1.0, L)
    out["refined"] = refined_difference_curve(params, regime)
    return out


@dataclass(frozen=True)
class AsymptoticReport:
    rho: float
    psi: float
    regime: Regime
    c_K: float
    c_K_star: float
    c_K_circ: float
    c_D0: float
    c_D1: float
    refined_coefficient: float
    curves: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        r = self.regime
        case = r.case_id
        names = ("psi", "c_K", "c_K_star", "c_K_circ", "c_D0", "c_D1", "refined_coefficient")
        return {
            "case_id": case,
            "a": r.a,
            "d_B": _finite_or_str(r.d_B),
            "d_X": _finite_or_str(r.d_X),
            "L": r.L,
            "L_service": r.L_service,
            "L_batch": r.L_batch,
            "c_X": r.c_X,
            "rho": self.rho,
            "constants": {n: {"value": getattr(self, n), "branch": BRANCH_FORMULAS[n][case]} for n in names},
            "curves": {n: c.as_dict() for n, c in self.curves.items()},
        }


def _finite_or_str(x: float):
    return x if math.isfinite(x) else "inf"


def asymptotic_report(params: ModelParams) -> AsymptoticReport:
    regime = classify(params)
    params.require_stable()
    k = branch_constants(params, regime)
    return AsymptoticReport(
        rho=params.rho,
        psi=k["psi"],
        regime=regime,
        c_K=k["c_K"],
        c_K_star=k["c_K_star"],
        c_K_circ=k["c_K_circ"],
        c_D0=k["c_D0"],
        c_D1=k["c_D1"],
        refined_coefficient=k["refined_coefficient"],
        curves=intermediate_curves(params, regime),
    )
