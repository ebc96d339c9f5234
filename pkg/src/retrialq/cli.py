"""Command-line front end.

Subcommands (each reads one config file, see :mod:`retrialq.config`)::

    exact         exact truncated distributions -> CSV (+ JSON sidecar, optional SVG)
    asym          asymptotic constants and tail curves -> CSV + JSON
    sim           simulation estimates -> CSV + JSON
    compare       exact tails vs asymptotics (and optionally simulation) -> JSON (+ SVG)
    second-order  second-order convolution expansion check -> CSV + JSON

Exit codes: 0 ok, 2 config, 3 stability, 4 numerical, 5 unsupported regime,
6 comparison FAIL.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .asymptotics import TailCurve, asymptotic_report
from .config import RunConfig, load_config
from .errors import (
    ConfigError,
    DomainError,
    NumericalError,
    RetrialError,
    StabilityError,
    TruncationMismatchError,
    UnsupportedModelError,
)
from .exact import exact_distributions, ultimately_decreasing
from .secondorder import second_order_ratio
from .simulate import replicate

__all__ = ["main", "build_parser"]

log = logging.getLogger("retrialq")

EXIT_OK, EXIT_CONFIG, EXIT_STABILITY, EXIT_NUMERICAL, EXIT_UNSUPPORTED, EXIT_FAIL = 0, 2, 3, 4, 5, 6

SERIES_COLUMNS = (("k_star", "k_star"), ("k_circ", "k_circ"), ("k", "k"), ("d0", "d0"), ("d1", "d1"), ("linf", "l_inf"), ("lmu", "l_mu"))


# -- output helpers -----------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_csv(path: Path, header: list[str], columns: list) -> None:
    n = len(columns[0])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(n):
            w.writerow([_fmt(c[i]) for c in columns])


def _plain(obj):
    """JSON-safe copy: numpy scalars/arrays to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def write_json(path: Path, obj) -> None:
    text = json.dumps(_plain(obj), sort_keys=True, indent=2, allow_nan=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def sidecar(path: Path) -> Path:
    return path.with_suffix(".json")


def _meta(cfg: RunConfig, command: str, *prefixes: str) -> dict:
    return {
        "command": command,
        "config_file": Path(cfg.source).name,
        "config": cfg.resolved(*prefixes),
        "version": __version__,
    }


def _color(ok: bool) -> str:
    word = "PASS" if ok else "FAIL"
    if sys.stdout.isatty() and "NO_COLOR" not in os.environ:
        return f"\033[{32 if ok else 31}m{word}\033[0m"
    return word


def log_grid(lo: int, hi: int, points: int) -> np.ndarray:
    if not 1 <= lo <= hi:
        raise ConfigError(f"grid needs 1 <= lo <= hi, got {lo}, {hi}")
    if points < 2 or lo == hi:
        return np.array([lo], dtype=np.int64)
    g = np.unique(np.rint(np.geomspace(lo, hi, points)).astype(np.int64))
    return g


# -- subcommands --------------------------------------------------------------

def cmd_exact(args) -> int:
    cfg = load_config(args.config)
    params = cfg.model()
    n = cfg.trunc()
    log.info("exact: N=%d rho=%.6g", n, params.rho)
    ex = exact_distributions(params, n)
    out = Path(args.output)
    j = np.arange(n + 1)
    header, cols = ["j"], [j]
    for col, attr in SERIES_COLUMNS:
        s = getattr(ex, attr)
        header += [f"{col}_pmf", f"{col}_tail"]
        cols += [s.coeffs, s.tail()]
    write_csv(out, header, cols)
    meta = _meta(cfg, "exact", "model.", "exact.")
    meta.update(
        rho=ex.rho,
        psi=ex.psi,
        trunc=n,
        model=params.describe(),
        deficits={col: getattr(ex, attr).mass_deficit for col, attr in SERIES_COLUMNS},
    )
    write_json(sidecar(out), meta)
    if args.svg:
        tails = {col: getattr(ex, attr).tail() for col, attr in SERIES_COLUMNS if col in ("k", "d0", "d1", "linf", "lmu")}
        asym = {}
        try:
            curves = asymptotic_report(params).curves
            asym = {"k": curves["K"](j[1:]), "d0": curves["D0"](j[1:]), "d1": curves["D1"](j[1:]), "linf": curves["L_inf"](j[1:])}
        except UnsupportedModelError:
            pass
        from .plotting import tail_plot

        tail_plot(args.svg, j[1:], {k: v[1:] for k, v in tails.items()}, asym, title="exact tails")
    return EXIT_OK


def cmd_asym(args) -> int:
    cfg = load_config(args.config)
    params = cfg.model()
    report = asymptotic_report(params)
    grid = log_grid(cfg.get("asym.j_min"), cfg.get("asym.j_max"), cfg.get("asym.points"))
    present = [(name, c) for name, c in report.curves.items() if isinstance(c, TailCurve)]
    write_csv(Path(args.output), ["j"] + [name for name, _ in present], [grid] + [np.atleast_1d(c(grid)) for _, c in present])
    meta = _meta(cfg, "asym", "model.", "asym.")
    meta.update(report.as_dict(), psi=report.psi, model=params.describe())
    write_json(sidecar(Path(args.output)), meta)
    return EXIT_OK


def cmd_sim(args) -> int:
    cfg = load_config(args.config)
    params = cfg.model()
    sc = cfg.sim()
    retrial = args.system == "retrial"
    log.info("sim: %s system, horizon=%g, %d replications", args.system, sc.horizon, sc.replications)
    est = replicate(params, sc, retrial=retrial)
    j = np.arange(sc.max_tracked_level)
    header = ["j", "tail", "tail_hw"]
    cols = [j, est.tail, est.tail_hw]
    if retrial:
        header += ["d0_tail", "d0_tail_hw", "d1_tail", "d1_tail_hw"]
        cols += [est.d0_tail, est.d0_tail_hw, est.d1_tail, est.d1_tail_hw]
    header += ["upcrossings", "reliable"]
    cols += [est.upcrossings, est.reliable]
    out = Path(args.output)
    write_csv(out, header, cols)
    meta = _meta(cfg, "sim", "model.", "sim.")
    meta.update(
        system=est.system,
        busy_fraction=est.busy_fraction,
        busy_fraction_hw=est.busy_fraction_hw,
        mean_size=est.mean_size,
        mean_size_hw=est.mean_size_hw,
        rho=params.rho,
        warmup=sc.effective_warmup,
        events=list(est.events),
        seeds=[list(s) for s in est.seeds],
        stream="Generator(Philox(SeedSequence([base_seed, r])))",
        model=params.describe(),
    )
    write_json(sidecar(out), meta)
    return EXIT_OK


def _trend(values: np.ndarray) -> dict:
    dev = np.abs(np.asarray(values) - 1.0)
    return {
        "improving": bool(dev[-1] <= dev[0]),
        "monotone": bool(np.all(np.diff(dev) <= 0.0)),
    }


def compare_checks(params, cfg: RunConfig, *, with_sim: bool | None = None) -> dict:
    """Exact-vs-asymptotic (and optional simulation) comparison; see ``cmd_compare``."""
    n = cfg.trunc()
    lo, hi = cfg.get("compare.j_lo"), cfg.get("compare.j_hi")
    if not 1 <= lo < hi <= n:
        raise ConfigError(f"compare window [{lo}, {hi}] must lie inside [1, exact.trunc={n}]")
    grid = log_grid(lo, hi, cfg.get("compare.points"))
    ex = exact_distributions(params, n)
    rep = asymptotic_report(params)
    cur = rep.curves
    l_mu, l_inf = ex.l_mu.tail(), ex.l_inf.tail()
    checks = []

    r1 = l_mu[grid] / l_inf[grid]
    tol = cfg.get("compare.ratio_tol")
    t1 = _trend(r1)
    checks.append({
        "name": "tail_ratio_lmu_linf",
        "j": grid, "values": r1, "bounds": [1 - tol, 1 + tol], "applies_at": "j_hi",
        "pass": bool(abs(r1[-1] - 1.0) <= tol and t1["improving"]), **t1,
    })

    r2 = (l_mu[grid] - l_inf[grid]) / cur["refined"](grid)
    b2 = [cfg.get("compare.diff_lo"), cfg.get("compare.diff_hi")]
    t2 = _trend(r2)
    checks.append({
        "name": "difference_over_refined_curve",
        "j": grid, "values": r2, "bounds": b2, "applies_at": "window",
        "pass": bool(np.all((r2 >= b2[0]) & (r2 <= b2[1])) and t2["improving"]), **t2,
    })

    b3 = [cfg.get("compare.curve_lo"), cfg.get("compare.curve_hi")]
    for name, series in (("D0", ex.d0), ("D1", ex.d1), ("K", ex.k)):
        r = series.tail()[grid] / cur[name](grid)
        t = _trend(r)
        checks.append({
            "name": f"{name}_tail_over_curve",
            "j": grid, "values": r, "bounds": b3, "applies_at": "j_hi",
            "pass": bool(b3[0] <= r[-1] <= b3[1] and t["improving"]), **t,
        })

    with_sim = cfg.get("compare.sim") if with_sim is None else with_sim
    sim_meta = None
    if with_sim:
        sc = cfg.sim()
        est = replicate(params, sc, retrial=True)
        jmax = min(cfg.get("compare.sim_j"), sc.max_tracked_level - 1, n)
        js = np.arange(jmax + 1)
        z = (est.tail[js] - l_mu[js]) / est.tail_hw[js]
        zmax = cfg.get("compare.sim_z")
        checks.append({
            "name": "simulated_vs_exact_lmu_tail",
            "j": js, "values": z, "bounds": [-zmax, zmax], "applies_at": "window",
            "pass": bool(np.all(np.abs(z) <= zmax)),
        })
        sim_meta = {"busy_fraction": est.busy_fraction, "busy_fraction_hw": est.busy_fraction_hw, "events": list(est.events)}

    premise = ultimately_decreasing(ex.l_inf, int(grid[0]), int(grid[-1]))
    return {
        "case_id": rep.regime.case_id,
        "a": rep.regime.a,
        "L": rep.regime.L,
        "rho": ex.rho,
        "psi": ex.psi,
        "refined_coefficient": rep.refined_coefficient,
        "trunc": n,
        "window": [int(grid[0]), int(grid[-1])],
        "linf_pmf_nonincreasing_on_window": premise,
        "checks": checks,
        "simulation": sim_meta,
        "pass": all(c["pass"] for c in checks),
        "_exact": ex,
        "_report": rep,
    }


def cmd_compare(args) -> int:
    cfg = load_config(args.config)
    params = cfg.model()
    res = compare_checks(params, cfg)
    ex, rep = res.pop("_exact"), res.pop("_report")
    if not res["linf_pmf_nonincreasing_on_window"]:
        log.warning("P{Linf = j} is not nonincreasing on the compare window")
    meta = _meta(cfg, "compare", "model.", "exact.", "compare.", *(("sim.",) if res["simulation"] else ()))
    meta.update(res, model=params.describe())
    write_json(Path(args.output), meta)
    for c in res["checks"]:
        print(f"{_color(c['pass'])} {c['name']}")
    if args.svg:
        from .plotting import tail_plot

        n = ex.trunc
        j = np.arange(1, n + 1)
        cur = rep.curves
        tails = {"K": ex.k.tail()[1:], "D0": ex.d0.tail()[1:], "D1": ex.d1.tail()[1:], "Linf": ex.l_inf.tail()[1:],
                 "Lmu": ex.l_mu.tail()[1:], "Lmu-Linf": (ex.l_mu.tail() - ex.l_inf.tail())[1:]}
        asym = {"K": cur["K"](j), "D0": cur["D0"](j), "D1": cur["D1"](j), "Linf": cur["L_inf"](j), "Lmu": cur["L_inf"](j),
                "Lmu-Linf": cur["refined"](j)}
        tail_plot(args.svg, j, tails, asym, title=f"{rep.regime.case_id}, a = {rep.regime.a:g}")
    return EXIT_OK if res["pass"] else EXIT_FAIL


def cmd_second_order(args) -> int:
    cfg = load_config(args.config)
    f1, f2, ts, trunc = cfg.second_order()
    res = second_order_ratio(f1, f2, ts, trunc)
    out = Path(args.output)
    write_csv(out, ["t", "ratio", "sum_tail", "f1_tail", "f2_tail"], [res.t, res.ratio, res.sum_tail, res.f1_tail, res.f2_tail])
    meta = _meta(cfg, "second-order", "second_order.")
    meta.update(
        d=res.d,
        mean2=res.mean2,
        c1=f1.theta**f1.index,
        c2=f2.theta**f2.index,
        f1={"theta": f1.theta, "index": f1.index},
        f2={"theta": f2.theta, "index": f2.index},
    )
    write_json(sidecar(out), meta)
    return EXIT_OK


# -- entry point --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="retrialq", description="Batch-arrival retrial queue: exact tails, asymptotics, simulation.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="progress messages on stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("exact", help="exact truncated distributions")
    s.add_argument("config")
    s.add_argument("-o", "--output", required=True, help="CSV path; metadata goes to the .json sidecar")
    s.add_argument("--svg", help="optional log-log plot of the tails")
    s.set_defaults(func=cmd_exact)

    s = sub.add_parser("asym", help="asymptotic constants and tail curves")
    s.add_argument("config")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_asym)

    s = sub.add_parser("sim", help="simulation estimates")
    s.add_argument("config")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--system", choices=("retrial", "standard"), default="retrial")
    s.set_defaults(func=cmd_sim)

    s = sub.add_parser("compare", help="check exact tails against the asymptotics")
    s.add_argument("config")
    s.add_argument("-o", "--output", required=True, help="JSON report path")
    s.add_argument("--svg", help="optional log-log plot with asymptote lines")
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("second-order", help="second-order convolution tail expansion check")
    s.add_argument("config")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_second_order)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, DomainError) as exc:
        code, msg = EXIT_CONFIG, exc
    except StabilityError as exc:
        code, msg = EXIT_STABILITY, exc
    except (NumericalError, TruncationMismatchError) as exc:
        code, msg = EXIT_NUMERICAL, exc
    except UnsupportedModelError as exc:
        code, msg = EXIT_UNSUPPORTED, exc
    except RetrialError as exc:  # pragma: no cover - every subclass is mapped above
        code, msg = EXIT_NUMERICAL, exc
    except OSError as exc:
        code, msg = EXIT_CONFIG, exc
    print(f"retrialq: error: {msg}", file=sys.stderr)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
