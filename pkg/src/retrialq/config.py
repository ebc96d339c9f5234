"""Run configuration: a flat ``section.key = value`` file.

Example::

    # reference Lomax configuration
    model.lambda = 1
    model.mu = 1
    model.batch.kind = deterministic
    model.batch.m = 1
    model.service.kind = lomax
    model.service.sigma = 0.75
    model.service.d = 2.5
    exact.trunc = 16384

Lines starting with ``#`` or ``;`` are comments. Keys are case-sensitive,
unknown keys and repeated keys are errors. Every key has a type and, except
the model keys and ``sim.horizon``, a default; :meth:`RunConfig.resolved`
returns the full effective configuration for output metadata.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

from .errors import ConfigError, DomainError
from .model import Deterministic, Exponential, Geometric, Lomax, ModelParams, Pareto, ParetoTail
from .secondorder import DiscretePareto
from .simulate import SimConfig

__all__ = ["RunConfig", "load_config", "parse_config", "KEYS"]

_ROOT = "root"


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(",") if x.strip())


def _int(text: str) -> int:
    return int(text.strip())


# key -> (parser, default); a default of None means required when used
KEYS: dict[str, tuple[Callable[[str], Any], Any]] = {
    "model.lambda": (float, None),
    "model.mu": (float, None),
    "model.batch.kind": (str, None),
    "model.batch.m": (_int, None),
    "model.batch.p": (float, None),
    "model.batch.theta": (float, None),
    "model.batch.d": (float, None),
    "model.service.kind": (str, None),
    "model.service.rate": (float, None),
    "model.service.sigma": (float, None),
    "model.service.x_m": (float, None),
    "model.service.d": (float, None),
    "exact.trunc": (_int, 8192),
    "asym.j_min": (_int, 1),
    "asym.j_max": (_int, 8192),
    "asym.points": (_int, 64),
    "sim.horizon": (float, None),
    "sim.warmup": (float, None),
    "sim.replications": (_int, 16),
    "sim.base_seed": (_int, 0),
    "sim.j_max": (_int, 64),
    "sim.workers": (_int, 1),
    "compare.j_lo": (_int, 256),
    "compare.j_hi": (_int, 1024),
    "compare.points": (_int, 9),
    "compare.ratio_tol": (float, 0.05),
    "compare.diff_lo": (float, 0.7),
    "compare.diff_hi": (float, 1.3),
    "compare.curve_lo": (float, 0.7),
    "compare.curve_hi": (float, 1.3),
    "compare.sim": (_bool, False),
    "compare.sim_j": (_int, 20),
    "compare.sim_z": (float, 3.0),
    "second_order.f1.theta": (float, None),
    "second_order.f1.d": (float, None),
    "second_order.f2.theta": (float, None),
    "second_order.f2.d": (float, None),
    "second_order.trunc": (_int, 16384),
    "second_order.t": (_int_list, (250, 500, 1000, 2000, 4000)),
}

_BATCH_FIELDS = {"deterministic": ("m",), "geometric": ("p",), "pareto_tail": ("theta", "d")}
_SERVICE_FIELDS = {"exponential": ("rate",), "lomax": ("sigma", "d"), "pareto": ("x_m", "d")}


@dataclass(frozen=True)
class RunConfig:
    values: dict[str, Any]  # only keys present in the file, parsed
    source: str = "<string>"

    def get(self, key: str):
        if key in self.values:
            return self.values[key]
        default = KEYS[key][1]
        if default is None and key != "sim.warmup":
            raise ConfigError(f"missing required key {key!r}")
        return default

    def resolved(self, *prefixes: str) -> dict[str, Any]:
        """Effective values (file or default) of every key under ``prefixes``."""
        out = {}
        for key, (_, default) in KEYS.items():
            if prefixes and not key.startswith(prefixes):
                continue
            if key in self.values:
                out[key] = self.values[key]
            elif default is not None:
                out[key] = default
            elif key == "sim.warmup":
                out[key] = None
        return {k: list(v) if isinstance(v, tuple) else v for k, v in out.items()}

    # -- typed views ---------------------------------------------------------

    def model(self) -> ModelParams:
        batch = self._law("model.batch", _BATCH_FIELDS)
        service = self._law("model.service", _SERVICE_FIELDS)
        try:
            b = {
                "deterministic": lambda v: Deterministic(v["m"]),
                "geometric": lambda v: Geometric(v["p"]),
                "pareto_tail": lambda v: ParetoTail(v["theta"], v["d"]),
            }[batch[0]](batch[1])
            s = {
                "exponential": lambda v: Exponential(v["rate"]),
                "lomax": lambda v: Lomax(v["sigma"], v["d"]),
                "pareto": lambda v: Pareto(v["x_m"], v["d"]),
            }[service[0]](service[1])
            return ModelParams(self.get("model.lambda"), self.get("model.mu"), b, s)
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc

    def _law(self, prefix: str, table: dict[str, tuple[str, ...]]):
        kind = self.get(f"{prefix}.kind")
        if kind not in table:
            raise ConfigError(f"{prefix}.kind must be one of {sorted(table)}, got {kind!r}")
        wanted = table[kind]
        for key in self.values:
            if key.startswith(prefix + ".") and key != f"{prefix}.kind":
                field = key[len(prefix) + 1 :]
                if field not in wanted:
                    raise ConfigError(f"{key} does not apply to {prefix}.kind = {kind}")
        return kind, {f: self.get(f"{prefix}.{f}") for f in wanted}

    def trunc(self) -> int:
        n = self.get("exact.trunc")
        if n < 1:
            raise ConfigError("exact.trunc must be >= 1")
        return n

    def sim(self) -> SimConfig:
        try:
            return SimConfig(
                horizon=self.get("sim.horizon"),
                warmup=self.get("sim.warmup"),
                replications=self.get("sim.replications"),
                base_seed=self.get("sim.base_seed"),
                max_tracked_level=self.get("sim.j_max"),
                workers=self.get("sim.workers"),
            )
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc

    def second_order(self):
        try:
            f1 = DiscretePareto(self.get("second_order.f1.theta"), self.get("second_order.f1.d"))
            f2 = DiscretePareto(self.get("second_order.f2.theta"), self.get("second_order.f2.d"))
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc
        return f1, f2, self.get("second_order.t"), self.get("second_order.trunc")


def parse_config(text: str, source: str = "<string>") -> RunConfig:
    cp = configparser.ConfigParser(
        delimiters=("=",),
        comment_prefixes=("#", ";"),
        inline_comment_prefixes=("#",),
        interpolation=None,
        strict=True,
        empty_lines_in_values=False,
    )
    cp.optionxform = str  # keys are case-sensitive
    try:
        cp.read_string(f"[{_ROOT}]\n" + text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    if cp.sections() != [_ROOT]:
        raise ConfigError(f"{source}: section headers are not used; write section.key = value")
    values = {}
    for key, raw in cp[_ROOT].items():
        if key not in KEYS:
            raise ConfigError(f"{source}: unknown key {key!r}")
        parser = KEYS[key][0]
        try:
            values[key] = parser(raw.strip())
        except ValueError as exc:
            raise ConfigError(f"{source}: bad value for {key}: {raw!r}") from exc
    return RunConfig(values, source)


def load_config(path: str | Path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from exc
    return parse_config(text, str(p))
