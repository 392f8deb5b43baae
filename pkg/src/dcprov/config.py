"""System configuration: dataclasses plus JSON loading and validation.

A config file looks like::

    {
      "V": 100, "R_max": 40, "I_max": 1000, "horizon": 1000000, "seed": 1,
      "mode": "per-queue",
      "servers": [
        {"e": 4, "count": 1,
         "service": {"kind": "uniform", "lo": 2, "hi": 6},
         "modes": [{"idle_cost": 0, "setup_cost": 2,
                    "setup": {"kind": "geometric", "mean": 5.893}}]}
      ],
      "workload": {"kind": "iid",
                   "lambda": {"kind": "uniform", "lo": 10, "hi": 30},
                   "cost": {"kind": "uniform", "lo": 1, "hi": 6}},
      "policy": {"kind": "proposed"}
    }

Optional keys: ``no_rejection``, ``always_on_count``,
``initial_virtual_backlog``, ``B0`` (overrides the default constant),
``downsample``.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

from .baselines import BaselineSpec
from .server_policy import SleepMode, b0_constant
from .workload import FiniteDistribution, TraceSource, distribution_from_dict, setup_from_dict, source_from_dict

DEFAULTS = {
    "R_max": 40,
    "I_max": 1000,
    "horizon": 1_000_000,
    "seed": 0,
    "mode": "per-queue",
    "no_rejection": False,
    "always_on_count": 0,
    "initial_virtual_backlog": 0,
    "B0": None,
    "downsample": None,
    "policy": {"kind": "proposed"},
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ServerSpec:
    e: float
    service: FiniteDistribution
    modes: tuple[SleepMode, ...] = ()

    def to_dict(self) -> dict:
        return {"e": self.e, "service": self.service.to_dict(), "modes": [m.to_dict() for m in self.modes]}


@dataclass(frozen=True)
class SystemConfig:
    servers: tuple[ServerSpec, ...]
    workload: dict
    V: float
    R_max: int = 40
    I_max: int = 1000
    horizon: int = 1_000_000
    seed: int = 0
    mode: str = "per-queue"
    no_rejection: bool = False
    always_on_count: int = 0
    initial_virtual_backlog: int = 0
    B0: float | None = None
    downsample: int | None = None
    policy: BaselineSpec | None = None
    base_dir: str | None = field(default=None, compare=False)

    def __post_init__(self):
        errs = []
        if not self.servers:
            errs.append("servers: need at least one server")
        if not self.V > 0:
            errs.append(f"V: must be > 0, got {self.V}")
        if self.R_max < 1:
            errs.append(f"R_max: must be >= 1, got {self.R_max}")
        if self.I_max < 1:
            errs.append(f"I_max: must be >= 1, got {self.I_max}")
        if self.horizon < 1:
            errs.append(f"horizon: must be >= 1, got {self.horizon}")
        if self.mode not in ("per-queue", "virtualized"):
            errs.append(f"mode: must be 'per-queue' or 'virtualized', got {self.mode!r}")
        if not 0 <= self.always_on_count <= len(self.servers):
            errs.append(f"always_on_count: must be in [0, {len(self.servers)}]")
        if self.initial_virtual_backlog < 0:
            errs.append("initial_virtual_backlog: must be >= 0")
        if self.B0 is not None and self.B0 < 0:
            errs.append("B0: must be >= 0")
        if self.downsample is not None and self.downsample < 1:
            errs.append("downsample: must be >= 1")
        for i, s in enumerate(self.servers):
            if s.e < 0:
                errs.append(f"servers[{i}].e: must be >= 0")
            if min(s.service.values) < 0:
                errs.append(f"servers[{i}].service: service amounts must be >= 0")
        if self.policy is not None:
            if self.policy.kind == "always_on" and self.policy.k > len(self.servers):
                errs.append(f"policy.k: must be <= number of servers ({len(self.servers)})")
            for i, s in enumerate(self.servers):
                if not s.modes:
                    errs.append(f"servers[{i}].modes: baseline policies need a sleep mode on every server")
        if errs:
            raise ConfigError("; ".join(errs))

    @property
    def N(self) -> int:
        return len(self.servers)

    @property
    def virtualized(self) -> bool:
        return self.mode == "virtualized"

    @property
    def mu_max(self) -> float:
        return max(float(s.service.max_value) for s in self.servers)

    @property
    def b0(self) -> float:
        return b0_constant(self.R_max, self.mu_max) if self.B0 is None else float(self.B0)

    def source(self, seed: int | None = None) -> TraceSource:
        base = Path(self.base_dir) if self.base_dir else None
        return source_from_dict(self.workload, seed=self.seed if seed is None else seed, base_dir=base)

    def with_(self, **changes) -> SystemConfig:
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "V": self.V, "R_max": self.R_max, "I_max": self.I_max, "horizon": self.horizon,
            "seed": self.seed, "mode": self.mode, "no_rejection": self.no_rejection,
            "always_on_count": self.always_on_count,
            "initial_virtual_backlog": self.initial_virtual_backlog,
            "B0": self.B0, "downsample": self.downsample,
            "servers": [s.to_dict() for s in self.servers],
            "workload": copy.deepcopy(self.workload),
            "policy": {"kind": "proposed"} if self.policy is None else self.policy.to_dict(),
        }


def _need(d: dict, key: str, where: str):
    if key not in d:
        raise ConfigError(f"{where}: missing required field {key!r}")
    return d[key]


def _server_specs(raw: Any) -> list[ServerSpec]:
    if not isinstance(raw, list) or not raw:
        raise ConfigError("servers: must be a nonempty list")
    out = []
    for i, s in enumerate(raw):
        where = f"servers[{i}]"
        if not isinstance(s, dict):
            raise ConfigError(f"{where}: must be an object")
        try:
            service = distribution_from_dict(_need(s, "service", where))
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError(f"{where}.service: {exc}") from exc
        modes = []
        for j, md in enumerate(s.get("modes", [])):
            mw = f"{where}.modes[{j}]"
            try:
                modes.append(SleepMode(float(md.get("idle_cost", 0.0)), float(md.get("setup_cost", 0.0)),
                                       setup_from_dict(_need(md, "setup", mw))))
            except ConfigError:
                raise
            except (KeyError, ValueError, TypeError) as exc:
                raise ConfigError(f"{mw}: {exc}") from exc
        spec = ServerSpec(float(_need(s, "e", where)), service, tuple(modes))
        count = int(s.get("count", 1))
        if count < 1:
            raise ConfigError(f"{where}.count: must be >= 1")
        out.extend([spec] * count)
    return out


def config_from_dict(d: dict, base_dir: str | None = None) -> SystemConfig:
    if not isinstance(d, dict):
        raise ConfigError("config root must be a JSON object")
    known = set(DEFAULTS) | {"V", "servers", "workload"}
    unknown = sorted(set(d) - known)
    if unknown:
        raise ConfigError(f"unknown top-level field(s): {', '.join(unknown)}")
    merged = {**DEFAULTS, **d}
    servers = _server_specs(_need(d, "servers", "config"))
    workload = _need(d, "workload", "config")
    if not isinstance(workload, dict) or workload.get("kind") not in ("iid", "file", "ramp"):
        raise ConfigError("workload.kind: must be one of 'iid', 'file', 'ramp'")
    pol = merged["policy"]
    try:
        policy = None if pol.get("kind", "proposed") == "proposed" else BaselineSpec.from_dict(pol)
    except (KeyError, ValueError, TypeError, AttributeError) as exc:
        raise ConfigError(f"policy: {exc}") from exc
    cfg = SystemConfig(
        servers=tuple(servers), workload=workload, V=float(_need(d, "V", "config")),
        R_max=int(merged["R_max"]), I_max=int(merged["I_max"]), horizon=int(merged["horizon"]),
        seed=int(merged["seed"]), mode=str(merged["mode"]), no_rejection=bool(merged["no_rejection"]),
        always_on_count=int(merged["always_on_count"]),
        initial_virtual_backlog=int(merged["initial_virtual_backlog"]),
        B0=None if merged["B0"] is None else float(merged["B0"]),
        downsample=None if merged["downsample"] is None else int(merged["downsample"]),
        policy=policy, base_dir=base_dir)
    try:
        cfg.source()
    except ConfigError:
        raise
    except (KeyError, ValueError, TypeError, OSError) as exc:
        raise ConfigError(f"workload: {exc}") from exc
    return cfg


def load_config(path) -> SystemConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    try:
        return config_from_dict(raw, base_dir=str(path.parent))
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
