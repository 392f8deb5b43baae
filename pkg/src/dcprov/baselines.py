"""Comparison policies that ignore queue-driven frame decisions.

* ``AlwaysOn(k)``: ``k`` servers stay active, the rest sleep for the whole run.
* ``Reactive(w)``: keep ``ceil(mean(last w arrivals) / mu_bar)`` servers on.
* ``ReactiveExtra(w, p)``: as Reactive, with ``p`` phantom requests per slot.

Servers that are switched off sleep in mode 0 until switched back on,
which starts a setup of random length.  Setup cannot be interrupted.
Surplus is measured on active servers alone, while deficit also counts
servers already in setup.  Counting setups on both sides would switch
off an active server on every small dip and let long setups absorb the
whole fleet; counting them on neither side would wake every sleeper
during a single long setup.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

from ._jit import jit_family

log = logging.getLogger(__name__)

ACTIVE, IDLE, SETUP = 0, 1, 2

KIND_CODES = {"always_on": 1, "reactive": 2, "reactive_extra": 3}


@dataclass(frozen=True)
class BaselineSpec:
    kind: str
    k: int = 0
    window: int = 10
    extra: float = 0.0
    mean_rate: float | None = None

    def __post_init__(self):
        if self.kind not in KIND_CODES:
            raise ValueError(f"unknown baseline {self.kind!r}")
        if self.kind == "always_on" and self.k < 1:
            raise ValueError("AlwaysOn needs k >= 1")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.extra < 0:
            raise ValueError("extra capacity must be >= 0")

    @classmethod
    def always_on(cls, k: int) -> BaselineSpec:
        return cls("always_on", k=k)

    @classmethod
    def reactive(cls, window: int = 10, mean_rate: float | None = None) -> BaselineSpec:
        return cls("reactive", window=window, mean_rate=mean_rate)

    @classmethod
    def reactive_extra(cls, window: int = 10, extra: float = 200.0, mean_rate: float | None = None) -> BaselineSpec:
        return cls("reactive_extra", window=window, extra=extra, mean_rate=mean_rate)

    @property
    def code(self) -> int:
        return KIND_CODES[self.kind]

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "always_on":
            d["k"] = self.k
        else:
            d["window"] = self.window
            if self.kind == "reactive_extra":
                d["extra"] = self.extra
            if self.mean_rate is not None:
                d["mean_rate"] = self.mean_rate
        return d

    @classmethod
    def from_dict(cls, d: dict) -> BaselineSpec:
        return cls(d["kind"], k=int(d.get("k", 0)), window=int(d.get("window", 10)),
                   extra=float(d.get("extra", 0.0)), mean_rate=d.get("mean_rate"))


def target_params(code, k, extra, mu_bar, hist_sum, hist_count):
    if code == 1:
        return k
    lam_bar = hist_sum / hist_count
    if code == 3:
        lam_bar += extra
    return int(math.ceil(lam_bar / mu_bar))


def apply_arrays(k_react, t, phase, remaining, frame_start, frame_mode, frame_I, frame_tau,
                 idle_count, n_modes, always_on, taus, woken):
    """Switch servers off while more than ``k_react`` are active; wake sleepers
    while active plus in-setup servers number fewer than ``k_react``.

    ``taus[n]`` is the setup length used if server ``n`` is woken this slot;
    ``woken[n]`` is set for every server that starts a setup.
    Returns ``(turned_off, turned_on)``.
    """
    n = len(phase)
    for i in range(n):
        woken[i] = False
    active = 0
    committed = 0
    for i in range(n):
        if phase[i] != IDLE:
            committed += 1
        if phase[i] == ACTIVE:
            active += 1
    off = 0
    on = 0
    if active > k_react:
        surplus = active - k_react
        for i in range(n):
            if off >= surplus:
                break
            # only at a frame boundary, so a frame's final active slot is kept
            if phase[i] == ACTIVE and frame_start[i] == t and not always_on[i] and n_modes[i] > 0:
                phase[i] = IDLE
                remaining[i] = -1
                frame_mode[i] = 0
                frame_I[i] = -1
                frame_tau[i] = 0
                idle_count[i] = 0
                off += 1
    elif committed < k_react:
        deficit = k_react - committed
        for i in range(n):
            if on >= deficit:
                break
            if phase[i] == IDLE and remaining[i] < 0:
                phase[i] = SETUP
                remaining[i] = taus[i]
                frame_tau[i] = taus[i]
                woken[i] = True
                on += 1
    return off, on


_target_params, _apply_arrays = jit_family(target_params, apply_arrays)


def target_active(spec: BaselineSpec, recent_arrivals: Sequence[int], mean_rate: float) -> int:
    """Number of servers the baseline wants on, from the last ``window`` arrivals."""
    if spec.kind == "always_on":
        return spec.k
    if len(recent_arrivals) == 0:
        raise ValueError("need at least one arrival observation")
    hist = list(recent_arrivals)[-spec.window:]
    mu_bar = spec.mean_rate if spec.mean_rate is not None else mean_rate
    return target_params(spec.code, spec.k, spec.extra, mu_bar, sum(hist), len(hist))


def apply_baseline(sim, k_react: int) -> tuple[int, int]:
    """Apply on/off commands to a :class:`~dcprov.engine.Simulator` at its current slot."""
    N = sim.N
    if k_react > N:
        log.warning("baseline target %d exceeds fleet size %d; waking every sleeping server", k_react, N)
    taus = [sim.peek_setup(i, 0) if sim.n_modes[i] > 0 else 1 for i in range(N)]
    woken = [False] * N
    off, on = apply_arrays(k_react, sim.t, sim.phase, sim.remaining, sim.frame_start, sim.frame_mode,
                           sim.frame_I, sim.frame_tau, sim.idle_count, sim.n_modes, sim.always_on, taus, woken)
    for i in range(N):
        if woken[i]:
            sim.consume_setup(i)
    return off, on
