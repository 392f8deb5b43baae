"""Frame-start decisions for one server: stay active, or sleep for ``I`` slots.

At every renewal boundary a server compares the score of staying active,
``V*e - Q*mu``, against the best idle option.  For sleep mode ``a`` with
idle cost ``g``, setup cost ``W``, setup mean ``m`` and variance ``s2``,
sleeping for ``I`` slots scores

    (V*W*m + V*e - Q*mu + B0/2*s2 + V*g*I) / (I+m+1) + B0/2*(I+m+1)

The expected ratio over any randomised choice of ``(a, I)`` is never below
the best pure choice, so only pure decisions are searched.

The scalar kernels below are plain Python so that they also run on
``fractions.Fraction`` inputs; jitted copies drive the simulator.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from ._jit import jit_family
from .workload import SetupDistribution


@dataclass(frozen=True)
class SleepMode:
    idle_cost: float
    setup_cost: float
    setup: SetupDistribution

    def __post_init__(self):
        if self.idle_cost < 0 or self.setup_cost < 0:
            raise ValueError("sleep-mode costs must be nonnegative")
        if self.setup.mean < 1:
            raise ValueError("mean setup time must be at least one slot")

    def to_dict(self) -> dict:
        return {"idle_cost": self.idle_cost, "setup_cost": self.setup_cost, "setup": self.setup.to_dict()}


@dataclass(frozen=True)
class PolicyConstants:
    B0: float
    V: float
    e: float
    mu_mean: float


def b0_constant(R_max, mu_max):
    """Bound on per-slot growth of the queue-weighted frame term."""
    return 0.5 * (R_max + mu_max) * mu_max


@dataclass(frozen=True)
class FrameDecision:
    mode: int | None = None
    idle_slots: int = 0

    @property
    def stay_active(self) -> bool:
        return self.mode is None

    def __str__(self) -> str:
        return "StayActive" if self.stay_active else f"GoIdle(mode={self.mode}, I={self.idle_slots})"


STAY_ACTIVE = FrameDecision()


def idle_value(g, W, m, var, I, Q, V, e, mu, B0):
    T = I + m + 1
    return (V * W * m + V * e - Q * mu + B0 * var / 2 + V * g * I) / T + B0 * T / 2


def idle_candidates(g, W, m, var, Q, V, e, mu, B0, I_max):
    """Integer idle lengths that can minimise :func:`idle_value` for one mode.

    Writing ``T = I+m+1`` the score is ``K/T + V*g + B0/2*T`` with
    ``K = V*m*(W-g) + V*(e-g) - Q*mu + B0/2*var``.  For ``K > 0`` and
    ``B0 > 0`` it is convex in ``T`` with its real minimum at
    ``sqrt(2K/B0)``; otherwise it is monotone and an endpoint wins.
    """
    K = V * m * (W - g) + V * (e - g) - Q * mu + B0 * var / 2
    lo = 1
    hi = I_max
    c0 = lo
    c1 = hi
    c2 = lo
    c3 = lo
    if K > 0 and B0 > 0:
        x = math.sqrt(2.0 * float(K) / float(B0)) - float(m) - 1.0
        f = math.floor(x)
        c2 = min(max(f, lo), hi)
        c3 = min(max(f + 1, lo), hi)
    return c0, c1, c2, c3


def best_idle_params(g, W, m, var, n_modes, Q, V, e, mu, B0, I_max):
    """Return ``(mode, I, score)`` minimising the idle score over all modes.

    Ties prefer the lower mode index, then the shorter idle time.
    """
    best_mode = -1
    best_I = 0
    best = math.inf
    for a in range(n_modes):
        cands = idle_candidates(g[a], W[a], m[a], var[a], Q, V, e, mu, B0, I_max)
        for I in cands:
            s = idle_value(g[a], W[a], m[a], var[a], I, Q, V, e, mu, B0)
            if s < best or (s == best and a == best_mode and I < best_I):
                best = s
                best_mode = a
                best_I = I
    return best_mode, best_I, best


def decide_params(g, W, m, var, n_modes, Q, V, e, mu, B0, I_max):
    """Return ``(mode, I)``; ``mode == -1`` means stay active.

    Staying active wins ties.
    """
    if n_modes == 0:
        return -1, 0
    active = V * e - Q * mu
    a, I, s = best_idle_params(g, W, m, var, n_modes, Q, V, e, mu, B0, I_max)
    if active <= s:
        return -1, 0
    return a, I


_idle_value, _idle_candidates, _best_idle_params, _decide_params = jit_family(
    idle_value, idle_candidates, best_idle_params, decide_params)


def _mode_arrays(modes: Sequence[SleepMode]):
    g = [md.idle_cost for md in modes]
    W = [md.setup_cost for md in modes]
    m = [md.setup.mean for md in modes]
    var = [md.setup.variance for md in modes]
    return g, W, m, var


def active_score(Q, k: PolicyConstants):
    return k.V * k.e - Q * k.mu_mean


def idle_score(mode: SleepMode, I: int, Q, k: PolicyConstants):
    return idle_value(mode.idle_cost, mode.setup_cost, mode.setup.mean, mode.setup.variance,
                      I, Q, k.V, k.e, k.mu_mean, k.B0)


def best_idle(modes: Sequence[SleepMode], Q, k: PolicyConstants, I_max: int) -> tuple[int, int, float]:
    if not modes:
        raise ValueError("need at least one sleep mode")
    g, W, m, var = _mode_arrays(modes)
    return best_idle_params(g, W, m, var, len(modes), Q, k.V, k.e, k.mu_mean, k.B0, int(I_max))


def decide_frame(Q, modes: Sequence[SleepMode], k: PolicyConstants, I_max: int) -> FrameDecision:
    g, W, m, var = _mode_arrays(modes)
    a, I = decide_params(g, W, m, var, len(modes), Q, k.V, k.e, k.mu_mean, k.B0, int(I_max))
    return STAY_ACTIVE if a < 0 else FrameDecision(a, int(I))


def activity_threshold(modes: Sequence[SleepMode], k: PolicyConstants, I_max: int, q_hi: int = 1 << 40) -> int | None:
    """Smallest integer queue length at which the server stays active.

    The active score falls faster in ``Q`` than the best idle score, so the
    decision is a threshold in ``Q``.  Returns ``None`` if no ``Q`` up to
    ``q_hi`` keeps the server active.
    """
    if decide_frame(0, modes, k, I_max).stay_active:
        return 0
    if not decide_frame(q_hi, modes, k, I_max).stay_active:
        return None
    lo, hi = 0, q_hi
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if decide_frame(mid, modes, k, I_max).stay_active:
            hi = mid
        else:
            lo = mid
    return hi
