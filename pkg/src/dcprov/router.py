"""Front-end admission and routing.

Each slot the router solves

    minimise   V * c * d + sum_n Q_n * R_n
    subject to sum_n R_n + d = lam,  0 <= sum_n R_n <= R_max

whose solution is a threshold rule: if the shortest queue is at most ``V*c``
it receives ``min(lam, R_max)`` requests and the rest are rejected,
otherwise everything is rejected.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._jit import jit_family


@dataclass(frozen=True)
class RoutingDecision:
    rejected: int
    per_server: tuple[int, ...]

    @property
    def admitted(self) -> int:
        return sum(self.per_server)


def route_into(lam, cost, Q, V, R_max, no_rejection, out):
    """Write per-server admissions into ``out``; return the rejected count.

    Ties between equal queues go to the lowest index.  With
    ``no_rejection`` every arrival goes to the shortest queue regardless of
    the threshold and of ``R_max``.
    """
    n = len(Q)
    for i in range(n):
        out[i] = 0
    if lam <= 0:
        return 0
    best = 0
    for i in range(1, n):
        if Q[i] < Q[best]:
            best = i
    if no_rejection:
        out[best] = lam
        return 0
    if Q[best] <= V * cost:
        admit = lam if lam < R_max else R_max
        out[best] = admit
        return lam - admit
    return lam


_route_into = jit_family(route_into)


def route(lam: int, cost, Q, V, R_max: int, no_rejection: bool = False) -> RoutingDecision:
    out = [0] * len(Q)
    d = route_into(int(lam), cost, list(Q), V, int(R_max), no_rejection, out)
    return RoutingDecision(int(d), tuple(int(x) for x in out))


def routing_objective(decision: RoutingDecision, cost, Q, V):
    return V * cost * decision.rejected + sum(q * r for q, r in zip(Q, decision.per_server))


def route_array(lam: int, cost: float, Q: np.ndarray, V: float, R_max: int,
                no_rejection: bool = False) -> tuple[int, np.ndarray]:
    out = np.zeros(len(Q), dtype=np.int64)
    d = _route_into(int(lam), float(cost), np.asarray(Q, dtype=np.int64), float(V), int(R_max),
                    bool(no_rejection), out)
    return int(d), out
