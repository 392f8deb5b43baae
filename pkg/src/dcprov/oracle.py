"""Best stationary randomized policy for an i.i.d. workload, by linear programming.

Each server runs i.i.d. frames, each one either a single active slot or an
idle cycle ``(mode, I)``.  By renewal-reward a pure frame policy yields a
time-average service rate and cost; randomizing across frames reaches the
lower convex hull of those points.  Routing is linear per event, so only
the vertex actions {reject all, send ``min(lam, R_max)`` to server ``n``}
need weights.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

from .config import ServerSpec, SystemConfig
from .workload import IidSynthetic

LP_TOL = 1e-9


@dataclass(frozen=True)
class PureFramePolicy:
    """One deterministic frame choice; ``mode is None`` means a one-slot active frame."""

    mode: int | None
    I: int
    ET: float
    ET2: float
    mu_bar: float
    cost: float

    @property
    def label(self) -> str:
        return "active" if self.mode is None else f"idle(mode={self.mode}, I={self.I})"


def pure_policies(server: ServerSpec, I_max: int) -> list[PureFramePolicy]:
    mu = float(server.service.mean)
    out = [PureFramePolicy(None, 0, 1.0, 1.0, mu, float(server.e))]
    for a, md in enumerate(server.modes):
        m, var = md.setup.mean, md.setup.variance
        I = np.arange(1, I_max + 1, dtype=float)
        ET = I + m + 1
        ET2 = var + ET * ET
        cost = (md.idle_cost * I + md.setup_cost * m + server.e) / ET
        out.extend(PureFramePolicy(a, int(i), float(t), float(t2), mu / t, float(c))
                   for i, t, t2, c in zip(I, ET, ET2, cost))
    return out


def lower_hull(points: np.ndarray) -> list[int]:
    """Indices of the lower convex hull of ``(x, y)`` points, sorted by ``x``.

    Points sharing an ``x`` keep only the cheapest.
    """
    order = sorted(range(len(points)), key=lambda i: (points[i, 0], points[i, 1]))
    hull: list[int] = []
    for i in order:
        if hull and points[hull[-1], 0] == points[i, 0]:
            continue
        while len(hull) >= 2:
            (x1, y1), (x2, y2), (x3, y3) = points[hull[-2]], points[hull[-1]], points[i]
            if (x2 - x1) * (y3 - y1) - (y2 - y1) * (x3 - x1) <= 0:
                hull.pop()
            else:
                break
        hull.append(i)
    return hull


@dataclass
class ServerRegion:
    """Achievable ``(rate, cost)`` pairs of one server: the lower hull of its pure policies."""

    policies: list[PureFramePolicy]
    vertices: list[PureFramePolicy]

    @property
    def rates(self) -> np.ndarray:
        return np.array([p.mu_bar for p in self.vertices])

    @property
    def costs(self) -> np.ndarray:
        return np.array([p.cost for p in self.vertices])

    @property
    def rate_range(self) -> tuple[float, float]:
        r = self.rates
        return float(r.min()), float(r.max())

    def cost_at(self, rate: float) -> float:
        """Least cost of providing at least ``rate`` (``inf`` beyond the top rate)."""
        r, c = self.rates, self.costs
        if rate > r[-1] + 1e-12:
            return math.inf
        # serving more than needed is allowed and the hull is convex
        k = int(np.argmin(c))
        if rate <= r[k]:
            return float(c[k])
        return float(np.interp(rate, r, c))


def enumerate_server_region(server: ServerSpec, I_max: int) -> ServerRegion:
    pols = pure_policies(server, I_max)
    pts = np.array([(p.mu_bar, p.cost) for p in pols])
    return ServerRegion(pols, [pols[i] for i in lower_hull(pts)])


@dataclass
class StationaryResult:
    C_star: float
    total_cost_star: float
    per_server: list[dict]
    routing: dict
    B0: float
    B3: float
    residual: float
    provenance: dict = field(default_factory=dict)

    @property
    def psi_sum(self) -> float:
        return float(sum(s["Psi"] for s in self.per_server))

    @property
    def gap_constant(self) -> float:
        """``sum_n Psi_n + B3``: the numerator of the ``O(1/V)`` cost gap bound."""
        return self.psi_sum + self.B3

    def to_dict(self) -> dict:
        return {"C_star": self.C_star, "total_cost_star": self.total_cost_star, "per_server": self.per_server,
                "B0": self.B0, "B3": self.B3, "gap_constant": self.gap_constant,
                "lp_residual": self.residual, "routing": self.routing, "provenance": self.provenance}

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def _psi(vertices: Sequence[PureFramePolicy], weights: np.ndarray, B0: float) -> tuple[float, bool]:
    # time fractions w_k -> frame probabilities p_k proportional to w_k / E[T_k]
    w = np.clip(weights, 0.0, None)
    ET = np.array([v.ET for v in vertices])
    ETT = np.array([v.ET2 - v.ET for v in vertices])
    p = w / ET
    p /= p.sum()
    mixture = int(np.count_nonzero(w > 1e-9)) > 1
    return float(B0 / 2 * (p @ ETT) / (p @ ET)), mixture


def solve_stationary(regions: Sequence[ServerRegion], law: Sequence[tuple[tuple[int, float], float]],
                     R_max: int, B0: float, mu_max: Sequence[float] | None = None) -> StationaryResult:
    """Minimise expected rejection plus server cost subject to rate stability.

    ``law`` lists ``((lam, c), prob)``.  ``mu_max`` (per server) enters the
    reported ``B3`` constant only.
    """
    N = len(regions)
    J = len(law)
    n_route = J * (N + 1)
    offs = np.cumsum([n_route] + [len(r.vertices) for r in regions])
    nv = int(offs[-1])
    obj = np.zeros(nv)
    A_eq, b_eq, A_ub = [], [], np.zeros((N, nv))
    for j, ((lam, c), pr) in enumerate(law):
        base = j * (N + 1)
        obj[base] = pr * c * lam
        sent = min(lam, R_max)
        for n in range(N):
            obj[base + 1 + n] = pr * c * (lam - sent)
            A_ub[n, base + 1 + n] = pr * sent
        row = np.zeros(nv)
        row[base:base + N + 1] = 1.0
        A_eq.append(row)
        b_eq.append(1.0)
    for n, reg in enumerate(regions):
        sl = slice(int(offs[n]), int(offs[n + 1]))
        obj[sl] = reg.costs
        A_ub[n, sl] = -reg.rates
        row = np.zeros(nv)
        row[sl] = 1.0
        A_eq.append(row)
        b_eq.append(1.0)
    A_eq, b_eq = np.array(A_eq), np.array(b_eq)
    res = linprog(obj, A_ub=A_ub, b_ub=np.zeros(N), A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if res.status != 0:
        raise RuntimeError(f"LP solver failed: {res.message}")
    x = res.x
    residual = float(max(np.abs(A_eq @ x - b_eq).max(), max(0.0, (A_ub @ x).max()), max(0.0, -x.min())))
    if residual > LP_TOL:
        raise RuntimeError(f"LP residual {residual:.3g} exceeds {LP_TOL}")

    C_star = float(obj[:n_route] @ x[:n_route])
    per_server = []
    for n, reg in enumerate(regions):
        w = x[int(offs[n]):int(offs[n + 1])]
        psi, mixture = _psi(reg.vertices, w, B0)
        used = [{"policy": v.label, "time_fraction": float(wk)} for v, wk in zip(reg.vertices, w) if wk > 1e-9]
        per_server.append({"mu_bar": float(reg.rates @ w), "cost": float(reg.costs @ w), "Psi": psi,
                           "mixture": mixture, "routed_rate": float(A_ub[n, :n_route] @ x[:n_route]),
                           "frame_policies": used})
    routing = {"reject_prob": float(sum(law[j][1] * x[j * (N + 1)] for j in range(J)))}
    mu_max = [0.0] * N if mu_max is None else list(mu_max)
    B3 = 0.5 * sum((R_max + mu) ** 2 for mu in mu_max)
    return StationaryResult(C_star, float(res.fun), per_server, routing, float(B0), float(B3), residual)


def oracle_for_config(config: SystemConfig) -> StationaryResult:
    src = config.source()
    if not isinstance(src, IidSynthetic):
        raise ValueError(f"the stationary oracle needs an i.i.d. workload, got kind {config.workload.get('kind')!r}")
    regions = [enumerate_server_region(s, config.I_max) for s in config.servers]
    res = solve_stationary(regions, src.law(), config.R_max, config.b0,
                           mu_max=[float(s.service.max_value) for s in config.servers])
    res.provenance = {"config": config.to_dict(), "seed": config.seed}
    return res
