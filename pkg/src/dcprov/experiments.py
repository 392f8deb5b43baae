"""Ready-made instances and multi-run drivers (V sweeps, policy comparisons)."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .baselines import BaselineSpec
from .config import SystemConfig, config_from_dict
from .engine import Simulator
from .metrics import MetricsLog
from .oracle import oracle_for_config

# (service lo, hi), e, setup cost, mean setup slots
FIVE_SERVERS = [((2, 6), 4, 2, 5.893), ((2, 4), 2, 3, 4.342), ((2, 4), 3, 3, 27.397),
                ((1, 3), 4, 2, 5.817), ((2, 4), 2, 4, 6.211)]


def five_server_specs(rows=FIVE_SERVERS, idle_cost: float = 0.0) -> list[dict]:
    return [{"e": e, "service": {"kind": "uniform", "lo": lo, "hi": hi},
             "modes": [{"idle_cost": idle_cost, "setup_cost": W, "setup": {"kind": "geometric", "mean": m}}]}
            for (lo, hi), e, W, m in rows]


def five_server_config(V: float = 100, lam=(10, 30), cost=(1, 6), **kw) -> SystemConfig:
    d = {"V": V, "servers": five_server_specs(),
         "workload": {"kind": "iid", "lambda": {"kind": "uniform", "lo": lam[0], "hi": lam[1]},
                      "cost": {"kind": "uniform", "lo": cost[0], "hi": cost[1]}}}
    d.update(kw)
    return config_from_dict(d)


def small_config(V: float = 1, **kw) -> SystemConfig:
    """Two-server instance (the first two of the five-server fleet) small enough for the oracle."""
    d = {"V": V, "R_max": 6, "servers": five_server_specs(FIVE_SERVERS[:2]),
         "workload": {"kind": "iid", "lambda": {"kind": "uniform", "lo": 0, "hi": 6},
                      "cost": {"kind": "uniform", "lo": 1, "hi": 6}}}
    d.update(kw)
    return config_from_dict(d)


def trace_config(V: float, idle_cost: float = 0.0, N: int = 106, steady: float = 65.4, peak: float = 212.0,
                 horizon: int = 140_000, e: float = 10.0, setup_cost: float = 10.0, setup_prob: float = 0.001,
                 always_on: int = 2, I_max: int = 5000, R_max: int | None = None,
                 backlog: int = 0, B0: float | None = None, policy: dict | None = None, seed: int = 0) -> SystemConfig:
    """Homogeneous fleet with Zipf service and long setups on a steady-then-ramp trace, no rejection."""
    d = {"V": V, "I_max": I_max, "horizon": horizon, "seed": seed, "mode": "virtualized",
         "R_max": int(math.ceil(peak * 1.5)) if R_max is None else R_max,
         "no_rejection": True, "always_on_count": always_on, "initial_virtual_backlog": backlog, "B0": B0,
         "servers": [{"e": e, "count": N, "service": {"kind": "zipf", "K": 10, "p": 1.9},
                      "modes": [{"idle_cost": idle_cost, "setup_cost": setup_cost,
                                 "setup": {"kind": "geometric", "success_prob": setup_prob}}]}],
         "workload": {"kind": "ramp", "steady_rate": steady, "peak_rate": peak, "horizon": horizon,
                      "cost": 1.0, "noise": "poisson"}}
    if policy is not None:
        d["policy"] = policy
    return config_from_dict(d)


@dataclass
class RunResult:
    V: float
    seed: int
    policy: str
    avg_cost: float
    avg_queue: float
    max_queue: int
    final_queue: int
    violations: int
    components: dict


def _one(args) -> RunResult:
    config, seed, horizon = args
    log = Simulator(config, seed=seed).run(horizon)
    return result_of(config, seed, log)


def result_of(config: SystemConfig, seed: int, log: MetricsLog) -> RunResult:
    policy = "proposed" if config.policy is None else config.policy.kind
    final = log.shared_final if config.virtualized else int(log.Q_final.sum())
    return RunResult(config.V, seed, policy, log.avg_cost, log.avg_queue, log.max_queue, final,
                     log.violation_count, log.avg_components)


def run_many(jobs: list[tuple[SystemConfig, int, int | None]], workers: int = 1) -> list[RunResult]:
    """Run independent simulations; results come back in job order regardless of completion order."""
    if workers <= 1:
        return [_one(j) for j in jobs]
    with ProcessPoolExecutor(workers) as ex:
        return list(ex.map(_one, jobs))


@dataclass
class SweepRow:
    V: float
    n: int
    avg_cost: float
    cost_stderr: float
    avg_queue: float
    queue_stderr: float
    max_queue: int
    violations: int
    oracle_cost: float | None = None

    @property
    def gap(self) -> float | None:
        return None if self.oracle_cost is None else self.avg_cost - self.oracle_cost


def _mean_se(x) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    se = float(x.std(ddof=1) / math.sqrt(len(x))) if len(x) > 1 else 0.0
    return float(x.mean()), se


def aggregate(runs: list[RunResult], oracle_cost: float | None = None) -> list[SweepRow]:
    rows = []
    for V in sorted({r.V for r in runs}):
        rs = [r for r in runs if r.V == V]
        c, cse = _mean_se([r.avg_cost for r in rs])
        q, qse = _mean_se([r.avg_queue for r in rs])
        rows.append(SweepRow(V, len(rs), c, cse, q, qse, max(r.max_queue for r in rs),
                             sum(r.violations for r in rs), oracle_cost))
    return rows


def sweep(config: SystemConfig, V_list, seeds, horizon: int | None = None, workers: int = 1,
          oracle: bool = False) -> tuple[list[RunResult], list[SweepRow]]:
    jobs = [(config.with_(V=float(V)), int(s), horizon) for V in sorted(V_list) for s in seeds]
    runs = run_many(jobs, workers)
    oc = None
    if oracle:
        oc = oracle_for_config(config).total_cost_star
    return runs, aggregate(runs, oc)


def choose_v(rows: list[SweepRow], tol: float = 0.02) -> float:
    """Smallest ``V`` whose average cost is within ``tol`` (relative) of the sweep minimum."""
    best = min(r.avg_cost for r in rows)
    return min(r.V for r in rows if r.avg_cost <= best * (1 + tol))


def compare(config: SystemConfig, policies: dict[str, BaselineSpec | None], seed: int | None = None,
            horizon: int | None = None, keep_full: bool = False) -> dict[str, MetricsLog]:
    """Run several policies on the same workload and seed."""
    out = {}
    for name, pol in policies.items():
        cfg = config.with_(policy=pol)
        out[name] = Simulator(cfg, seed=seed, keep_full=keep_full).run(horizon)
    return out
