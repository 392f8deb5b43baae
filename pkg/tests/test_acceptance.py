"""Acceptance checks, one test per criterion.

Each check records a single ``CRITERION k: PASS|FAIL ...`` line; pytest prints
them in the terminal summary, and ``python tests/test_acceptance.py`` prints
them directly.  Every tolerance is fixed below, before any run.
"""
import itertools
import json
import math
import sys

import numpy as np
import pytest

from dcprov.baselines import BaselineSpec
from dcprov.cli import main as cli_main
from dcprov.engine import Simulator
from dcprov.experiments import choose_v, small_config, sweep, five_server_config, trace_config
from dcprov.oracle import oracle_for_config
from dcprov.router import route
from dcprov.server_policy import PolicyConstants, _best_idle_params, activity_threshold
from dcprov.workload import FiniteDistribution, sample_service

# -- pinned protocol and tolerances -------------------------------------------------------

T_LONG = 1_000_000
C_MAX, R_MAX_T2 = 6, 40

# 1, 2
BOUND_V = (10, 100, 1000)
VIRT_V = 100
# 3
IDLE_DRAWS, IDLE_IMAX, IDLE_RTOL = 10_000, 1000, 1e-9
# 4
ROUTE_DRAWS = 10_000
# 5
GAP_V, GAP_SEEDS, GAP_Z = (1, 5, 25, 125), (0, 1, 2, 3, 4), 2.0
# 6
LIN_V, LIN_SEEDS, LIN_R2 = tuple(np.linspace(10, 1000, 6)), (0, 1, 2), 0.9
# 7
ZIPF_DRAWS, ZIPF_MEAN, ZIPF_TOL = 1_000_000, 1.9933, 0.01
# 8, 9
TRACE_V = (2.5e5, 5e5, 1e6, 2e6, 4e6)
TRACE_V_TOL = 0.02           # chosen V: smallest within 2% of the least average power
REACTIVE_FACTOR = 5.0        # Reactive max queue >= 5x proposed during the ramp
COMPARABLE = (1 / 5, 5.0)    # ReactiveExtra / proposed max-queue ratio
BOUNDED_FACTOR = 10.0        # final real queue <= 10 * peak rate
EXTRA_P = 20.0               # phantom requests per slot (200 at full scale, scaled by 1/10)
SLEEP_FRACTIONS = (0.2, 0.4)
SLEEP_QUEUE_GROWTH = 0.5

LINES: list[str] = []


def record(k: int, ok: bool, detail: str) -> bool:
    line = f"CRITERION {k}: {'PASS' if ok else 'FAIL'}  {detail}"
    LINES.append(line)
    print(line)
    return ok


def mean_se(x):
    x = np.asarray(x, dtype=float)
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(len(x)))


# -- 1. per-queue bound ----------------------------------------------------------------------

def check_1():
    worst, bad = [], 0
    for V in BOUND_V:
        log = Simulator(five_server_config(V=V), seed=0).run(T_LONG)
        bound = V * C_MAX + R_MAX_T2
        bad += log.violations["queue_bound"] + int((log.max_Q > bound).sum())
        worst.append(f"V={V}: max Q_n {int(log.max_Q.max())} <= {bound:g}")
    return record(1, bad == 0, f"violations={bad}; " + "; ".join(worst))


# -- 2. virtualized domination and bound -----------------------------------------------------

def check_2():
    log = Simulator(five_server_config(V=VIRT_V, mode="virtualized"), seed=0).run(T_LONG)
    bound = 5 * (VIRT_V * C_MAX + R_MAX_T2)
    dom = log.violations["shared_domination"]
    ok = dom == 0 and log.max_shared <= bound and log.violation_count == 0
    return record(2, ok, f"domination violations={dom}, max shared queue {log.max_shared} <= {bound}")


# -- 3. candidate rule versus brute force ----------------------------------------------------

def check_3():
    rng = np.random.default_rng(3)
    I = np.arange(1, IDLE_IMAX + 1, dtype=float)
    worst, bad = 0.0, 0
    for _ in range(IDLE_DRAWS):
        V = rng.uniform(1, 1000)
        Q = float(rng.integers(0, int(V * C_MAX + R_MAX_T2) + 1))
        m = rng.uniform(1, 50)
        var = m * (m - 1)
        g, W, e = rng.uniform(0, 10, 3)
        B0 = 100 * (1 - rng.random())
        mu = rng.uniform(1, 6)
        T = I + m + 1
        vals = (V * W * m + V * e - Q * mu + B0 / 2 * var + V * g * I) / T + B0 / 2 * T
        best = vals.min()
        _, i_star, s = _best_idle_params(np.array([g]), np.array([W]), np.array([m]), np.array([var]), 1,
                                         Q, V, e, mu, B0, IDLE_IMAX)
        err = max(abs(s - best), abs(vals[i_star - 1] - best)) / max(1.0, abs(best))
        worst = max(worst, err)
        bad += err > IDLE_RTOL
    return record(3, bad == 0, f"{IDLE_DRAWS} draws, mismatches={bad}, worst relative error {worst:.2e} "
                               f"(tol {IDLE_RTOL:g})")


# -- 4. router optimality --------------------------------------------------------------------

def brute_route(lam, c, Q, V, R_max):
    best = V * c * lam
    for R in itertools.product(range(min(lam, R_max) + 1), repeat=len(Q)):
        s = sum(R)
        if s <= min(lam, R_max):
            best = min(best, V * c * (lam - s) + sum(q * r for q, r in zip(Q, R)))
    return best


def check_4():
    rng = np.random.default_rng(4)
    bad = 0
    for _ in range(ROUTE_DRAWS):
        N = int(rng.integers(1, 4))
        lam, R_max = int(rng.integers(0, 11)), int(rng.integers(1, 11))
        V, c = int(rng.integers(1, 11)), int(rng.integers(1, 7))
        Q = [int(q) for q in rng.integers(0, 3 * V * c + 2, N)]
        dec = route(lam, c, Q, V, R_max)
        d, R = dec.rejected, dec.per_server
        got = V * c * d + sum(q * r for q, r in zip(Q, R))
        bad += got != brute_route(lam, c, Q, V, R_max) or sum(R) + d != lam or sum(R) > R_max
    return record(4, bad == 0, f"{ROUTE_DRAWS} instances, mismatches={bad} (exact integers)")


# -- 5. cost gap shrinks like 1/V ------------------------------------------------------------

def check_5():
    cfg = small_config(V=1)
    res = oracle_for_config(cfg)
    opt, const = res.total_cost_star, res.gap_constant
    _, rows = sweep(cfg, GAP_V, GAP_SEEDS, horizon=T_LONG)
    gaps = {r.V: (r.avg_cost - opt, r.cost_stderr) for r in rows}
    a = all(g >= -GAP_Z * se for g, se in gaps.values())
    (g1, s1), (g125, s125) = gaps[GAP_V[0]], gaps[GAP_V[-1]]
    b = g1 - g125 > GAP_Z * math.hypot(s1, s125)
    c = all(V * g <= const + GAP_Z * V * se for V, (g, se) in gaps.items())
    detail = ", ".join(f"V={V:g}: gap {g:.4f}+-{se:.4f} V*gap {V * g:.1f}" for V, (g, se) in gaps.items())
    return record(5, a and b and c, f"(a) {a} (b) {b} (c) {c}; optimum {opt:.4f}, bound constant {const:.1f}; "
                                    + detail)


# -- 6. queue grows linearly in V ------------------------------------------------------------

def check_6():
    _, rows = sweep(five_server_config(V=1), LIN_V, LIN_SEEDS, horizon=T_LONG)
    V = np.array([r.V for r in rows])
    q = np.array([r.avg_queue for r in rows])
    slope, icpt = np.polyfit(V, q, 1)
    r2 = 1 - ((q - (slope * V + icpt)) ** 2).sum() / ((q - q.mean()) ** 2).sum()
    under = bool(np.all(q < 5 * (V * C_MAX + R_MAX_T2)))
    ok = r2 >= LIN_R2 and slope > 0 and under
    pts = ", ".join(f"{v:g}:{x:.0f}" for v, x in zip(V, q))
    return record(6, ok, f"R^2={r2:.4f} (>= {LIN_R2}), slope={slope:.3f}, under bound line={under}; {pts}")


# -- 7. Zipf mean ----------------------------------------------------------------------------

def check_7():
    z = sample_service(FiniteDistribution.zipf(10, 1.9), np.random.default_rng(7))
    x = FiniteDistribution.zipf(10, 1.9).sample(np.random.default_rng(7), ZIPF_DRAWS)
    mean = float(x.mean())
    ok = abs(mean - ZIPF_MEAN) <= ZIPF_TOL and 1 <= z <= 10
    return record(7, ok, f"empirical mean {mean:.4f} over {ZIPF_DRAWS} draws, target {ZIPF_MEAN} +- {ZIPF_TOL}")


# -- 8, 9. trace comparison ------------------------------------------------------------------

def backlog_for(V, idle_cost=0.0):
    cfg = trace_config(V=V, idle_cost=idle_cost)
    s = cfg.servers[0]
    k = PolicyConstants(cfg.b0, V, s.e, s.service.mean)
    th = activity_threshold(s.modes, k, cfg.I_max)
    return 0 if th is None else th


def ramp_stats(log, horizon):
    q = log.series("shared")
    return {"power": log.avg_cost, "max_q": int(q[horizon // 2:].max()), "final_q": int(q[-1])}


def trace_run(V, idle_cost=0.0, backlog=None, policy=None):
    cfg = trace_config(V=V, idle_cost=idle_cost, backlog=backlog_for(V) if backlog is None else backlog)
    if policy is not None:
        cfg = cfg.with_(policy=policy)
    return ramp_stats(Simulator(cfg, keep_full=True).run(), cfg.horizon), cfg


_TRACE = {}


def trace_study():
    if _TRACE:
        return _TRACE
    runs = {V: trace_run(V)[0] for V in TRACE_V}
    rows = [type("Row", (), {"V": V, "avg_cost": r["power"]}) for V, r in runs.items()]
    V = choose_v(rows, TRACE_V_TOL)
    base = {"V": V, "backlog": backlog_for(V), "proposed": runs[V], "sweep": runs}
    for name, pol in (("always_on", BaselineSpec.always_on(106)), ("reactive", BaselineSpec.reactive(10)),
                      ("reactive_extra", BaselineSpec.reactive_extra(10, EXTRA_P))):
        base[name] = trace_run(V, policy=pol)[0]
    _TRACE.update(base)
    return _TRACE


def check_8():
    s = trace_study()
    p, r, x, a = s["proposed"], s["reactive"], s["reactive_extra"], s["always_on"]
    bounded = p["final_q"] <= BOUNDED_FACTOR * 212
    ok_a = bounded and r["max_q"] >= REACTIVE_FACTOR * p["max_q"]
    ok_b = p["power"] < a["power"]
    ratio = x["max_q"] / max(p["max_q"], 1)
    ok_c = COMPARABLE[0] <= ratio <= COMPARABLE[1] and x["power"] > p["power"]
    sweep_txt = ", ".join(f"{V:g}:{r_['power']:.0f}/{r_['max_q']}" for V, r_ in s["sweep"].items())
    return record(8, ok_a and ok_b and ok_c,
                  f"(a) {ok_a} (b) {ok_b} (c) {ok_c}; V={s['V']:g} backlog={s['backlog']}; "
                  f"proposed power {p['power']:.1f} maxQ {p['max_q']} finalQ {p['final_q']}; "
                  f"reactive maxQ {r['max_q']}; reactive_extra power {x['power']:.1f} maxQ {x['max_q']} "
                  f"(ratio {ratio:.2f}); always_on power {a['power']:.1f}; sweep power/maxQ {sweep_txt}")


def check_9():
    s = trace_study()
    p0, a = s["proposed"], s["always_on"]
    parts, ok = [], True
    for f in SLEEP_FRACTIONS:
        r, _ = trace_run(s["V"], idle_cost=f * 10.0, backlog=s["backlog"])
        growth = (r["max_q"] - p0["max_q"]) / max(p0["max_q"], 1)
        good = growth < SLEEP_QUEUE_GROWTH and r["power"] < a["power"]
        ok &= good
        parts.append(f"sleep {f:g}e: maxQ {r['max_q']} (growth {growth:+.1%}) power {r['power']:.1f}")
    return record(9, ok, f"baseline maxQ {p0['max_q']}, always_on power {a['power']:.1f}; " + "; ".join(parts))


# -- 10. byte-identical outputs --------------------------------------------------------------

def check_10(tmp):
    from pathlib import Path
    tmp = Path(tmp)
    cfg = tmp / "c.json"
    cfg.write_text(json.dumps(small_config(V=25).with_(horizon=100_000, I_max=200).to_dict()))
    files = []
    for d in ("a", "b"):
        out = str(tmp / d)
        cli_main(["simulate", "--config", str(cfg), "--out-dir", out])
        cli_main(["sweep", "--config", str(cfg), "--v-list", "5,25", "--seeds", "0,1", "--oracle", "--out-dir", out])
        cli_main(["oracle", "--config", str(cfg), "--out-dir", out])
        cli_main(["compare", "--config", str(cfg), "--policies", "proposed,reactive:10", "--out-dir", out])
        files.append({p.name: p.read_bytes() for p in sorted(Path(out).iterdir())})
    same = files[0] == files[1] and len(files[0]) >= 8
    return record(10, same, f"{len(files[0])} output files compared byte for byte")


# -- pytest entry points ---------------------------------------------------------------------

@pytest.mark.slow
@pytest.mark.parametrize("k", range(1, 10))
def test_criterion(k):
    assert globals()[f"check_{k}"]()


def test_criterion_10(tmp_path):
    assert check_10(tmp_path)


if __name__ == "__main__":
    import tempfile
    ok = True
    for k in range(1, 10):
        ok &= globals()[f"check_{k}"]()
    with tempfile.TemporaryDirectory() as d:
        ok &= check_10(d)
    sys.exit(0 if ok else 1)
