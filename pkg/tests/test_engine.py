import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dcprov.config import ConfigError, config_from_dict
from dcprov.engine import InvariantViolation, Simulator, run
from dcprov.experiments import small_config, five_server_config
from dcprov.metrics import COMPONENTS, check_rate_stability
from dcprov.workload import SlotEvent


def one_server(lam=0, cost=1, e=4.0, idle_cost=0.5, setup_cost=3.0, setup_slots=2, **kw):
    d = {"V": 10, "servers": [{"e": e, "service": {"kind": "deterministic", "value": 2},
                               "modes": [{"idle_cost": idle_cost, "setup_cost": setup_cost,
                                          "setup": {"kind": "deterministic", "slots": setup_slots}}]}],
         "workload": {"kind": "iid", "lambda": {"kind": "deterministic", "value": lam},
                      "cost": {"kind": "deterministic", "value": cost}}}
    d.update(kw)
    return config_from_dict(d)


def test_empty_active_server_burns_e():
    sim = Simulator(one_server())
    r = sim.step(SlotEvent(0, 1.0))
    assert sim.server_state(0).phase == "Active" and sim.server_state(0).H == 1
    assert r.queues == (0,) and r.cost == 4.0 and r.costs["active"] == 4.0


def test_idle_countdown():
    sim = Simulator(one_server())
    sim.set_server(0, "Idling", remaining=3, setup_slots=2)
    r = sim.step(SlotEvent(0, 1.0))
    s = sim.server_state(0)
    assert (s.phase, s.mode, s.remaining, s.H) == ("Idling", 0, 2, 0)
    assert r.costs == {"rejection": 0.0, "setup": 0.0, "active": 0.0, "idle": 0.5}
    assert r.served == (0,)


def test_full_frame_trace():
    sim = Simulator(one_server())
    sim.set_server(0, "Idling", remaining=2, setup_slots=2)
    phases, costs = [], []
    for _ in range(5):
        r = sim.step(SlotEvent(0, 1.0))
        costs.append(r.costs)
        phases.append(sim.server_state(0).phase)
    # end-of-slot phases: idle, idle -> setup, setup, setup -> active (final slot), active
    assert phases == ["Idling", "InSetup", "InSetup", "Active", "Active"]
    assert [c["idle"] for c in costs] == [0.5, 0.5, 0, 0, 0]
    assert [c["setup"] for c in costs] == [0, 0, 3, 3, 0]
    assert [c["active"] for c in costs] == [0, 0, 0, 0, 4]
    ft = sim.finalize().frame_table()
    assert ft["length"].tolist() == [5] and ft["idle"].tolist() == [2] and ft["setup"].tolist() == [2]
    assert ft["end"].tolist() == [4]
    assert sim.server_state(0).frame_start == 5


def test_zero_arrivals_zero_queue_and_rejection():
    log = run(five_server_config(V=100, lam=(0, 0)), horizon=20_000, seed=3)
    assert log.totals["rejection"] == 0.0 and log.max_queue == 0
    assert np.all(check_rate_stability(log) <= 0)


def test_setup_costs_never_overlap_active_costs():
    log = run(five_server_config(V=10), horizon=5_000, seed=1, keep_full=True)
    s = {c: log.series(c) for c in COMPONENTS}
    total = sum(s[c] for c in COMPONENTS)
    assert total.sum() == pytest.approx(log.total_cost, rel=1e-12)
    assert log.total_cost == pytest.approx(sum(log.totals.values()))
    # per-slot active cost is sum of e over active servers only
    e = np.array([4, 2, 3, 4, 2])
    n_active = log.series("n_active")
    assert np.all(s["active"] <= e.sum()) and np.all((n_active == 0) <= (s["active"] == 0))


def test_frame_length_identity():
    log = run(small_config(V=125), horizon=20_000, seed=2)
    ft = log.frame_table()
    assert len(ft["length"]) > 0
    assert np.array_equal(ft["length"], ft["idle"] + ft["setup"] + 1)
    assert log.violations["frame_length"] == 0


def test_running_average_recomputed():
    cfg = five_server_config(V=100)
    log = run(cfg, horizon=3_000, seed=5, keep_full=True, downsample=7)
    slots = log.sampled("slot")
    cum = np.cumsum(sum(log.series(c) for c in COMPONENTS))
    assert np.allclose(log.sampled("avg_cost"), cum[slots] / (slots + 1), rtol=1e-12)
    assert np.all((slots + 1) % 7 == 0)


def test_determinism_and_step_run_equivalence():
    cfg = five_server_config(V=100)
    a = Simulator(cfg, seed=9, keep_full=True).run(2_000)
    b = Simulator(cfg, seed=9, keep_full=True).run(2_000)
    assert a.summary() == b.summary()
    sim = Simulator(cfg, seed=9, keep_full=True)
    for _ in range(700):
        sim.step()
    c = sim.run(2_000)
    for k in ("queue", "rejection", "setup", "n_active", "arrivals"):
        assert np.array_equal(a.series(k), c.series(k))
    d = Simulator(cfg, seed=10).run(2_000)
    assert d.total_cost != a.total_cost


@settings(max_examples=15)
@given(st.floats(1, 300), st.integers(0, 10**6), st.sampled_from(["per-queue", "virtualized"]))
def test_queue_bound_every_slot(V, seed, mode):
    cfg = small_config(V=V, mode=mode)
    sim = Simulator(cfg, seed=seed, strict=True, keep_full=True)
    log = sim.run(3_000)
    assert np.all(log.max_Q <= V * 6 + 6)
    assert log.violation_count == 0
    if mode == "virtualized":
        assert np.all(log.series("shared") <= log.series("vsum"))
        assert log.max_shared <= 2 * (V * 6 + 6)


def test_rate_stability_residual_bounded():
    cfg = five_server_config(V=100)
    log = run(cfg, horizon=50_000, seed=4)
    res = check_rate_stability(log)
    assert np.all(res <= log.Q_final / log.T + 1e-15)
    assert np.all(res <= 640 / log.T)


def test_always_on_overprovisioned_residual_negative():
    cfg = five_server_config(V=100, lam=(1, 2), always_on_count=5)
    log = run(cfg, horizon=10_000, seed=0)
    assert np.all(check_rate_stability(log) < 0)
    assert log.totals["setup"] == 0 and log.totals["idle"] == 0
    assert log.totals["active"] == pytest.approx(15 * 10_000)


def test_initial_backlog_raises_bound():
    cfg = small_config(V=1, initial_virtual_backlog=500)
    sim = Simulator(cfg, seed=0, strict=True)
    log = sim.run(2_000)
    assert log.violation_count == 0
    assert log.Q_initial.tolist() == [500, 500]


def test_strict_mode_raises_on_violation():
    cfg = small_config(V=1)
    sim = Simulator(cfg, seed=0, strict=True)
    sim.q_bound[:] = 0.5  # tighter than anything the router can respect
    with pytest.raises(InvariantViolation):
        sim.run(500)
    lax = Simulator(cfg, seed=0)
    lax.q_bound[:] = 0.5
    log = lax.run(500)
    assert log.violation_count > 0 and log.first_violation_slot >= 0


def test_no_rejection_routes_everything():
    cfg = small_config(V=1, no_rejection=True)
    log = run(cfg, horizon=2_000, seed=1, keep_full=True)
    assert log.series("rejected").sum() == 0 and log.totals["rejection"] == 0
    assert log.routed.sum() == log.series("arrivals").sum()


def test_run_validation():
    with pytest.raises(ConfigError):
        one_server(I_max=0)
    sim = Simulator(one_server(), seed=0)
    sim.run(10)
    with pytest.raises(ValueError):
        sim.run(5)


def test_summary_fields():
    log = run(small_config(V=5), horizon=1_000, seed=0)
    s = log.summary()
    assert s["invariant_violation_count"] == 0 and s["slots"] == 1000
    assert s["provenance"]["seed"] == 0 and "servers" in s["provenance"]["config"]
