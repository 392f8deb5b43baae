"""Command-line front end.

    dcprov simulate --config cfg.json --out-dir out/
    dcprov sweep    --config cfg.json --v-list 10,100,1000 --seeds 0,1,2 --oracle
    dcprov oracle   --config cfg.json
    dcprov trace-gen --steady 65.4 --peak 212 --horizon 140000 --out trace.csv
    dcprov compare  --config cfg.json --policies proposed,always_on:106,reactive:10

Exit codes: 0 success, 1 invariant violation, 2 bad input.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from .baselines import BaselineSpec
from .config import ConfigError, SystemConfig, load_config
from .engine import Simulator
from .experiments import sweep
from .metrics import _jsonable
from .oracle import oracle_for_config
from .workload import generate_ramp_trace, stream, write_trace_csv

log = logging.getLogger("dcprov")

EXIT_OK, EXIT_VIOLATION, EXIT_INPUT = 0, 1, 2


def parse_policy(text: str) -> BaselineSpec | None:
    """``proposed``, ``always_on:K``, ``reactive[:W]`` or ``reactive_extra[:W[:P]]``."""
    kind, *args = text.strip().split(":")
    try:
        if kind == "proposed" and not args:
            return None
        if kind == "always_on" and len(args) == 1:
            return BaselineSpec.always_on(int(args[0]))
        if kind == "reactive" and len(args) <= 1:
            return BaselineSpec.reactive(*(int(a) for a in args))
        if kind == "reactive_extra" and len(args) <= 2:
            w = int(args[0]) if args else 10
            return BaselineSpec.reactive_extra(w, *(float(a) for a in args[1:]))
    except ValueError as exc:
        raise ConfigError(f"policy {text!r}: {exc}") from exc
    raise ConfigError(f"cannot parse policy {text!r}")


def _floats(text: str) -> list[float]:
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad number list {text!r}") from exc
    if not vals:
        raise ConfigError("empty list")
    return vals


def _ints(text: str) -> list[int]:
    return [int(v) for v in _floats(text)]


def _load(args) -> SystemConfig:
    cfg = load_config(args.config)
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "horizon", None) is not None:
        changes["horizon"] = args.horizon
    if getattr(args, "downsample", None) is not None:
        changes["downsample"] = args.downsample
    if getattr(args, "policy", None):
        changes["policy"] = parse_policy(args.policy)
    if getattr(args, "V", None) is not None:
        changes["V"] = args.V
    return cfg.with_(**changes) if changes else cfg


def _out_dir(args) -> Path:
    p = Path(args.out_dir)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _provenance_lines(cfg: SystemConfig, seed) -> list[str]:
    return ["# config: " + json.dumps(_jsonable(cfg.to_dict()), sort_keys=True), f"# seed: {seed}"]


def cmd_simulate(args) -> int:
    cfg = _load(args)
    log.info("simulating %d slots, N=%d, V=%g", cfg.horizon, cfg.N, cfg.V)
    mlog = Simulator(cfg).run()
    out = _out_dir(args)
    mlog.to_csv(out / "metrics.csv")
    mlog.write_summary(out / "summary.json")
    print(f"avg_cost={mlog.avg_cost:.6g} avg_queue={mlog.avg_queue:.6g} max_queue={mlog.max_queue} "
          f"violations={mlog.violation_count}")
    if mlog.violation_count:
        log.error("invariant violations: %s (first at slot %d)", mlog.violations, mlog.first_violation_slot)
        return EXIT_VIOLATION
    return EXIT_OK


SWEEP_COLUMNS = ("row", "V", "seed", "n", "avg_cost", "cost_stderr", "avg_queue", "queue_stderr", "max_queue",
                 "violations", "oracle_cost", "gap")


def cmd_sweep(args) -> int:
    cfg = _load(args)
    seeds = _ints(args.seeds) if args.seeds else [cfg.seed]
    runs, rows = sweep(cfg, _floats(args.v_list), seeds, workers=args.workers, oracle=args.oracle)
    out = _out_dir(args)
    with open(out / "sweep.csv", "w", newline="") as fh:
        fh.write("\n".join(_provenance_lines(cfg, seeds)) + "\n")
        w = csv.writer(fh)
        w.writerow(SWEEP_COLUMNS)
        for r in sorted(runs, key=lambda r: (r.V, r.seed)):
            w.writerow(["run", repr(r.V), r.seed, 1, repr(r.avg_cost), "", repr(r.avg_queue), "", r.max_queue,
                        r.violations, "", ""])
        for a in rows:
            w.writerow(["mean", repr(a.V), "", a.n, repr(a.avg_cost), repr(a.cost_stderr), repr(a.avg_queue),
                        repr(a.queue_stderr), a.max_queue, a.violations,
                        "" if a.oracle_cost is None else repr(a.oracle_cost), "" if a.gap is None else repr(a.gap)])
    for a in rows:
        extra = "" if a.gap is None else f" gap={a.gap:.4g}"
        print(f"V={a.V:g} cost={a.avg_cost:.6g}+-{a.cost_stderr:.2g} queue={a.avg_queue:.6g}{extra}")
    return EXIT_VIOLATION if any(a.violations for a in rows) else EXIT_OK


def cmd_oracle(args) -> int:
    cfg = _load(args)
    if cfg.workload.get("kind") != "iid":
        raise ConfigError(f"oracle needs an i.i.d. workload; {cfg.workload.get('kind')!r} traces are not supported")
    res = oracle_for_config(cfg)
    out = _out_dir(args)
    res.to_json(out / "oracle.json")
    print(f"C_star={res.C_star:.6g} total_cost_star={res.total_cost_star:.6g}")
    return EXIT_OK


def cmd_trace_gen(args) -> int:
    if not 0 <= args.steady <= args.peak:
        raise ConfigError("need 0 <= steady <= peak")
    if args.horizon < 1:
        raise ConfigError("horizon must be >= 1")
    block = generate_ramp_trace(args.steady, args.peak, args.horizon, stream(args.seed, "trace"),
                                cost=args.cost, noise=args.noise)
    params = {"steady_rate": args.steady, "peak_rate": args.peak, "horizon": args.horizon, "cost": args.cost,
              "noise": args.noise}
    write_trace_csv(args.out, block, ["trace: " + json.dumps(params, sort_keys=True), f"seed: {args.seed}"])
    print(f"wrote {args.horizon} slots to {args.out}")
    return EXIT_OK


COMPARE_COLUMNS = ("policy", "avg_cost", "avg_queue", "max_queue", "max_queue_slot", "final_queue", "violations")


def cmd_compare(args) -> int:
    cfg = _load(args)
    out = _out_dir(args)
    names = [p.strip() for p in args.policies.split(",") if p.strip()]
    rows, bad = [], 0
    for name in names:
        c = cfg.with_(policy=parse_policy(name))
        mlog = Simulator(c).run()
        slug = name.replace(":", "_")
        mlog.to_csv(out / f"metrics_{slug}.csv")
        mlog.write_summary(out / f"summary_{slug}.json")
        final = mlog.shared_final if c.virtualized else int(mlog.Q_final.sum())
        rows.append((name, repr(mlog.avg_cost), repr(mlog.avg_queue), mlog.max_queue, mlog.max_queue_slot, final,
                     mlog.violation_count))
        bad += mlog.violation_count
        print(f"{name}: avg_cost={mlog.avg_cost:.6g} max_queue={mlog.max_queue} final_queue={final}")
    with open(out / "compare.csv", "w", newline="") as fh:
        fh.write("\n".join(_provenance_lines(cfg, cfg.seed)) + "\n")
        w = csv.writer(fh)
        w.writerow(COMPARE_COLUMNS)
        w.writerows(rows)
    return EXIT_VIOLATION if bad else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dcprov", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out="."):
        sp.add_argument("--config", required=True, help="JSON system config")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--horizon", type=int)
        sp.add_argument("--out-dir", default=out)
        sp.add_argument("--downsample", type=int, help="keep every k-th slot in metrics.csv")
        sp.add_argument("--policy", help="proposed | always_on:K | reactive[:W] | reactive_extra[:W[:P]]")

    sp = sub.add_parser("simulate", help="run one simulation")
    common(sp)
    sp.add_argument("--V", type=float, help="override V")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("sweep", help="average cost and queue over a list of V values")
    common(sp)
    sp.add_argument("--v-list", required=True, help="comma-separated V values")
    sp.add_argument("--seeds", help="comma-separated seeds (default: --seed or the config seed)")
    sp.add_argument("--oracle", action="store_true", help="add the stationary optimum column")
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("oracle", help="solve for the best stationary policy")
    sp.add_argument("--config", required=True)
    sp.add_argument("--out-dir", default=".")
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("trace-gen", help="write a steady-then-ramp arrival trace")
    sp.add_argument("--steady", type=float, required=True)
    sp.add_argument("--peak", type=float, required=True)
    sp.add_argument("--horizon", type=int, required=True)
    sp.add_argument("--cost", type=float, default=1.0)
    sp.add_argument("--noise", choices=("poisson", "none"), default="poisson")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", default="trace.csv")
    sp.set_defaults(func=cmd_trace_gen)

    sp = sub.add_parser("compare", help="run several policies on the same workload and seed")
    common(sp)
    sp.add_argument("--policies", default="proposed,reactive:10", help="comma-separated policy list")
    sp.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
