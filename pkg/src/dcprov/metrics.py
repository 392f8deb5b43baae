"""Run records: running averages, queue traces, frame statistics, invariant counts."""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

COMPONENTS = ("rejection", "setup", "active", "idle")

CSV_COLUMNS = ("slot", "avg_cost", "total_queue", "active_servers", "avg_rejection", "avg_setup",
               "avg_active", "avg_idle", "shared_queue", "virtual_queue_sum", "arrivals", "rejected")

# per-slot streams produced by the engine, in kernel output order
STREAMS = ("rejection", "setup", "active", "idle", "queue", "shared", "vsum", "n_active", "rejected", "arrivals")


@dataclass
class SlotRecord:
    """Everything that happened in one slot; queues are end-of-slot values."""

    slot: int
    arrivals: int
    rejected: int
    routed: tuple[int, ...]
    served: tuple[int, ...]
    costs: dict
    queues: tuple[int, ...]
    shared_queue: int
    active_servers: int

    @property
    def cost(self) -> float:
        return sum(self.costs.values())


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


@dataclass
class MetricsLog:
    N: int
    config: dict
    seed: int
    downsample: int = 1
    keep_full: bool = False
    virtualized: bool = False

    T: int = 0
    totals: dict = field(default_factory=lambda: {c: 0.0 for c in COMPONENTS})
    queue_sum: int = 0
    vsum_sum: int = 0
    max_queue: int = 0
    max_queue_slot: int = -1
    max_shared: int = 0
    max_vsum: int = 0
    rows: dict = field(default_factory=lambda: {c: [] for c in CSV_COLUMNS})
    full: dict | None = None

    routed: np.ndarray | None = None
    served: np.ndarray | None = None
    max_Q: np.ndarray | None = None
    Q_initial: np.ndarray | None = None
    Q_final: np.ndarray | None = None
    active_frames: np.ndarray | None = None
    frames: dict = field(default_factory=lambda: {k: [] for k in ("server", "length", "end", "idle", "setup", "mode")})
    violations: dict = field(default_factory=lambda: {"queue_bound": 0, "shared_domination": 0, "frame_length": 0})
    first_violation_slot: int = -1
    saturated_slots: int = 0
    shared_final: int = 0

    def __post_init__(self):
        if self.keep_full and self.full is None:
            self.full = {k: [] for k in STREAMS}

    # -- accumulation -----------------------------------------------------------------

    def extend(self, out: dict, n: int) -> None:
        """Fold ``n`` slots of kernel output (arrays keyed by :data:`STREAMS`) into the log."""
        if n <= 0:
            return
        t0 = self.T
        comp = {c: out[c][:n] for c in COMPONENTS}
        cum = {c: self.totals[c] + np.cumsum(comp[c]) for c in COMPONENTS}
        queue = out["queue"][:n]
        k = self.downsample
        slots = np.arange(t0, t0 + n)
        pick = np.nonzero((slots + 1) % k == 0)[0]
        denom = (slots[pick] + 1).astype(float)
        avg = {c: cum[c][pick] / denom for c in COMPONENTS}
        total_avg = sum(cum[c][pick] for c in COMPONENTS) / denom
        self.rows["slot"].append(slots[pick])
        self.rows["avg_cost"].append(total_avg)
        self.rows["total_queue"].append(queue[pick].copy())
        self.rows["active_servers"].append(out["n_active"][:n][pick].copy())
        for c in COMPONENTS:
            self.rows[f"avg_{c}"].append(avg[c])
        self.rows["shared_queue"].append(out["shared"][:n][pick].copy())
        self.rows["virtual_queue_sum"].append(out["vsum"][:n][pick].copy())
        self.rows["arrivals"].append(out["arrivals"][:n][pick].copy())
        self.rows["rejected"].append(out["rejected"][:n][pick].copy())
        if self.full is not None:
            for key in STREAMS:
                self.full[key].append(out[key][:n].copy())
        for c in COMPONENTS:
            self.totals[c] = float(cum[c][-1])
        self.queue_sum += int(queue.sum())
        self.vsum_sum += int(out["vsum"][:n].sum())
        i = int(np.argmax(queue))
        if int(queue[i]) > self.max_queue or self.max_queue_slot < 0:
            self.max_queue = int(queue[i])
            self.max_queue_slot = t0 + i
        self.max_shared = max(self.max_shared, int(out["shared"][:n].max()))
        self.max_vsum = max(self.max_vsum, int(out["vsum"][:n].max()))
        self.T = t0 + n

    def add_frames(self, buf: dict, count: int) -> None:
        for key in self.frames:
            self.frames[key].append(buf[key][:count].copy())

    # -- views -------------------------------------------------------------------------

    def _cat(self, parts, dtype=float):
        return np.concatenate(parts) if parts else np.zeros(0, dtype=dtype)

    def series(self, name: str) -> np.ndarray:
        """Full per-slot stream (requires ``keep_full``)."""
        if self.full is None:
            raise ValueError("per-slot streams were not kept; run with keep_full=True")
        return self._cat(self.full[name])

    def sampled(self, name: str) -> np.ndarray:
        return self._cat(self.rows[name])

    def frame_table(self) -> dict:
        return {k: self._cat(v, dtype=np.int64) for k, v in self.frames.items()}

    def frame_histogram(self, server: int) -> Counter:
        """Frame-length counts for one server (active frames have length 1)."""
        ft = self.frame_table()
        h = Counter(ft["length"][ft["server"] == server].tolist())
        if self.active_frames is not None and self.active_frames[server]:
            h[1] += int(self.active_frames[server])
        return h

    @property
    def total_cost(self) -> float:
        return sum(self.totals.values())

    @property
    def avg_cost(self) -> float:
        return self.total_cost / self.T if self.T else 0.0

    @property
    def avg_components(self) -> dict:
        return {c: (v / self.T if self.T else 0.0) for c, v in self.totals.items()}

    @property
    def avg_queue(self) -> float:
        return self.queue_sum / self.T if self.T else 0.0

    @property
    def avg_virtual_queue(self) -> float:
        return self.vsum_sum / self.T if self.T else 0.0

    @property
    def violation_count(self) -> int:
        return sum(self.violations.values())

    def summary(self) -> dict:
        return _jsonable({
            "provenance": {"config": self.config, "seed": self.seed},
            "slots": self.T,
            "avg_cost": self.avg_cost,
            "avg_cost_components": self.avg_components,
            "avg_total_queue": self.avg_queue,
            "avg_virtual_queue_sum": self.avg_virtual_queue,
            "max_queue": self.max_queue,
            "max_queue_slot": self.max_queue_slot,
            "max_shared_queue": self.max_shared,
            "max_virtual_queue_sum": self.max_vsum,
            "final_shared_queue": self.shared_final,
            "per_server": {
                "max_queue": self.max_Q,
                "final_queue": self.Q_final,
                "routed": self.routed,
                "served": self.served,
                "active_frames": self.active_frames,
                "idle_frames": np.bincount(self.frame_table()["server"], minlength=self.N),
            },
            "invariant_violations": self.violations,
            "invariant_violation_count": self.violation_count,
            "first_violation_slot": self.first_violation_slot,
            "saturated_slots": self.saturated_slots,
        })

    def write_summary(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def to_csv(self, path) -> None:
        cols = {c: self.sampled(c) for c in CSV_COLUMNS}
        with open(path, "w") as fh:
            fh.write("# config: " + json.dumps(_jsonable(self.config), sort_keys=True) + "\n")
            fh.write(f"# seed: {self.seed}\n")
            fh.write(",".join(CSV_COLUMNS) + "\n")
            for i in range(len(cols["slot"])):
                fh.write(",".join(repr(float(cols[c][i])) if cols[c].dtype.kind == "f" else str(int(cols[c][i]))
                                  for c in CSV_COLUMNS) + "\n")


def check_rate_stability(log: MetricsLog) -> np.ndarray:
    """Per-server ``(sum of routed - sum of offered service) / T``.

    Offered service counts every active slot's draw even when the queue was
    empty, so the residual is at most ``(Q_n(T) - Q_n(0)) / T``.
    """
    return (log.routed.astype(float) - log.served.astype(float)) / log.T
