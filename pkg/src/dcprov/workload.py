"""Exogenous processes: arrivals, rejection costs, service amounts, setup times.

All randomness in the package flows through :func:`stream`, which derives an
independent generator for every ``(purpose, index, block)`` triple from one
master seed.  Streams are consumed in fixed-size blocks, so the values a
server sees do not depend on how a run is chunked or on how many other
servers exist.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, NamedTuple, Sequence

import numpy as np

BLOCK = 1 << 16

_PURPOSES = {"events": 0, "service": 1, "setup": 2, "trace": 3}


class TraceExhausted(IndexError):
    """Raised when a finite trace is asked for a slot past its end."""


def stream(seed: int, purpose: str, index: int = 0, block: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(_PURPOSES[purpose], int(index), int(block)))
    return np.random.Generator(np.random.PCG64(ss))


class SlotEvent(NamedTuple):
    lam: int
    cost: float


# ---------------------------------------------------------------------------
# Finite discrete laws (arrivals, costs, per-slot service)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FiniteDistribution:
    """A law with finite support, sampled by inverse CDF on uniforms.

    ``kind`` and ``params`` only record how the law was built, for
    serialisation; ``values`` and ``probs`` define it.
    """

    values: tuple
    probs: tuple
    kind: str = "categorical"
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if len(self.values) == 0 or len(self.values) != len(self.probs):
            raise ValueError("values and probs must be nonempty and of equal length")
        if any(p < 0 for p in self.probs):
            raise ValueError("probabilities must be nonnegative")
        if abs(math.fsum(self.probs) - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {math.fsum(self.probs)}, expected 1")

    @classmethod
    def uniform_integers(cls, lo: int, hi: int) -> FiniteDistribution:
        if hi < lo:
            raise ValueError(f"empty integer range [{lo}, {hi}]")
        n = hi - lo + 1
        return cls(tuple(range(lo, hi + 1)), (1.0 / n,) * n, "uniform", {"lo": lo, "hi": hi})

    @classmethod
    def zipf(cls, K: int, p: float) -> FiniteDistribution:
        w = [1.0 / i**p for i in range(1, K + 1)]
        z = math.fsum(w)
        return cls(tuple(range(1, K + 1)), tuple(x / z for x in w), "zipf", {"K": K, "p": p})

    @classmethod
    def deterministic(cls, value) -> FiniteDistribution:
        return cls((value,), (1.0,), "deterministic", {"value": value})

    @classmethod
    def categorical(cls, values: Sequence, probs: Sequence[float]) -> FiniteDistribution:
        return cls(tuple(values), tuple(float(p) for p in probs), "categorical",
                   {"values": list(values), "probs": list(probs)})

    @property
    def mean(self) -> float:
        if self.kind == "zipf":
            K, p = self.params["K"], self.params["p"]
            return math.fsum(i ** (1 - p) for i in range(1, K + 1)) / math.fsum(i**-p for i in range(1, K + 1))
        return math.fsum(v * p for v, p in zip(self.values, self.probs))

    @property
    def max_value(self):
        return max(self.values)

    @property
    def cdf(self) -> np.ndarray:
        c = np.cumsum(np.asarray(self.probs, dtype=float))
        c[-1] = 1.0
        return c

    def from_uniform(self, u):
        """Map uniforms in [0, 1) to support values."""
        idx = np.minimum(np.searchsorted(self.cdf, u, side="right"), len(self.values) - 1)
        return np.asarray(self.values)[idx]

    def sample(self, rng: np.random.Generator, size=None):
        if size is None:
            return self.from_uniform(rng.random()).item()
        return self.from_uniform(rng.random(size))

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params}


ServiceDistribution = FiniteDistribution


def distribution_from_dict(d: dict) -> FiniteDistribution:
    kind = d.get("kind")
    if kind == "uniform":
        return FiniteDistribution.uniform_integers(int(d["lo"]), int(d["hi"]))
    if kind == "zipf":
        return FiniteDistribution.zipf(int(d["K"]), float(d["p"]))
    if kind == "deterministic":
        return FiniteDistribution.deterministic(d["value"])
    if kind == "categorical":
        return FiniteDistribution.categorical(d["values"], d["probs"])
    raise ValueError(f"unknown distribution kind {kind!r}")


# ---------------------------------------------------------------------------
# Setup durations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SetupDistribution:
    """Setup duration in slots: ``geometric`` on {1, 2, ...} or ``deterministic``."""

    kind: str
    param: float

    def __post_init__(self):
        if self.kind == "geometric":
            if not 0.0 < self.param <= 1.0:
                raise ValueError(f"geometric success probability must be in (0, 1], got {self.param}")
        elif self.kind == "deterministic":
            if self.param < 1 or int(self.param) != self.param:
                raise ValueError(f"deterministic setup must be an integer >= 1, got {self.param}")
        else:
            raise ValueError(f"unknown setup kind {self.kind!r}")

    @classmethod
    def geometric(cls, success_prob: float) -> SetupDistribution:
        return cls("geometric", float(success_prob))

    @classmethod
    def geometric_mean(cls, mean: float) -> SetupDistribution:
        return cls("geometric", 1.0 / float(mean))

    @classmethod
    def fixed(cls, slots: int) -> SetupDistribution:
        return cls("deterministic", int(slots))

    @property
    def mean(self) -> float:
        return 1.0 / self.param if self.kind == "geometric" else float(self.param)

    @property
    def variance(self) -> float:
        if self.kind == "geometric":
            q = self.param
            return (1.0 - q) / (q * q)
        return 0.0

    @property
    def code(self) -> int:
        return 0 if self.kind == "geometric" else 1

    def from_uniform(self, u):
        """Inverse transform of uniforms in (0, 1]."""
        return setup_from_uniform(self.code, self.param, u)

    def sample(self, rng: np.random.Generator, size=None):
        u = 1.0 - rng.random(size)
        out = self.from_uniform(u)
        return int(out) if size is None else out

    def to_dict(self) -> dict:
        if self.kind == "geometric":
            return {"kind": "geometric", "success_prob": self.param}
        return {"kind": "deterministic", "slots": int(self.param)}


def setup_from_uniform(code: int, param: float, u):
    if code == 1:
        return np.full(np.shape(u), int(param), dtype=np.int64) if np.ndim(u) else int(param)
    if param >= 1.0:
        return np.ones(np.shape(u), dtype=np.int64) if np.ndim(u) else 1
    # P(tau > k) = (1 - q)^k
    k = np.floor(np.log(u) / np.log1p(-param)).astype(np.int64) + 1
    return k if np.ndim(u) else int(k)


def setup_from_dict(d: dict) -> SetupDistribution:
    kind = d.get("kind")
    if kind == "geometric":
        if "success_prob" in d:
            return SetupDistribution.geometric(d["success_prob"])
        return SetupDistribution.geometric_mean(d["mean"])
    if kind == "deterministic":
        return SetupDistribution.fixed(d["slots"])
    raise ValueError(f"unknown setup kind {kind!r}")


def sample_service(dist: FiniteDistribution, rng: np.random.Generator):
    return dist.sample(rng)


def sample_setup(dist: SetupDistribution, rng: np.random.Generator) -> int:
    return dist.sample(rng)


# ---------------------------------------------------------------------------
# Event sequences and trace sources
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EventBlock:
    """A run of consecutive slot events stored column-wise."""

    lam: np.ndarray
    cost: np.ndarray

    def __len__(self) -> int:
        return len(self.lam)

    def __getitem__(self, i: int) -> SlotEvent:
        return SlotEvent(int(self.lam[i]), float(self.cost[i]))

    def __iter__(self) -> Iterator[SlotEvent]:
        for i in range(len(self)):
            yield self[i]


class TraceSource:
    """Base class: random access to slot events by index."""

    def events(self, t0: int, n: int) -> EventBlock:
        raise NotImplementedError

    @property
    def cost_max(self) -> float:
        raise NotImplementedError

    @property
    def horizon(self) -> int | None:
        return None

    def to_dict(self) -> dict:
        raise NotImplementedError


class IidSynthetic(TraceSource):
    """i.i.d. (lambda, cost) pairs, independent marginals or a joint table."""

    def __init__(self, lam: FiniteDistribution, cost: FiniteDistribution | None = None,
                 seed: int = 0, joint: FiniteDistribution | None = None):
        if joint is None and cost is None:
            raise ValueError("need a cost law or a joint (lambda, cost) table")
        self.lam_dist = lam
        self.cost_dist = cost
        self.joint = joint
        self.seed = seed
        self._cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def law(self) -> list[tuple[tuple[int, float], float]]:
        """Joint pmf of (lambda, cost) as ``[((lam, c), prob), ...]``."""
        if self.joint is not None:
            return [((int(v[0]), float(v[1])), p) for v, p in zip(self.joint.values, self.joint.probs) if p > 0]
        return [((int(a), float(c)), pa * pc)
                for a, pa in zip(self.lam_dist.values, self.lam_dist.probs)
                for c, pc in zip(self.cost_dist.values, self.cost_dist.probs) if pa * pc > 0]

    @property
    def cost_max(self) -> float:
        if self.joint is not None:
            return max(float(v[1]) for v in self.joint.values)
        return float(self.cost_dist.max_value)

    def _block(self, b: int):
        if b not in self._cache:
            if len(self._cache) > 4:
                self._cache.clear()
            rng = stream(self.seed, "events", 0, b)
            if self.joint is not None:
                idx = np.minimum(np.searchsorted(self.joint.cdf, rng.random(BLOCK), side="right"),
                                 len(self.joint.values) - 1)
                table = np.asarray(self.joint.values, dtype=float)
                lam, cost = table[idx, 0].astype(np.int64), table[idx, 1]
            else:
                lam = self.lam_dist.from_uniform(rng.random(BLOCK)).astype(np.int64)
                cost = self.cost_dist.from_uniform(rng.random(BLOCK)).astype(float)
            self._cache[b] = (lam, cost)
        return self._cache[b]

    def events(self, t0: int, n: int) -> EventBlock:
        if t0 < 0:
            raise ValueError("slot index must be nonnegative")
        lam = np.empty(n, dtype=np.int64)
        cost = np.empty(n, dtype=float)
        i = 0
        while i < n:
            t = t0 + i
            b, off = divmod(t, BLOCK)
            bl, bc = self._block(b)
            k = min(n - i, BLOCK - off)
            lam[i:i + k] = bl[off:off + k]
            cost[i:i + k] = bc[off:off + k]
            i += k
        return EventBlock(lam, cost)

    def to_dict(self) -> dict:
        if self.joint is not None:
            return {"kind": "iid", "joint": {"values": [list(v) for v in self.joint.values],
                                             "probs": list(self.joint.probs)}}
        return {"kind": "iid", "lambda": self.lam_dist.to_dict(), "cost": self.cost_dist.to_dict()}


class ArrayTrace(TraceSource):
    """A finite, fully materialised trace."""

    def __init__(self, block: EventBlock):
        self.block = block

    @property
    def horizon(self) -> int:
        return len(self.block)

    @property
    def cost_max(self) -> float:
        return float(np.max(self.block.cost)) if len(self.block) else 0.0

    def events(self, t0: int, n: int) -> EventBlock:
        if t0 < 0:
            raise ValueError("slot index must be nonnegative")
        if t0 + n > len(self.block):
            raise TraceExhausted(f"trace has {len(self.block)} slots, asked for slots up to {t0 + n - 1}")
        return EventBlock(self.block.lam[t0:t0 + n], self.block.cost[t0:t0 + n])


class FileTrace(ArrayTrace):
    def __init__(self, path):
        self.path = str(path)
        super().__init__(read_trace_csv(path))

    def to_dict(self) -> dict:
        return {"kind": "file", "path": self.path}


class RampSynthetic(ArrayTrace):
    def __init__(self, steady_rate: float, peak_rate: float, horizon: int, cost: float = 1.0,
                 noise: str = "poisson", seed: int = 0):
        self.params = {"steady_rate": steady_rate, "peak_rate": peak_rate, "horizon": horizon,
                       "cost": cost, "noise": noise}
        super().__init__(generate_ramp_trace(steady_rate, peak_rate, horizon, stream(seed, "trace"),
                                             cost=cost, noise=noise))

    def to_dict(self) -> dict:
        return {"kind": "ramp", **self.params}


def next_event(source: TraceSource, t: int) -> SlotEvent:
    return source.events(t, 1)[0]


def generate_ramp_trace(steady_rate: float, peak_rate: float, horizon: int, rng: np.random.Generator,
                        cost: float = 1.0, noise: str = "poisson") -> EventBlock:
    """Steady first half, then a linear ramp reaching ``peak_rate`` at the last slot.

    ``noise="poisson"`` draws Poisson counts around the rate profile;
    ``noise="none"`` rounds the profile.
    """
    if not 0 <= steady_rate <= peak_rate:
        raise ValueError("need 0 <= steady_rate <= peak_rate")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    half = horizon // 2
    rate = np.full(horizon, float(steady_rate))
    n_ramp = horizon - half
    if n_ramp > 1:
        rate[half:] = steady_rate + (peak_rate - steady_rate) * np.arange(1, n_ramp + 1) / n_ramp
    elif n_ramp == 1 and horizon > 1:
        rate[-1] = peak_rate
    if noise == "poisson":
        lam = rng.poisson(rate).astype(np.int64)
    elif noise == "none":
        lam = np.rint(rate).astype(np.int64)
    else:
        raise ValueError(f"unknown noise model {noise!r}")
    return EventBlock(lam, np.full(horizon, float(cost)))


def read_trace_csv(path) -> EventBlock:
    """Read a ``slot,lambda,cost`` CSV; lines starting with ``#`` are skipped."""
    lam, cost = [], []
    with open(path, newline="") as fh:
        rows = csv.reader(line for line in fh if not line.startswith("#"))
        header = next(rows, None)
        if header is None or [h.strip() for h in header] != ["slot", "lambda", "cost"]:
            raise ValueError(f"{path}: expected header 'slot,lambda,cost', got {header}")
        for lineno, row in enumerate(rows, start=2):
            try:
                slot, a, c = int(row[0]), int(row[1]), float(row[2])
            except (ValueError, IndexError) as exc:
                raise ValueError(f"{path}: row {lineno}: cannot parse {row!r}") from exc
            if slot != len(lam):
                raise ValueError(f"{path}: row {lineno}: expected slot {len(lam)}, got {slot}")
            if a < 0 or c <= 0:
                raise ValueError(f"{path}: row {lineno}: need lambda >= 0 and cost > 0")
            lam.append(a)
            cost.append(c)
    return EventBlock(np.asarray(lam, dtype=np.int64), np.asarray(cost, dtype=float))


def write_trace_csv(path, block: EventBlock, header_lines: Sequence[str] = ()) -> None:
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["slot", "lambda", "cost"])
        for t in range(len(block)):
            w.writerow([t, int(block.lam[t]), repr(float(block.cost[t]))])


def source_from_dict(d: dict, seed: int = 0, base_dir: Path | None = None) -> TraceSource:
    kind = d.get("kind")
    if kind == "iid":
        if "joint" in d:
            j = d["joint"]
            joint = FiniteDistribution.categorical([tuple(v) for v in j["values"]], j["probs"])
            return IidSynthetic(FiniteDistribution.deterministic(0), seed=seed, joint=joint)
        return IidSynthetic(distribution_from_dict(d["lambda"]), distribution_from_dict(d["cost"]), seed=seed)
    if kind == "file":
        p = Path(d["path"])
        if base_dir is not None and not p.is_absolute():
            p = base_dir / p
        return FileTrace(p)
    if kind == "ramp":
        return RampSynthetic(float(d["steady_rate"]), float(d["peak_rate"]), int(d["horizon"]),
                             cost=float(d.get("cost", 1.0)), noise=d.get("noise", "poisson"), seed=seed)
    raise ValueError(f"unknown workload kind {kind!r}")
