"""Slotted simulation of the data center.

Within slot ``t`` the order is fixed:

1. servers at a frame boundary decide (or a baseline issues on/off commands);
2. the router splits ``lam(t)`` using start-of-slot queues;
3. active servers draw their service amount;
4. queues update, ``Q_n <- max(Q_n + R_n - mu_n*H_n, 0)``, and in
   virtualized mode the shared queue
   ``Q <- max(Q + lam - d - sum_n mu_n*H_n, 0)``;
5. costs accrue: ``e_n`` per active slot, the mode's idle cost per idle
   slot, its setup cost per setup slot, ``c(t)`` per rejected request.

A frame begins on the slot after an active slot.  An idle frame is
``I`` idle slots, ``tau`` setup slots and one active slot.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .baselines import _apply_arrays, _target_params
from .config import SystemConfig
from .metrics import STREAMS, MetricsLog, SlotRecord
from .router import _route_into
from .server_policy import _decide_params
from .workload import EventBlock, SlotEvent, TraceSource, stream

ACTIVE, IDLE, SETUP = 0, 1, 2
PHASE_NAMES = {ACTIVE: "Active", IDLE: "Idling", SETUP: "InSetup"}

SERVICE_POOL = 4096
SETUP_POOL = 1024
FRAME_BUF = 1 << 16
CHUNK = 1 << 16

# counters
C_QBOUND, C_SHARED, C_FRAME, C_FIRST, C_SATURATED = range(5)


@njit(cache=True)
def _setup_len(code, param, u):
    if code == 1:
        return int(param)
    if param >= 1.0:
        return 1
    return int(math.floor(math.log(u) / math.log1p(-param))) + 1


@njit(cache=True)
def _kernel(t0, n_slots, lam, cost,
            V, R_max, I_max, B0, virtualized, no_rejection, e, mu_mean, always_on, q_bound,
            g, W, m, var, n_modes, setup_code, setup_param, svc_values, svc_cdf, svc_len,
            bl_code, bl_k, bl_extra, bl_mu, hist, hist_state,
            phase, remaining, Q, shared, frame_start, frame_index, frame_mode, frame_I, frame_tau, idle_count,
            svc_pool, svc_ptr, setup_pool, setup_ptr,
            sum_R, sum_served, max_Q, active_frames,
            fr_srv, fr_len, fr_end, fr_idle, fr_tau, fr_mode, fr_count, counters,
            o_rej, o_setup, o_active, o_idle, o_queue, o_shared, o_vsum, o_nact, o_d, o_lam, o_R, o_mu,
            R_buf, taus, woken):
    N = phase.shape[0]
    P_svc = svc_pool.shape[1]
    P_setup = setup_pool.shape[1]
    FB = fr_srv.shape[0]
    for s in range(n_slots):
        t = t0 + s
        for n in range(N):
            if svc_ptr[n] >= P_svc or setup_ptr[n] >= P_setup:
                return s
        if fr_count[0] > FB - N:
            return s
        lt = lam[s]
        ct = cost[s]

        # (1) control decisions
        if bl_code > 0:
            w = hist.shape[0]
            pos = hist_state[0]
            if hist_state[1] == w:
                hist_state[2] -= hist[pos]
            else:
                hist_state[1] += 1
            hist[pos] = lt
            hist_state[2] += lt
            hist_state[0] = (pos + 1) % w
            k_react = _target_params(bl_code, bl_k, bl_extra, bl_mu, hist_state[2], hist_state[1])
            if k_react > N:
                counters[C_SATURATED] += 1
            for n in range(N):
                taus[n] = 1
                if n_modes[n] > 0:
                    taus[n] = _setup_len(setup_code[n, 0], setup_param[n, 0], setup_pool[n, setup_ptr[n]])
            _apply_arrays(k_react, t, phase, remaining, frame_start, frame_mode, frame_I, frame_tau,
                          idle_count, n_modes, always_on, taus, woken)
            for n in range(N):
                if woken[n]:
                    setup_ptr[n] += 1
        else:
            for n in range(N):
                if phase[n] == ACTIVE and frame_start[n] == t and not always_on[n] and n_modes[n] > 0:
                    a, I = _decide_params(g[n], W[n], m[n], var[n], n_modes[n], Q[n], V, e[n], mu_mean[n],
                                          B0, I_max)
                    if a >= 0:
                        tau = _setup_len(setup_code[n, a], setup_param[n, a], setup_pool[n, setup_ptr[n]])
                        setup_ptr[n] += 1
                        phase[n] = IDLE
                        remaining[n] = I
                        frame_mode[n] = a
                        frame_I[n] = I
                        frame_tau[n] = tau
                        idle_count[n] = 0

        # (2) routing
        d = _route_into(lt, ct, Q, V, R_max, no_rejection, R_buf)

        # (3)-(5) service, queues, costs
        c_act = 0.0
        c_idle = 0.0
        c_setup = 0.0
        nact = 0
        served = 0
        for n in range(N):
            q = Q[n] + R_buf[n]
            mu = 0
            if phase[n] == ACTIVE:
                u = svc_pool[n, svc_ptr[n]]
                svc_ptr[n] += 1
                k = 0
                L = svc_len[n]
                while k < L - 1 and u >= svc_cdf[n, k]:
                    k += 1
                mu = svc_values[n, k]
                q -= mu
                served += mu
                sum_served[n] += mu
                nact += 1
                c_act += e[n]
            elif phase[n] == IDLE:
                c_idle += g[n, frame_mode[n]]
            else:
                c_setup += W[n, frame_mode[n]]
            if q < 0:
                q = 0
            Q[n] = q
            sum_R[n] += R_buf[n]
            o_R[s, n] = R_buf[n]
            o_mu[s, n] = mu
        if virtualized:
            sq = shared[0] + lt - d - served
            shared[0] = sq if sq > 0 else 0

        # advance phase machines to slot t+1
        for n in range(N):
            ph = phase[n]
            if ph == ACTIVE:
                L = t + 1 - frame_start[n]
                if frame_I[n] == 0:
                    active_frames[n] += 1
                    if L != 1:
                        counters[C_FRAME] += 1
                        if counters[C_FIRST] < 0:
                            counters[C_FIRST] = t
                else:
                    c = fr_count[0]
                    fr_srv[c] = n
                    fr_len[c] = L
                    fr_end[c] = t
                    fr_idle[c] = idle_count[n]
                    fr_tau[c] = frame_tau[n]
                    fr_mode[c] = frame_mode[n]
                    fr_count[0] = c + 1
                    bad = L != idle_count[n] + frame_tau[n] + 1
                    if frame_I[n] > 0 and idle_count[n] != frame_I[n]:
                        bad = True
                    if bad:
                        counters[C_FRAME] += 1
                        if counters[C_FIRST] < 0:
                            counters[C_FIRST] = t
                frame_start[n] = t + 1
                frame_index[n] += 1
                frame_I[n] = 0
                frame_tau[n] = 0
                idle_count[n] = 0
            elif ph == IDLE:
                idle_count[n] += 1
                if remaining[n] > 0:
                    remaining[n] -= 1
                    if remaining[n] == 0:
                        phase[n] = SETUP
                        remaining[n] = frame_tau[n]
            else:
                remaining[n] -= 1
                if remaining[n] == 0:
                    phase[n] = ACTIVE

        # invariants on end-of-slot queues
        vsum = 0
        for n in range(N):
            q = Q[n]
            vsum += q
            if q > max_Q[n]:
                max_Q[n] = q
            if q_bound[n] >= 0 and q > q_bound[n]:
                counters[C_QBOUND] += 1
                if counters[C_FIRST] < 0:
                    counters[C_FIRST] = t
        if virtualized and shared[0] > vsum:
            counters[C_SHARED] += 1
            if counters[C_FIRST] < 0:
                counters[C_FIRST] = t

        o_rej[s] = d * ct
        o_setup[s] = c_setup
        o_active[s] = c_act
        o_idle[s] = c_idle
        o_queue[s] = shared[0] if virtualized else vsum
        o_shared[s] = shared[0]
        o_vsum[s] = vsum
        o_nact[s] = nact
        o_d[s] = d
        o_lam[s] = lt
    return n_slots


class InvariantViolation(AssertionError):
    pass


@dataclass(frozen=True)
class ServerState:
    phase: str
    mode: int | None
    remaining: int
    Q: int
    frame_start: int
    frame_index: int

    @property
    def H(self) -> int:
        return int(self.phase == "Active")


class Simulator:
    """Mutable system state plus the per-slot kernel.

    ``step`` advances one slot; ``run`` advances many through the same
    kernel in chunks.  Both consume identical random streams, so any mix of
    the two yields the same trajectory for a given ``(config, seed)``.
    """

    def __init__(self, config: SystemConfig, seed: int | None = None, source: TraceSource | None = None,
                 keep_full: bool = False, downsample: int | None = None, strict: bool = False,
                 record_slots: bool = False):
        self.config = config
        self.seed = config.seed if seed is None else int(seed)
        self.source = source if source is not None else config.source(self.seed)
        self.strict = strict
        self.record_slots = record_slots
        N = self.N = config.N
        servers = config.servers
        L = max(1, max(len(s.modes) for s in servers))
        K = max(len(s.service.values) for s in servers)

        self.V = float(config.V)
        self.B0 = float(config.b0)
        self.e = np.array([s.e for s in servers], dtype=float)
        self.mu_mean = np.array([s.service.mean for s in servers], dtype=float)
        self.always_on = np.zeros(N, dtype=np.bool_)
        self.always_on[:config.always_on_count] = True
        self.n_modes = np.array([len(s.modes) for s in servers], dtype=np.int64)
        self.g = np.zeros((N, L))
        self.W = np.zeros((N, L))
        self.m = np.zeros((N, L))
        self.var = np.zeros((N, L))
        self.setup_code = np.zeros((N, L), dtype=np.int64)
        self.setup_param = np.ones((N, L))
        for i, s in enumerate(servers):
            for a, md in enumerate(s.modes):
                self.g[i, a], self.W[i, a] = md.idle_cost, md.setup_cost
                self.m[i, a], self.var[i, a] = md.setup.mean, md.setup.variance
                self.setup_code[i, a], self.setup_param[i, a] = md.setup.code, md.setup.param
        self.svc_values = np.zeros((N, K), dtype=np.int64)
        self.svc_cdf = np.ones((N, K))
        self.svc_len = np.array([len(s.service.values) for s in servers], dtype=np.int64)
        for i, s in enumerate(servers):
            k = len(s.service.values)
            if any(int(v) != v for v in s.service.values):
                raise ValueError(f"server {i}: service amounts must be integers")
            self.svc_values[i, :k] = s.service.values
            self.svc_cdf[i, :k] = s.service.cdf

        pol = config.policy
        self.bl_code = 0 if pol is None else pol.code
        self.bl_k = 0 if pol is None else pol.k
        self.bl_extra = 0.0 if pol is None else float(pol.extra)
        if pol is not None and pol.mean_rate is not None:
            self.bl_mu = float(pol.mean_rate)
        else:
            self.bl_mu = float(self.mu_mean.mean())
        self.hist = np.zeros(1 if pol is None else pol.window, dtype=np.int64)
        self.hist_state = np.zeros(3, dtype=np.int64)

        q0 = int(config.initial_virtual_backlog)
        # baselines admit every request
        self.no_rejection = bool(config.no_rejection or pol is not None)
        if self.no_rejection:
            self.q_bound = np.full(N, -1.0)
        else:
            self.q_bound = np.full(N, max(float(q0), self.V * self.source.cost_max + config.R_max))

        # state; every server is active on slot -1, so slot 0 starts a frame
        self.t = 0
        self.phase = np.zeros(N, dtype=np.int64)
        self.remaining = np.zeros(N, dtype=np.int64)
        self.Q = np.full(N, q0, dtype=np.int64)
        self.shared = np.zeros(1, dtype=np.int64)
        self.frame_start = np.zeros(N, dtype=np.int64)
        self.frame_index = np.zeros(N, dtype=np.int64)
        self.frame_mode = np.zeros(N, dtype=np.int64)
        self.frame_I = np.zeros(N, dtype=np.int64)
        self.frame_tau = np.zeros(N, dtype=np.int64)
        self.idle_count = np.zeros(N, dtype=np.int64)

        self.svc_pool = np.zeros((N, SERVICE_POOL))
        self.svc_ptr = np.full(N, SERVICE_POOL, dtype=np.int64)
        self.svc_block = np.zeros(N, dtype=np.int64)
        self.setup_pool = np.ones((N, SETUP_POOL))
        self.setup_ptr = np.full(N, SETUP_POOL, dtype=np.int64)
        self.setup_block = np.zeros(N, dtype=np.int64)

        self.sum_R = np.zeros(N, dtype=np.int64)
        self.sum_served = np.zeros(N, dtype=np.int64)
        self.max_Q = self.Q.copy()
        self.active_frames = np.zeros(N, dtype=np.int64)
        self.frame_buf = {k: np.zeros(FRAME_BUF, dtype=np.int64) for k in ("server", "length", "end", "idle", "setup", "mode")}
        self.fr_count = np.zeros(1, dtype=np.int64)
        self.counters = np.zeros(5, dtype=np.int64)
        self.counters[C_FIRST] = -1

        self.R_buf = np.zeros(N, dtype=np.int64)
        self.taus = np.zeros(N, dtype=np.int64)
        self.woken = np.zeros(N, dtype=np.bool_)
        self._out_size = 0
        self._alloc_out(1)

        if downsample is None:
            downsample = config.downsample or (100 if config.horizon >= 100_000 else 1)
        self.log = MetricsLog(N=N, config=config.to_dict(), seed=self.seed, downsample=int(downsample),
                              keep_full=keep_full, virtualized=config.virtualized)
        self.log.Q_initial = self.Q.copy()

    # -- random pools ------------------------------------------------------------------

    def _refill(self) -> None:
        for n in range(self.N):
            if self.svc_ptr[n] >= SERVICE_POOL:
                self.svc_pool[n] = stream(self.seed, "service", n, int(self.svc_block[n])).random(SERVICE_POOL)
                self.svc_block[n] += 1
                self.svc_ptr[n] = 0
            if self.setup_ptr[n] >= SETUP_POOL:
                self.setup_pool[n] = 1.0 - stream(self.seed, "setup", n, int(self.setup_block[n])).random(SETUP_POOL)
                self.setup_block[n] += 1
                self.setup_ptr[n] = 0

    def peek_setup(self, n: int, mode: int) -> int:
        self._refill()
        return _setup_len(self.setup_code[n, mode], self.setup_param[n, mode], self.setup_pool[n, self.setup_ptr[n]])

    def consume_setup(self, n: int) -> None:
        self.setup_ptr[n] += 1

    def _alloc_out(self, n: int) -> None:
        if n <= self._out_size:
            return
        self._out = {k: np.zeros(n, dtype=float if k in ("rejection", "setup", "active", "idle") else np.int64)
                     for k in STREAMS}
        self._out_R = np.zeros((n, self.N), dtype=np.int64)
        self._out_mu = np.zeros((n, self.N), dtype=np.int64)
        self._out_size = n

    def _flush_frames(self) -> None:
        c = int(self.fr_count[0])
        if c:
            self.log.add_frames(self.frame_buf, c)
            self.fr_count[0] = 0

    # -- advancing ---------------------------------------------------------------------

    def _advance(self, block: EventBlock) -> int:
        """Run the kernel over ``block``; return the number of slots processed."""
        n = len(block)
        o = self._out
        fb = self.frame_buf
        done = 0
        while done < n:
            self._refill()
            if self.fr_count[0] > FRAME_BUF - self.N:
                self._flush_frames()
            k = _kernel(
                self.t, n - done, block.lam[done:], block.cost[done:],
                self.V, self.config.R_max, self.config.I_max, self.B0, self.config.virtualized,
                self.no_rejection, self.e, self.mu_mean, self.always_on, self.q_bound,
                self.g, self.W, self.m, self.var, self.n_modes, self.setup_code, self.setup_param,
                self.svc_values, self.svc_cdf, self.svc_len,
                self.bl_code, self.bl_k, self.bl_extra, self.bl_mu, self.hist, self.hist_state,
                self.phase, self.remaining, self.Q, self.shared, self.frame_start, self.frame_index,
                self.frame_mode, self.frame_I, self.frame_tau, self.idle_count,
                self.svc_pool, self.svc_ptr, self.setup_pool, self.setup_ptr,
                self.sum_R, self.sum_served, self.max_Q, self.active_frames,
                fb["server"], fb["length"], fb["end"], fb["idle"], fb["setup"], fb["mode"],
                self.fr_count, self.counters,
                o["rejection"][done:], o["setup"][done:], o["active"][done:], o["idle"][done:],
                o["queue"][done:], o["shared"][done:], o["vsum"][done:], o["n_active"][done:],
                o["rejected"][done:], o["arrivals"][done:], self._out_R[done:], self._out_mu[done:],
                self.R_buf, self.taus, self.woken)
            self.t += k
            done += k
        self.log.extend(o, n)
        return n

    def _check(self) -> None:
        if self.strict and self.counters[C_QBOUND] + self.counters[C_SHARED] + self.counters[C_FRAME]:
            raise InvariantViolation(f"invariant violated at slot {int(self.counters[C_FIRST])}: "
                                     f"{self._violations()}")

    def _violations(self) -> dict:
        return {"queue_bound": int(self.counters[C_QBOUND]), "shared_domination": int(self.counters[C_SHARED]),
                "frame_length": int(self.counters[C_FRAME])}

    def step(self, event: SlotEvent | None = None) -> SlotRecord:
        """Advance one slot, drawing the event from the source unless one is given."""
        if event is None:
            block = self.source.events(self.t, 1)
        else:
            block = EventBlock(np.array([int(event.lam)], dtype=np.int64), np.array([float(event.cost)]))
        t = self.t
        self._advance(block)
        self._check()
        o = self._out
        return SlotRecord(
            slot=t, arrivals=int(o["arrivals"][0]), rejected=int(o["rejected"][0]),
            routed=tuple(int(x) for x in self._out_R[0]), served=tuple(int(x) for x in self._out_mu[0]),
            costs={c: float(o[c][0]) for c in ("rejection", "setup", "active", "idle")},
            queues=tuple(int(x) for x in self.Q), shared_queue=int(self.shared[0]),
            active_servers=int(o["n_active"][0]))

    def run(self, horizon: int | None = None) -> MetricsLog:
        """Advance until slot ``horizon`` (default: the config horizon) and return the log."""
        horizon = self.config.horizon if horizon is None else int(horizon)
        if horizon < self.t:
            raise ValueError(f"already at slot {self.t}, cannot run to {horizon}")
        self._alloc_out(min(CHUNK, max(1, horizon - self.t)))
        while self.t < horizon:
            n = min(self._out_size, horizon - self.t)
            self._advance(self.source.events(self.t, n))
            self._check()
        return self.finalize()

    def finalize(self) -> MetricsLog:
        self._flush_frames()
        log = self.log
        log.routed = self.sum_R.copy()
        log.served = self.sum_served.copy()
        log.max_Q = self.max_Q.copy()
        log.Q_final = self.Q.copy()
        log.active_frames = self.active_frames.copy()
        log.violations = self._violations()
        log.first_violation_slot = int(self.counters[C_FIRST])
        log.saturated_slots = int(self.counters[C_SATURATED])
        log.shared_final = int(self.shared[0])
        return log

    # -- inspection --------------------------------------------------------------------

    def server_state(self, n: int) -> ServerState:
        ph = int(self.phase[n])
        return ServerState(PHASE_NAMES[ph], None if ph == ACTIVE else int(self.frame_mode[n]),
                           int(self.remaining[n]), int(self.Q[n]), int(self.frame_start[n]),
                           int(self.frame_index[n]))

    @property
    def servers(self) -> list[ServerState]:
        return [self.server_state(n) for n in range(self.N)]

    @property
    def shared_queue(self) -> int:
        return int(self.shared[0])

    def set_server(self, n: int, phase: str, mode: int = 0, remaining: int = 0, Q: int | None = None,
                   idle_slots: int | None = None, setup_slots: int | None = None) -> None:
        """Force server ``n`` into a phase, e.g. for tests or warm starts.

        For ``Idling`` the setup that follows lasts ``setup_slots`` (drawn if
        omitted).  The frame is treated as having started now.
        """
        code = {v: k for k, v in PHASE_NAMES.items()}[phase]
        self.phase[n] = code
        self.frame_start[n] = self.t
        if Q is not None:
            self.Q[n] = Q
        if code == ACTIVE:
            self.frame_I[n] = 0
            self.remaining[n] = 0
            return
        self.frame_mode[n] = mode
        self.idle_count[n] = 0
        if code == IDLE:
            if setup_slots is None:
                setup_slots = self.peek_setup(n, mode)
                self.consume_setup(n)
            self.remaining[n] = remaining
            self.frame_I[n] = remaining if idle_slots is None else idle_slots
            self.frame_tau[n] = setup_slots
        else:
            self.remaining[n] = remaining
            self.frame_I[n] = -1
            self.frame_tau[n] = remaining if setup_slots is None else setup_slots


def run(config: SystemConfig, horizon: int | None = None, seed: int | None = None, **kwargs) -> MetricsLog:
    return Simulator(config, seed=seed, **kwargs).run(horizon)


def step(sim: Simulator, event: SlotEvent | None = None) -> SlotRecord:
    return sim.step(event)
