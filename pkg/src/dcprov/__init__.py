"""Queue-driven server provisioning for data centers with sleep modes.

A front-end router admits or rejects requests and sends them to the
shortest queue; each server decides at every renewal of its active state
whether to stay on or sleep, and for how long.  The package simulates the
resulting system slot by slot, provides comparison policies, and computes
the best stationary randomized policy for i.i.d. workloads.
"""
from .baselines import BaselineSpec, apply_baseline, target_active
from .config import ConfigError, ServerSpec, SystemConfig, config_from_dict, load_config
from .engine import InvariantViolation, ServerState, Simulator, run, step
from .metrics import MetricsLog, SlotRecord, check_rate_stability
from .oracle import (PureFramePolicy, ServerRegion, StationaryResult, enumerate_server_region,
                     oracle_for_config, solve_stationary)
from .router import RoutingDecision, route
from .server_policy import (FrameDecision, PolicyConstants, SleepMode, active_score, activity_threshold,
                            b0_constant, best_idle, decide_frame, idle_score)
from .workload import (FiniteDistribution, FileTrace, IidSynthetic, RampSynthetic, ServiceDistribution,
                       SetupDistribution, SlotEvent, TraceExhausted, generate_ramp_trace, next_event,
                       sample_service, sample_setup)

__version__ = "0.1.0"
