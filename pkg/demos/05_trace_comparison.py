# coding: utf-8

# # Steady then ramping traffic, with slow setups
#
# A fleet of 106 identical servers faces a synthetic trace: a steady phase near
# 65 requests per slot, then a linear ramp to 212.  Setups last 1000 slots on
# average and no request may be rejected.  We compare the controller with the
# baselines on power and on the real (shared) queue during the ramp.

# In[1]:

import argparse

from dcprov import BaselineSpec, PolicyConstants, Simulator
from dcprov.experiments import trace_config
from dcprov.server_policy import activity_threshold

p = argparse.ArgumentParser()
p.add_argument("--V", type=float, default=1e6)
args = p.parse_args()

# Start each virtual queue at the activity threshold, so servers neither all
# sleep nor all stay on at slot 0.

# In[2]:

cfg = trace_config(V=args.V)
s = cfg.servers[0]
backlog = activity_threshold(s.modes, PolicyConstants(cfg.b0, cfg.V, s.e, s.service.mean), cfg.I_max) or 0
cfg = cfg.with_(initial_virtual_backlog=backlog)
print(f"V={cfg.V:g}  B0={cfg.b0:g}  initial backlog {backlog}")

# In[3]:

policies = {"proposed": None, "always_on(106)": BaselineSpec.always_on(106),
            "reactive(10)": BaselineSpec.reactive(10), "reactive_extra(10, 20)": BaselineSpec.reactive_extra(10, 20)}
half = cfg.horizon // 2
print(f"{'policy':24s} {'power':>8s} {'max queue on ramp':>18s} {'final queue':>12s}")
for name, pol in policies.items():
    log = Simulator(cfg.with_(policy=pol), keep_full=True).run()
    q = log.series("shared")
    print(f"{name:24s} {log.avg_cost:8.1f} {int(q[half:].max()):18d} {int(q[-1]):12d}")

# With the default constant in the quadratic term, servers only choose to
# sleep at very large `V`, and the virtual queues then take a long time to
# respond when the ramp starts.
