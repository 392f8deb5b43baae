# coding: utf-8

# # Distance to the best stationary policy
#
# On a two-server i.i.d. instance the best frame-based randomized policy is a
# small linear program.  Its cost lower-bounds every rate-stable policy, and
# the controller's cost approaches it as `V` grows.

# In[1]:

import argparse

from dcprov import oracle_for_config
from dcprov.experiments import small_config, sweep

p = argparse.ArgumentParser()
p.add_argument("--horizon", type=int, default=200_000)
args = p.parse_args()

# In[2]:

cfg = small_config()
res = oracle_for_config(cfg)
print(f"optimal cost {res.total_cost_star:.4f}, of which rejection {res.C_star:.4f}")
for n, s in enumerate(res.per_server):
    print(f"server {n}: rate {s['mu_bar']:.3f} cost {s['cost']:.3f} Psi {s['Psi']:.2f} frames {s['frame_policies']}")
print(f"gap constant (sum Psi + B3) = {res.gap_constant:.1f}")

# In[3]:

runs, rows = sweep(cfg, [1, 5, 25, 125, 625], seeds=[0, 1, 2], horizon=args.horizon)
print("    V     cost      gap    V*gap   avg queue")
for r in rows:
    gap = r.avg_cost - res.total_cost_star
    print(f"{r.V:5g} {r.avg_cost:8.4f} {gap:8.4f} {r.V * gap:8.1f} {r.avg_queue:10.1f}")

# Small `V` keeps both servers on: sleeping only pays once the queue credit
# `V * e` outweighs the setup and variance penalties.
