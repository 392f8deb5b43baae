# coding: utf-8

# # Cost and queue against V on the five-server instance
#
# Larger `V` weights cost more heavily against queue length.  Every per-server
# queue stays below `V * c_max + R_max` at every slot, and the total average
# queue grows linearly in `V`.

# In[1]:

import argparse

import numpy as np

from dcprov import Simulator, check_rate_stability
from dcprov.experiments import sweep, five_server_config

p = argparse.ArgumentParser()
p.add_argument("--horizon", type=int, default=200_000)
args = p.parse_args()

# In[2]:

cfg = five_server_config(V=100)
runs, rows = sweep(cfg, [10, 50, 100, 250, 500, 1000], seeds=[0, 1], horizon=args.horizon)
print("     V   avg cost   avg queue   bound sum   max single queue")
for r in rows:
    maxq = max(x.max_queue for x in runs if x.V == r.V)
    print(f"{r.V:6g} {r.avg_cost:10.4f} {r.avg_queue:11.1f} {5 * (6 * r.V + 40):11g} {maxq:10d}")

# Least squares through the (V, queue) points:

# In[3]:

V = np.array([r.V for r in rows])
q = np.array([r.avg_queue for r in rows])
slope, icpt = np.polyfit(V, q, 1)
print(f"queue ~ {slope:.3f} V + {icpt:.1f}")

# ## Rate stability
#
# Routed minus offered service per server, averaged over the run, is at most
# the final queue over the horizon.

# In[4]:

log = Simulator(cfg, seed=0).run(args.horizon)
print("residuals:", np.round(check_rate_stability(log), 6))
print("Q_n(T)/T :", np.round(log.Q_final / log.T, 6))
print("violations:", log.violations)
