# coding: utf-8

# # One shared queue driven by virtual queues
#
# In virtualized mode the per-server queues are counters only.  Requests sit
# in a single shared queue that every active server drains.  The shared queue
# never exceeds the sum of the virtual queues.

# In[1]:

import numpy as np

from dcprov import Simulator
from dcprov.experiments import five_server_config

cfg = five_server_config(V=100, mode="virtualized")
log = Simulator(cfg, seed=0, keep_full=True).run(100_000)
shared, vsum = log.series("shared"), log.series("vsum")
print("max shared", shared.max(), " max virtual sum", vsum.max(), " bound", 5 * (100 * 6 + 40))
print("shared <= virtual sum everywhere:", bool(np.all(shared <= vsum)))
print("mean slack", float((vsum - shared).mean()))
print("average cost", round(log.avg_cost, 4), "components", {k: round(v, 4) for k, v in log.avg_components.items()})
