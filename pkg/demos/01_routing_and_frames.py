# coding: utf-8

# # Routing and frame decisions
#
# The two building blocks of the controller are pure functions: a per-slot
# router at the front end and a per-server frame decision.  This script
# pokes at both with hand-sized numbers.

# In[1]:

from dcprov import PolicyConstants, SleepMode, SetupDistribution, route
from dcprov.server_policy import activity_threshold, active_score, best_idle, decide_frame, idle_score

# ## Router
#
# A queue is eligible when it is at most `V * c`.  If any queue is eligible,
# up to `R_max` requests go to the shortest eligible one; the rest are
# rejected.  Otherwise every request is rejected.

# In[2]:

print(route(7, 2, [5, 30], V=10, R_max=40))
print(route(7, 2, [25, 30], V=10, R_max=40))
print(route(50, 6, [0, 0], V=100, R_max=40))
print(route(7, 2, [25, 30], V=10, R_max=40, no_rejection=True))

# ## Frame decision
#
# At the start of each frame an active server compares staying active for
# one slot against the best idle cycle.  Take the first server of the
# five-server fleet: uniform service on 2..6, active cost 4, setup cost 2,
# geometric setup with mean 5.893 slots.

# In[3]:

mode = SleepMode(idle_cost=0.0, setup_cost=2.0, setup=SetupDistribution.geometric_mean(5.893))
k = PolicyConstants(B0=0.5 * (40 + 6) * 6, V=100, e=4.0, mu_mean=4.0)
for Q in (0, 50, 100, 200):
    a, I, s = best_idle([mode], Q, k, I_max=1000)
    print(f"Q={Q:4d}  active {active_score(Q, k):9.2f}  best idle I={I:4d} {s:9.2f}  -> {decide_frame(Q, [mode], k, 1000)}")

# The idle score as a function of the idle length is convex, so only the two
# integers around its real minimiser (plus the ends of the range) need to be
# evaluated.

# In[4]:

for I in (1, 5, 10, 20, 40, 80):
    print(I, round(idle_score(mode, I, 0, k), 3))

# Since the active score falls faster in `Q` than the idle score, the
# decision is a threshold in the queue length.

# In[5]:

for V in (10, 100, 1000, 10_000):
    kv = PolicyConstants(k.B0, V, k.e, k.mu_mean)
    print(f"V={V:6d}  stays active once Q >= {activity_threshold([mode], kv, 1000)}")
