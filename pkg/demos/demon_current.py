"""Feedback drives charge uphill against the bias.

With delta = 1 the protocol opens the left barrier while the dot is empty and the right
barrier once it is filled, so for moderate periods electrons flow into the right lead
even though mu_R > mu_L. Without feedback (delta = 0) the current follows the bias.
"""
import numpy as np

from qdemon import electric_power, find_zero_current, feedback_config, time_averaged_current

taus = np.geomspace(1e-2, 1e2, 25)
for delta in (0.0, 1.0):
    cfg = feedback_config(delta)
    cur = np.array([time_averaged_current(t, cfg) for t in taus])
    print(f"delta = {delta:+.0f}: max I_m = {cur.max():+.4f} at tau = {taus[cur.argmax()]:.3g}")

demon = feedback_config(1.0)
cur = np.array([time_averaged_current(t, demon) for t in taus])
k = np.flatnonzero((cur[:-1] > 0) & (cur[1:] <= 0))[0]
tau0 = find_zero_current(demon, taus[k], taus[k + 1])
print(f"current reverses at tau0 = {tau0:.5f}")
print(f"electric power at tau = 1: {electric_power(1.0, demon):+.5f}")
