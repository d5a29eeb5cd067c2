"""Measuring the dot too often freezes it.

The time-averaged current I_m = dn_R / tau vanishes linearly as the feedback period
shrinks, while a Born-Markov-secular treatment of the same protocol keeps a finite
current all the way down. The short-period analytic expansion tracks the full result.
"""
import numpy as np

from qdemon import feedback_config, time_averaged_current, zeno_moments

print(f"{'tau':>9} {'delta':>6} {'I_m (DCG)':>12} {'I_m (Zeno)':>12} {'I_m (BMS)':>12}")
for delta in (-1.0, 0.0, 1.0):
    cfg = feedback_config(delta)
    for tau in np.geomspace(1e-3, 1e-1, 5):
        dcg = time_averaged_current(tau, cfg)
        zeno = zeno_moments(tau, cfg).dn["R"] / tau
        bms = time_averaged_current(tau, cfg, "bms")
        print(f"{tau:9.2e} {delta:+6.1f} {dcg:12.4e} {zeno:12.4e} {bms:12.4e}")
