"""Power, feedback energy and efficiency over the bias/period plane.

Runs a coarse version of the grid the CLI produces and reports where the demon generates
the most power and how efficiently it converts information into work.
"""
import numpy as np

from qdemon import NotDefined, feedback_config, thermo_report

base = feedback_config(1.0)
Vs = np.linspace(-20, 20, 21)
taus = np.geomspace(0.05, 3.0, 21)
best = None
for tau in taus:
    for V in Vs:
        rep = thermo_report(tau, base.with_bias(float(V)))
        if best is None or rep.power > best[0]:
            best = (rep.power, V, tau, rep)
P, V, tau, rep = best
print(f"max power {P:.4f} at V = {V:+.1f}, tau = {tau:.3f}")
print(f"  feedback energy per period {rep.feedback_energy:+.4e}")
print(f"  gain {rep.gain!r}")
eta = rep.efficiency
print(f"  efficiency {eta if eta is NotDefined else f'{eta:.4f}'}")
print(f"  dot entropy change per period {rep.entropy_sys:.4f} (at most ln 2 = {np.log(2):.4f})")
