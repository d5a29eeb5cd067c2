"""The measurements can extract energy from the system as well as deposit it.

In part of the operating plane dE_fb < 0: the measurement removes energy on average while
the demon still generates power. The gain P tau / dE_fb is then undefined.
The sign at short periods is set by delta_tilde, an integral over the two bath spectra.
"""
import numpy as np

from qdemon import delta_tilde, feedback_config, thermo_report, zeno_feedback_energy

base = feedback_config(1.0)
print(f"delta_tilde = {delta_tilde(base):+.4f}")
print(f"short-period dE_fb at tau = 1e-2: {zeno_feedback_energy(1e-2, base):+.4e}")
for V in (-15.0, -10.0, -5.0):
    for tau in (0.3, 0.7, 1.5):
        rep = thermo_report(tau, base.with_bias(V))
        print(f"V = {V:+5.1f} tau = {tau:4.2f}  P = {rep.power:+.4f}  "
              f"dE_fb = {rep.feedback_energy:+.4e}  G = {rep.gain!r}")
