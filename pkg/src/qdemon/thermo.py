"""Thermodynamic ledger of one stationary feedback period.

Sign conventions: dn, dE and heat count what ENTERS a lead. Power is positive
when the demon pushes charge against the bias. The measurement switching work
is taken as zero for projective measurements.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import SecondLawViolation
from .feedback import FeedbackCycle, feedback_cycle
from .model import OUTCOMES, Outcome, SETConfig

SECOND_LAW_TOL = 1e-9


class NotDefinedType:
    """Sentinel for quantities that are undefined at a grid point (e.g. gain at P <= 0)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "NotDefined"

    def __bool__(self):
        return False

    def __reduce__(self):
        return (NotDefinedType, ())


NotDefined = NotDefinedType()


def is_defined(x) -> bool:
    return x is not NotDefined


def shannon_entropy(p) -> float:
    """-sum p ln p in units of k_B, with 0 ln 0 = 0."""
    p = np.clip(np.asarray(p, dtype=float), 0.0, 1.0)
    nz = p[p > 0]
    return float(-np.sum(nz * np.log(nz)))


@dataclass(frozen=True)
class BranchThermo:
    outcome: Outcome
    p: float
    dn: dict
    dE: dict
    heat: dict
    entropy_sys: float
    entropy_res: float

    @property
    def entropy_production(self) -> float:
        return self.entropy_sys + self.entropy_res


@dataclass(frozen=True)
class ThermoReport:
    tau: float
    bias: float
    power: float
    feedback_energy: float
    gain: object
    heat_L: float
    heat_R: float
    heat_total: float
    entropy_sys: float
    entropy_res: float
    information: float
    efficiency: object
    dn: dict
    dE: dict
    n_s: float
    phi2: float
    branch_data: dict = field(default_factory=dict)

    @property
    def current(self) -> float:
        return self.dn["R"] / self.tau


def gain_value(power_times_tau: float, feedback_energy: float):
    """P tau / dE_fb when both are positive, NotDefined otherwise."""
    if power_times_tau > 0 and feedback_energy > 0:
        return power_times_tau / feedback_energy
    return NotDefined


def heat_per_lead(dE: dict, dn: dict, config: SETConfig) -> dict:
    """dQ_alpha = dE_alpha - mu_alpha dn_alpha."""
    return {r.label: dE[r.label] - r.mu * dn[r.label] for r in config.reservoirs}


def reservoir_entropy(heat: dict, config: SETConfig) -> float:
    return sum(r.beta * heat[r.label] for r in config.reservoirs)


def report_from_cycle(cyc: FeedbackCycle, config: SETConfig, check: bool = True) -> ThermoReport:
    tau = cyc.tau
    m = cyc.moments
    V = config.bias
    power = -m.dn["R"] * V / tau + 0.0  # no signed zero at V = 0
    e_fb = m.dE["L"] + m.dE["R"]
    heat = heat_per_lead(m.dE, m.dn, config)

    branches = {}
    for nu in OUTCOMES:
        b = cyc.branches[nu]
        q = heat_per_lead(b.dE, b.dn, config)
        bt = BranchThermo(nu, b.p_branch, b.dn, b.dE, q,
                          shannon_entropy(cyc.final_states[nu]), reservoir_entropy(q, config))
        if check and bt.entropy_production < -SECOND_LAW_TOL:
            raise SecondLawViolation(
                f"branch {nu.value}: dS + dS_e = {bt.entropy_production:.3g} at tau = {tau}")
        branches[nu] = bt

    dS = sum(b.p * b.entropy_sys for b in branches.values())
    dSe = sum(b.p * b.entropy_res for b in branches.values())
    info = -dS
    eta = dSe / info if info != 0 else NotDefined
    return ThermoReport(
        tau=tau, bias=V, power=power, feedback_energy=e_fb,
        gain=gain_value(power * tau, e_fb),
        heat_L=heat["L"], heat_R=heat["R"], heat_total=heat["L"] + heat["R"],
        entropy_sys=dS, entropy_res=dSe, information=info, efficiency=eta,
        dn=dict(m.dn), dE=dict(m.dE),
        n_s=cyc.stationary.sigma.p_filled, phi2=cyc.stationary.relaxation_eigenvalue,
        branch_data=branches,
    )


def thermo_report(tau: float, config: SETConfig, solver: str = "dcg") -> ThermoReport:
    return report_from_cycle(feedback_cycle(float(tau), config, solver), config)


def electric_power(tau: float, config: SETConfig, solver: str = "dcg") -> float:
    """P = -dn_R V / tau with V = mu_L - mu_R; positive means power is generated."""
    m = feedback_cycle(float(tau), config, solver).moments
    return -m.dn["R"] * config.bias / tau + 0.0


def feedback_energy(tau: float, config: SETConfig, solver: str = "dcg") -> float:
    """Measurement-induced energy change per period, dE_L + dE_R in the steady state."""
    m = feedback_cycle(float(tau), config, solver).moments
    return m.dE["L"] + m.dE["R"]


def gain(tau: float, config: SETConfig, solver: str = "dcg"):
    return gain_value(electric_power(tau, config, solver) * tau,
                      feedback_energy(tau, config, solver))


def heat_flows(tau: float, config: SETConfig, solver: str = "dcg") -> tuple[float, float, float]:
    m = feedback_cycle(float(tau), config, solver).moments
    q = heat_per_lead(m.dE, m.dn, config)
    return q["L"], q["R"], q["L"] + q["R"]


@dataclass(frozen=True)
class EntropyBalance:
    entropy_sys: float
    entropy_res: float
    information: float
    efficiency: object
    branches: dict


def entropy_balance(tau: float, config: SETConfig, solver: str = "dcg") -> EntropyBalance:
    rep = thermo_report(tau, config, solver)
    return EntropyBalance(rep.entropy_sys, rep.entropy_res, rep.information, rep.efficiency,
                          rep.branch_data)


LANDAUER_BOUND = math.log(2.0)
