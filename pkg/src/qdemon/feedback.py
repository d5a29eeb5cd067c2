"""Piecewise-constant feedback: one-period propagator, stroboscopic steady state and FCS moments.

Moments are the first derivatives of the moment generating function
M(tau, xi) = (1, 1) F^tau(xi) sigma_s. They are extracted by fourth-order
central differences of M - 1 and cross-checked against the analytic
derivative of the matrix exponential.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import expm_frechet
from scipy.optimize import bisect

from .errors import ConservationViolation, DegenerateFixedPoint, MomentToleranceFailure
from .kernel import (
    ZERO,
    CountingFields,
    RateTable,
    assemble_liouvillian,
    bms_table,
    expm2,
    expm2_minus_identity,
    outcome_rates,
)
from .model import OUTCOMES, E, F, OccupationVector, Outcome, SETConfig

CHI_STEP = 1e-4
ZETA_STEP = 1e-4
FD_STENCIL = ((2, -1 / 12), (1, 8 / 12), (-1, -8 / 12), (-2, 1 / 12))
MOMENT_RTOL = 1e-5
FIXED_POINT_GAP = 1e-10
SOLVERS = ("dcg", "bms")


def measurement_projectors() -> tuple[np.ndarray, np.ndarray]:
    """Projectors onto the empty and filled dot acting on sigma = (rho_00, rho_11)."""
    return np.diag([1.0, 0.0]), np.diag([0.0, 1.0])


@dataclass(frozen=True)
class FeedbackPropagator:
    matrix: np.ndarray
    tau: float
    xi: CountingFields = ZERO


@dataclass(frozen=True)
class StationaryState:
    sigma: OccupationVector
    relaxation_eigenvalue: float
    tau: float


@dataclass(frozen=True)
class FCSMoments:
    """Particles ``dn`` and energy ``dE`` entering each lead during one period."""

    dn: dict
    dE: dict
    branch: Outcome | None = None
    p_branch: float = 1.0


def _fd_zetas(h=ZETA_STEP):
    return (0.0,) + tuple(s * h for s, _ in FD_STENCIL)


def _tables(tau, config: SETConfig, outcome: Outcome, solver: str, zetas):
    out = []
    for res in config.reservoirs:
        if solver == "dcg":
            tab = outcome_rates(tau, res, outcome, config.feedback, config.dot, zetas,
                                config.quad_tol, config.max_intervals)
        elif solver == "bms":
            tab = bms_table(res, outcome, config.feedback, config.dot, zetas)
        else:
            raise ValueError(f"unknown solver {solver!r}")
        out.append((res.label, tab))
    return out


def _zetas_for(xi: CountingFields):
    return tuple(sorted({0.0, float(xi.zeta_L), float(xi.zeta_R)}))


def conditioned_generator(tau, config: SETConfig, outcome: Outcome, xi=ZERO, solver="dcg"):
    """Sum over leads of the outcome-conditioned generator (kernel time tau for DCG)."""
    return assemble_liouvillian(_tables(tau, config, outcome, solver, _zetas_for(xi)), xi)


def feedback_propagator(tau: float, config: SETConfig, xi: CountingFields = ZERO,
                        solver: str = "dcg") -> FeedbackPropagator:
    """F^tau(xi) = exp(L_E tau) P_E + exp(L_F tau) P_F; the identity at tau = 0."""
    if tau < 0:
        raise ValueError("tau must be non-negative")
    if tau == 0:
        return FeedbackPropagator(np.eye(2, dtype=complex), 0.0, xi)
    M = np.zeros((2, 2), dtype=complex)
    for nu, P in zip(OUTCOMES, measurement_projectors()):
        M += expm2(conditioned_generator(tau, config, nu, xi, solver) * tau) @ P
    return FeedbackPropagator(M, float(tau), xi)


def fixed_point(Fmat) -> StationaryState:
    """Stationary vector and second eigenvalue of a 2x2 column-stochastic matrix."""
    Fr = np.real(np.asarray(Fmat))
    a = Fr[1, 0]  # empty -> filled
    b = Fr[0, 1]  # filled -> empty
    if a + b < FIXED_POINT_GAP:
        raise DegenerateFixedPoint(f"second eigenvalue {1 - a - b!r} is numerically 1")
    return StationaryState(OccupationVector(b / (a + b), a / (a + b)), 1.0 - a - b, math.nan)


def stationary_state(tau: float, config: SETConfig, solver: str = "dcg") -> StationaryState:
    """Stroboscopic fixed point of F^tau(0); rejects the bistable Zeno regime."""
    if not tau > 0:
        raise DegenerateFixedPoint("tau = 0: every state is stationary")
    st = fixed_point(feedback_propagator(tau, config, ZERO, solver).matrix)
    return StationaryState(st.sigma, st.relaxation_eigenvalue, float(tau))


def mgf(tau: float, config: SETConfig, xi: CountingFields, solver: str = "dcg") -> complex:
    """M(tau, xi) = (1, 1) F^tau(xi) sigma_s."""
    sigma = stationary_state(tau, config, solver).sigma.as_array()
    return complex(np.sum(feedback_propagator(tau, config, xi, solver).matrix @ sigma))


# ---------------------------------------------------------------------------
# moments


@dataclass(frozen=True)
class FeedbackCycle:
    """Everything the thermodynamic ledger needs for one (tau, config, solver)."""

    tau: float
    solver: str
    stationary: StationaryState
    branches: dict  # Outcome -> FCSMoments (per branch, p_branch = p_nu)
    final_states: dict  # Outcome -> sigma^nu(tau) as ndarray
    moments: FCSMoments
    analytic_branches: dict = field(repr=False, default_factory=dict)

    @property
    def p(self) -> dict:
        return {nu: self.branches[nu].p_branch for nu in OUTCOMES}


def _branch_fd(tau, tabs, nu: Outcome, hchi=CHI_STEP, hzeta=ZETA_STEP):
    """Finite-difference first moments of the branch MGF (1,1) exp(L_nu(xi) tau) e_nu."""
    e = np.zeros(2)
    e[nu.index] = 1.0

    def inc(xi):
        return np.sum(expm2_minus_identity(assemble_liouvillian(tabs, xi) * tau) @ e)

    dn, dE = {}, {}
    for label in ("L", "R"):
        dchi = sum(w * inc(_field(label, "chi", s * hchi)) for s, w in FD_STENCIL) / hchi
        dzeta = sum(w * inc(_field(label, "zeta", s * hzeta)) for s, w in FD_STENCIL) / hzeta
        dn[label] = float(np.real(-1j * dchi))
        dE[label] = float(np.real(-1j * dzeta))
    return dn, dE


def _field(label, kind, value):
    return CountingFields(**{f"{kind}_{label}": value})


def _branch_analytic(tau, tabs, nu: Outcome):
    """Same moments via the Frechet derivative of the matrix exponential."""
    e = np.zeros(2)
    e[nu.index] = 1.0
    L0 = assemble_liouvillian(tabs, ZERO)
    dn, dE = {}, {}
    for label, tab in tabs:
        g10, g01 = tab.at(0.0)
        dL_chi = np.array([[0, 1j * g01], [-1j * g10, 0]])
        dL_zeta = np.array([[0, tab.d01], [tab.d10, 0]])
        for target, dL in ((dn, dL_chi), (dE, dL_zeta)):
            D = expm_frechet(L0 * tau, dL * tau, compute_expm=False)
            target[label] = float(np.real(-1j * np.sum(D @ e)))
    return dn, dE


def _check_agreement(fd, an, what, floor):
    for label in fd:
        a, b = fd[label], an[label]
        if abs(a - b) > MOMENT_RTOL * max(abs(a), abs(b)) + floor:
            raise MomentToleranceFailure(
                f"{what}[{label}]: finite differences {a!r} vs analytic {b!r}")


@lru_cache(maxsize=512)
def feedback_cycle(tau: float, config: SETConfig, solver: str = "dcg",
                   check: bool = True) -> FeedbackCycle:
    """Stationary state, outcome-resolved moments and post-period states at period ``tau``."""
    if solver not in SOLVERS:
        raise ValueError(f"unknown solver {solver!r}")
    stat = stationary_state(tau, config, solver)
    sigma = stat.sigma.as_array()
    zetas = _fd_zetas()
    branches, finals, analytic = {}, {}, {}
    for nu in OUTCOMES:
        tabs = _tables(tau, config, nu, solver, zetas)
        dn, dE = _branch_fd(tau, tabs, nu)
        dn_a, dE_a = _branch_analytic(tau, tabs, nu)
        if check:
            scale = max(1.0, max(abs(v) for v in dE.values()))
            _check_agreement(dn, dn_a, "dn", 1e-13)
            _check_agreement(dE, dE_a, "dE", 1e-13 * scale)
        p = float(sigma[nu.index])
        branches[nu] = FCSMoments(dn, dE, nu, p)
        analytic[nu] = FCSMoments(dn_a, dE_a, nu, p)
        e = np.zeros(2)
        e[nu.index] = 1.0
        finals[nu] = np.real(expm2(assemble_liouvillian(tabs, ZERO) * tau) @ e)
    total = _weighted(branches)
    return FeedbackCycle(float(tau), solver, stat, branches, finals, total, analytic)


def _weighted(branches) -> FCSMoments:
    dn = {a: sum(b.p_branch * b.dn[a] for b in branches.values()) for a in ("L", "R")}
    dE = {a: sum(b.p_branch * b.dE[a] for b in branches.values()) for a in ("L", "R")}
    return FCSMoments(dn, dE, None, 1.0)


def fcs_first_moments(tau: float, config: SETConfig, conditioned: Outcome | None = None,
                      solver: str = "dcg") -> FCSMoments:
    """Particle and energy transfer into each lead per period, optionally for one branch."""
    cyc = feedback_cycle(float(tau), config, solver)
    return cyc.moments if conditioned is None else cyc.branches[conditioned]


def time_averaged_current(tau: float, config: SETConfig, solver: str = "dcg",
                          tol: float = 1e-9) -> float:
    """I_m = dn_R / tau after checking stroboscopic particle conservation."""
    m = fcs_first_moments(tau, config, solver=solver)
    if abs(m.dn["L"] + m.dn["R"]) > tol:
        raise ConservationViolation(
            f"dn_L + dn_R = {m.dn['L'] + m.dn['R']:.3g} at tau = {tau}")
    return m.dn["R"] / tau


def bms_pipeline(tau: float, config: SETConfig) -> FeedbackCycle:
    """Feedback cycle with Born-Markov-secular generators in place of the DCG ones."""
    return feedback_cycle(float(tau), config, "bms")


def find_zero_current(config: SETConfig, tau_lo: float, tau_hi: float, solver="dcg",
                      xtol=1e-8) -> float:
    """Bisection for the period where the time-averaged current changes sign."""
    return bisect(lambda t: time_averaged_current(t, config, solver), tau_lo, tau_hi,
                  xtol=xtol)
