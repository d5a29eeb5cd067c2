"""Short-period (quantum-Zeno) expansion of the feedback counting statistics.

For tau -> 0 the DCG rates become gamma^tau ~ tau g with flat-kernel integrals

    g10(zeta) = (1/2pi) Int Gamma(w) f(w)     exp(-i zeta w) dw
    g01(zeta) = (1/2pi) Int Gamma(w) (1-f(w)) exp(+i zeta w) dw

so that F^tau = 1 + tau^2 (L_E P_E + L_F P_F) + O(tau^4) and every first moment
is proportional to tau^2.

Counting-field placement follows the Liouvillian of the kernel module
(exp(+i chi) on the emptying rate), so that dn_alpha counts particles entering
lead alpha in both descriptions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CutoffRequired
from .kernel import CountingFields, ZERO
from .model import (
    OUTCOMES,
    E,
    F,
    Outcome,
    SETConfig,
    coupling_strength,
    fermi_hole,
    fermi_occupation,
    lorentzian,
    spectral_density,
)
from .quadrature import gauss_kronrod
from .thermo import (
    NotDefined,
    BranchThermo,
    ThermoReport,
    gain_value,
    heat_per_lead,
    reservoir_entropy,
    shannon_entropy,
)


@dataclass(frozen=True)
class ZenoCoefficients:
    """Flat-kernel rates per (lead label, outcome).

    ``g10_w``/``g01_w`` are the real energy-weighted rates -i d/dzeta g at zero:
    g10_w = -(1/2pi) Int w Gamma f, g01_w = (1/2pi) Int w Gamma (1-f).
    """

    g10: dict
    g01: dict
    g10_w: dict
    g01_w: dict

    def total(self, which: str, outcome: Outcome) -> float:
        d = getattr(self, which)
        return sum(d[(a, outcome)] for a in ("L", "R"))


def _check_cutoffs(config: SETConfig):
    for res in config.reservoirs:
        if res.gamma0 > 0 and not res.has_finite_support:
            raise CutoffRequired(
                f"lead {res.label}: energy-weighted flat-kernel integrals need finite cutoffs")


def _unit_integrals(res, tol, max_intervals, zeta=0.0):
    """(1/2pi) Int of Lorentzian x {f e^{-i zeta w}, (1-f) e^{i zeta w}, w f, w (1-f)}."""
    lo, hi = res.support()
    d = res.delta_width
    pts = [lo, hi, res.mu] + [res.eps_center + s * d for s in (-10, -3, -1, 0, 1, 3, 10)]
    pts = [p for p in pts if lo <= p <= hi]

    def integrand(x):
        lor = lorentzian(x, res)
        f = fermi_occupation(x, res)
        h = fermi_hole(x, res)
        return np.vstack([lor * f * np.exp(-1j * zeta * x), lor * h * np.exp(1j * zeta * x),
                          (x * lor * f).astype(complex), (x * lor * h).astype(complex)])

    val, _, _ = gauss_kronrod(integrand, pts, tol, max_intervals, 4)
    return val / (2 * math.pi)


def zeno_coefficients(config: SETConfig, zeta: dict | None = None) -> ZenoCoefficients:
    """Flat-kernel coefficients for both leads and outcomes (``zeta`` maps label -> field)."""
    _check_cutoffs(config)
    zeta = zeta or {}
    g10, g01, g10w, g01w = {}, {}, {}, {}
    for res in config.reservoirs:
        vals = _unit_integrals(res, config.quad_tol / max(1.0, res.gamma0 * 10),
                               config.max_intervals, zeta.get(res.label, 0.0))
        for nu in OUTCOMES:
            k = coupling_strength(res, nu, config.feedback)
            key = (res.label, nu)
            g10[key] = k * vals[0]
            g01[key] = k * vals[1]
            g10w[key] = -k * vals[2].real
            g01w[key] = k * vals[3].real
    if not zeta:
        g10 = {k: v.real for k, v in g10.items()}
        g01 = {k: v.real for k, v in g01.items()}
    return ZenoCoefficients(g10, g01, g10w, g01w)


@dataclass(frozen=True)
class ZenoOccupation:
    """tau -> 0 stationary filled probability.

    ``branch`` is the fixed point of the order-tau^2 branch dynamics,
    (1 - n) g10^E = n g01^F. ``printed`` uses filled-outcome rates in both sums.
    """

    branch: float
    printed: float

    @property
    def value(self) -> float:
        return self.branch


def zeno_occupation(config: SETConfig, coeffs: ZenoCoefficients | None = None) -> ZenoOccupation:
    c = coeffs or zeno_coefficients(config)
    fill_E = c.total("g10", E)
    empty_F = c.total("g01", F)
    fill_F = c.total("g10", F)
    branch = fill_E / (fill_E + empty_F) if fill_E + empty_F > 0 else math.nan
    printed = fill_F / (fill_F + empty_F) if fill_F + empty_F > 0 else math.nan
    return ZenoOccupation(float(branch), float(printed))


def zeno_mgf(tau: float, config: SETConfig, xi: CountingFields = ZERO) -> complex:
    """Counting-field dependent order-tau^2 part m(xi, tau) of the MGF."""
    zeta = {"L": xi.zeta_L, "R": xi.zeta_R}
    c0 = zeno_coefficients(config)
    n = zeno_occupation(config, c0).branch
    if math.isnan(n):
        n = 0.5
    c = zeno_coefficients(config, zeta) if (xi.zeta_L or xi.zeta_R) else c0
    m = 0j
    for a in ("L", "R"):
        chi = xi.chi(a)
        m += n * c.g01[(a, F)] * np.exp(1j * chi) + (1 - n) * c.g10[(a, E)] * np.exp(-1j * chi)
    return complex(tau * tau * m)


@dataclass(frozen=True)
class ZenoMoments:
    tau: float
    n_s0: float
    dn: dict
    dE: dict
    branch_dn: dict
    branch_dE: dict


def zeno_moments(tau: float, config: SETConfig, n_s0: float | None = None) -> ZenoMoments:
    """First moments of the order-tau^2 MGF, total and per measurement branch.

    ``n_s0`` overrides the stationary occupation used to weight the branches.
    """
    c = zeno_coefficients(config)
    n = zeno_occupation(config, c).branch if n_s0 is None else float(n_s0)
    if math.isnan(n):
        n = 0.5  # all rates vanish; the weighting is irrelevant
    t2 = tau * tau
    bdn = {E: {a: -t2 * c.g10[(a, E)] for a in "LR"},
           F: {a: t2 * c.g01[(a, F)] for a in "LR"}}
    bdE = {E: {a: t2 * c.g10_w[(a, E)] for a in "LR"},
           F: {a: t2 * c.g01_w[(a, F)] for a in "LR"}}
    p = {E: 1 - n, F: n}
    dn = {a: sum(p[nu] * bdn[nu][a] for nu in OUTCOMES) for a in "LR"}
    dE = {a: sum(p[nu] * bdE[nu][a] for nu in OUTCOMES) for a in "LR"}
    return ZenoMoments(tau, n, dn, dE, bdn, bdE)


def zeno_feedback_energy(tau: float, config: SETConfig, n_s0: float | None = None) -> float:
    """tau^2 sum_alpha [n g01_w^{alpha,F} + (1 - n) g10_w^{alpha,E}]."""
    m = zeno_moments(tau, config, n_s0)
    return m.dE["L"] + m.dE["R"]


def delta_tilde(config: SETConfig) -> float:
    """Int dw [Gamma_R^F w (1 - f_R) - Gamma_L^E w f_L]; negative favours dE_fb < 0."""
    _check_cutoffs(config)
    proto = config.feedback
    L, R = config.left, config.right
    pts = sorted({*L.support(), *R.support(), L.mu, R.mu, L.eps_center, R.eps_center})
    lo, hi = pts[0], pts[-1]
    pts = [p for p in pts if lo <= p <= hi]

    def integrand(x):
        return (spectral_density(x, R, F, proto) * x * fermi_hole(x, R)
                - spectral_density(x, L, E, proto) * x * fermi_occupation(x, L))

    val, _, _ = gauss_kronrod(integrand, pts, config.quad_tol, config.max_intervals)
    return float(val)


def smallness(tau: float, config: SETConfig) -> float:
    """max_rate * tau with rates ~ tau g; the expansion needs this << 1."""
    c = zeno_coefficients(config)
    rate = max(max(c.total("g10", nu), c.total("g01", nu)) for nu in OUTCOMES)
    return float(rate * tau * tau)


def zeno_report(tau: float, config: SETConfig) -> ThermoReport:
    """Thermodynamic ledger from the order-tau^2 expansion (used as small-tau fallback)."""
    m = zeno_moments(tau, config)
    c = zeno_coefficients(config)
    t2 = tau * tau
    p = {E: 1 - m.n_s0, F: m.n_s0}
    flip = {E: t2 * c.total("g10", E), F: t2 * c.total("g01", F)}
    branches = {}
    for nu in OUTCOMES:
        q = heat_per_lead(m.branch_dE[nu], m.branch_dn[nu], config)
        branches[nu] = BranchThermo(nu, p[nu], m.branch_dn[nu], m.branch_dE[nu], q,
                                    shannon_entropy([1 - flip[nu], flip[nu]]),
                                    reservoir_entropy(q, config))
    heat = heat_per_lead(m.dE, m.dn, config)
    V = config.bias
    power = -m.dn["R"] * V / tau + 0.0  # no signed zero at V = 0
    e_fb = m.dE["L"] + m.dE["R"]
    dS = sum(b.p * b.entropy_sys for b in branches.values())
    dSe = sum(b.p * b.entropy_res for b in branches.values())
    return ThermoReport(
        tau=tau, bias=V, power=power, feedback_energy=e_fb, gain=gain_value(power * tau, e_fb),
        heat_L=heat["L"], heat_R=heat["R"], heat_total=heat["L"] + heat["R"],
        entropy_sys=dS, entropy_res=dSe, information=-dS,
        efficiency=dSe / -dS if dS != 0 else NotDefined,
        dn=m.dn, dE=m.dE, n_s=m.n_s0, phi2=1.0 - flip[E] - flip[F], branch_data=branches)
