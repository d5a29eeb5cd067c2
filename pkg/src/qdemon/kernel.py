"""Dynamical coarse-graining rates, the counting-field Liouvillian and its exponential.

Internally both rates are written with the kernel centred at +epsilon:

    gamma10^t(zeta) = (t/2pi) Int sinc^2[t(w - eps)/2] Gamma(w) f(w)     exp(-i zeta w) dw
    gamma01^t(zeta) = (t/2pi) Int sinc^2[t(w - eps)/2] Gamma(w) (1-f(w)) exp(+i zeta w) dw

(the filling rate follows from the w -> -w substitution). A transition
1 <- 0 removes an electron of energy w from the lead, 0 <- 1 deposits one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate

from .errors import QuadratureFailure
from .model import (
    DotSpec,
    FeedbackProtocol,
    Outcome,
    ReservoirSpec,
    SETConfig,
    coupling_strength,
    fermi_hole,
    fermi_occupation,
    lorentzian,
    spectral_density,
)
from .quadrature import gauss_kronrod

# Lobes of sinc^2 resolved one subinterval each before switching to the far-field split.
DIRECT_LOBE_LIMIT = 4000
NEAR_LOBES = 2000
DEGENERATE_GAP = 1e-12


@dataclass(frozen=True)
class CountingFields:
    """xi = (chi_L, chi_R, zeta_L, zeta_R); the zero vector is the physical point."""

    chi_L: float = 0.0
    chi_R: float = 0.0
    zeta_L: float = 0.0
    zeta_R: float = 0.0

    def chi(self, label: str) -> float:
        return self.chi_L if label == "L" else self.chi_R

    def zeta(self, label: str) -> float:
        return self.zeta_L if label == "L" else self.zeta_R

    @property
    def is_zero(self) -> bool:
        return not any((self.chi_L, self.chi_R, self.zeta_L, self.zeta_R))


ZERO = CountingFields()


@dataclass(frozen=True)
class CGLiouvillian:
    matrix: np.ndarray
    eval_time: float
    fields: CountingFields = ZERO


# ---------------------------------------------------------------------------
# sinc^2-kernel spectral integrals


def _kernel(omega, t, center):
    u = 0.5 * t * (omega - center)
    return (t / (2 * math.pi)) * np.sinc(u / math.pi) ** 2


def sinc2_transform(weights, t, center, lo, hi, kappas, points=(), tol=1e-10,
                    max_intervals=10_000):
    """Components j of (t/2pi) Int_lo^hi sinc^2[t(w-c)/2] w_j(w) exp(i kappa_j w) dw.

    ``weights`` maps an abscissa array (n,) to real values (ncomp, n). Up to
    ``DIRECT_LOBE_LIMIT`` kernel lobes, the integral is split at every kernel
    zero and integrated by adaptive Gauss-Kronrod. Beyond that, lobes further
    than ``NEAR_LOBES`` periods from the centre use sinc^2 = (1 - cos)/(...)
    with the cosine part integrated by QUADPACK's QAWO.
    """
    kappas = np.asarray(kappas, dtype=float)
    ncomp = kappas.size
    if not hi > lo:
        return np.zeros(ncomp, dtype=complex)
    period = 2 * math.pi / t
    n_lobes = (hi - lo) / period
    extra = [p for p in points if lo < p < hi]

    def near_integrand(x):
        return weights(x) * _kernel(x, t, center)[None, :] * np.exp(1j * np.outer(kappas, x))

    if n_lobes <= DIRECT_LOBE_LIMIT:
        zeros = center + period * np.arange(math.ceil((lo - center) / period),
                                            math.floor((hi - center) / period) + 1)
        bps = np.concatenate([[lo, hi], zeros[(zeros > lo) & (zeros < hi)], extra])
        val, _, _ = gauss_kronrod(near_integrand, bps, tol, max_intervals, ncomp)
        return val

    X = NEAR_LOBES * period
    nlo, nhi = max(lo, center - X), min(hi, center + X)
    total = np.zeros(ncomp, dtype=complex)
    budget = max_intervals
    if nhi > nlo:
        zeros = center + period * np.arange(math.ceil((nlo - center) / period),
                                            math.floor((nhi - center) / period) + 1)
        bps = np.concatenate([[nlo, nhi], zeros[(zeros > nlo) & (zeros < nhi)],
                              [p for p in extra if nlo < p < nhi]])
        val, _, used = gauss_kronrod(near_integrand, bps, 0.5 * tol, budget, ncomp)
        total += val
        budget -= used
    for a, b in ((lo, min(hi, center - X)), (max(lo, center + X), hi)):
        if b > a:
            seg_pts = [a, b] + [p for p in extra if a < p < b]
            total += _far_field(weights, t, center, kappas, sorted(seg_pts),
                                0.25 * tol, max(budget, 100))
    return total


def _far_field(weights, t, center, kappas, pts, tol, max_intervals):
    """Int w_j exp(i k_j w) (1 - cos t(w-c)) / (pi t (w-c)^2) over a segment away from c."""
    ncomp = kappas.size

    def smooth(x):
        return (weights(x) / (math.pi * t * (x - center) ** 2)[None, :]
                * np.exp(1j * np.outer(kappas, x)))

    val, _, _ = gauss_kronrod(smooth, pts, tol, max_intervals, ncomp)
    out = np.array(val, dtype=complex)
    per = tol / (4 * ncomp * max(len(pts) - 1, 1))
    for j in range(ncomp):
        k = kappas[j]

        def g(x, part, j=j, k=k):
            w = weights(np.array([center + x]))[j, 0] / (math.pi * t * x * x)
            return w * (math.cos(k * x) if part == 0 else math.sin(k * x))

        osc = 0j
        for a, b in zip(pts[:-1], pts[1:]):
            for part in ((0,) if k == 0 else (0, 1)):
                res = integrate.quad(g, a - center, b - center, args=(part,), weight="cos",
                                     wvar=t, epsabs=per, epsrel=1e-13, limit=200,
                                     full_output=1)
                if res[1] > 10 * per and res[1] > 1e-14:
                    raise QuadratureFailure(
                        f"oscillatory far-field integral did not converge (err {res[1]:.2g})")
                osc += res[0] if part == 0 else 1j * res[0]
        out[j] -= np.exp(1j * k * center) * osc
    return out


@dataclass(frozen=True)
class RateTable:
    """Unit-coupling DCG rates of one lead at one kernel time.

    ``g10[k]``/``g01[k]`` are the rates at ``zetas[k]``; ``d10``/``d01`` their
    analytic zeta-derivatives at zero. Multiply by Gamma_0^nu for a given outcome.
    """

    zetas: tuple
    g10: np.ndarray
    g01: np.ndarray
    d10: complex
    d01: complex

    def scaled(self, factor: float) -> "RateTable":
        return RateTable(self.zetas, factor * self.g10, factor * self.g01,
                         factor * self.d10, factor * self.d01)

    def at(self, zeta: float) -> tuple[complex, complex]:
        k = self.zetas.index(zeta)
        return self.g10[k], self.g01[k]


def _breakpoints(res: ReservoirSpec, extra=()):
    lo, hi = res.support()
    d = res.delta_width
    pts = [res.mu] + [res.eps_center + s * d for s in (-10, -3, -1, 0, 1, 3, 10)]
    if d < 1e-2:
        pts += [res.eps_center + s * d for s in (-1e3, -1e2, -30, 30, 1e2, 1e3)]
    pts += list(extra)
    return lo, hi, [p for p in pts if lo < p < hi]


@lru_cache(maxsize=4096)
def rate_table(t: float, res: ReservoirSpec, eps: float, zetas: tuple = (0.0,),
               tol: float = 1e-10, max_intervals: int = 10_000) -> RateTable:
    """DCG rates of ``res`` with Gamma_0 = 1 at kernel time ``t`` for every zeta in ``zetas``."""
    if t <= 0:
        raise ValueError("kernel time must be positive")
    lo, hi, pts = _breakpoints(res, [eps])
    nz = len(zetas)
    z = np.asarray(zetas, dtype=float)
    kappas = np.concatenate([-z, z, [0.0, 0.0]])

    def weights(x):
        lor = lorentzian(x, res)
        h10 = lor * fermi_occupation(x, res)
        h01 = lor * fermi_hole(x, res)
        return np.vstack([np.broadcast_to(h10, (nz, x.size)), np.broadcast_to(h01, (nz, x.size)),
                          x * h10, x * h01])

    vals = sinc2_transform(weights, t, eps, lo, hi, kappas, pts, tol, max_intervals)
    return RateTable(tuple(zetas), vals[:nz], vals[nz:2 * nz],
                     -1j * vals[2 * nz], 1j * vals[2 * nz + 1])


def _unit_tol(tol: float, res: ReservoirSpec, proto: FeedbackProtocol) -> float:
    scale = res.gamma0 * math.exp(abs(proto.delta))
    return tol / max(1.0, scale)


def outcome_rates(t, res, outcome, proto, dot, zetas=(0.0,), tol=1e-10, max_intervals=10_000):
    """Rate table of ``res`` under outcome-conditioned coupling."""
    g = coupling_strength(res, outcome, proto)
    if g == 0.0:
        n = len(zetas)
        return RateTable(tuple(zetas), np.zeros(n, complex), np.zeros(n, complex), 0j, 0j)
    table = rate_table(float(t), res, float(dot.epsilon), tuple(float(z) for z in zetas),
                       _unit_tol(tol, res, proto), int(max_intervals))
    return table.scaled(g)


def cg_rates(t: float, res: ReservoirSpec, outcome: Outcome, proto: FeedbackProtocol,
             dot: DotSpec, zeta: float = 0.0, tol: float = 1e-10,
             max_intervals: int = 10_000) -> tuple[complex, complex]:
    """(gamma10^t(zeta), gamma01^t(zeta)) for one lead and outcome."""
    table = outcome_rates(t, res, outcome, proto, dot, (zeta,), tol, max_intervals)
    return complex(table.g10[0]), complex(table.g01[0])


def cg_rate_energy_weighted(t: float, res: ReservoirSpec, outcome: Outcome,
                            proto: FeedbackProtocol, dot: DotSpec, tol: float = 1e-10,
                            max_intervals: int = 10_000) -> tuple[complex, complex]:
    """d/dzeta of (gamma10^t, gamma01^t) at zeta = 0 (purely imaginary)."""
    table = outcome_rates(t, res, outcome, proto, dot, (0.0,), tol, max_intervals)
    return complex(table.d10), complex(table.d01)


# ---------------------------------------------------------------------------
# Liouvillians


def assemble_liouvillian(tables, xi: CountingFields, zero_index=None) -> np.ndarray:
    """Sum of per-lead 2x2 generators from (label, RateTable) pairs.

    The zeta of each lead must be one of the table's zetas.
    """
    L = np.zeros((2, 2), dtype=complex)
    for label, tab in tables:
        g10_0, g01_0 = tab.at(0.0)
        g10, g01 = tab.at(xi.zeta(label))
        chi = xi.chi(label)
        L[0, 0] -= g10_0
        L[1, 1] -= g01_0
        L[0, 1] += g01 * np.exp(1j * chi)
        L[1, 0] += g10 * np.exp(-1j * chi)
    return L


def build_cg_liouvillian(t: float, config: SETConfig, outcome: Outcome,
                         xi: CountingFields = ZERO) -> CGLiouvillian:
    """Coarse-grained generator at kernel time ``t`` summed over both leads."""
    tables = []
    for res in config.reservoirs:
        zetas = tuple(sorted({0.0, float(xi.zeta(res.label))}))
        tables.append((res.label, outcome_rates(t, res, outcome, config.feedback, config.dot,
                                                zetas, config.quad_tol, config.max_intervals)))
    return CGLiouvillian(assemble_liouvillian(tables, xi), float(t), xi)


def bms_table(res: ReservoirSpec, outcome: Outcome, proto: FeedbackProtocol, dot: DotSpec,
              zetas=(0.0,)) -> RateTable:
    """Born-Markov-secular rates in the same RateTable layout (energy quanta are all eps)."""
    eps = dot.epsilon
    gam = float(spectral_density(eps, res, outcome, proto))
    r10 = gam * fermi_occupation(eps, res)
    r01 = gam * fermi_hole(eps, res)
    z = np.asarray(zetas, dtype=float)
    return RateTable(tuple(float(v) for v in zetas), r10 * np.exp(-1j * z * eps),
                     r01 * np.exp(1j * z * eps), -1j * eps * r10, 1j * eps * r01)


def bms_liouvillian(config: SETConfig, outcome: Outcome,
                    xi: CountingFields = ZERO) -> CGLiouvillian:
    tables = []
    for res in config.reservoirs:
        zetas = tuple(sorted({0.0, float(xi.zeta(res.label))}))
        tables.append((res.label, bms_table(res, outcome, config.feedback, config.dot, zetas)))
    return CGLiouvillian(assemble_liouvillian(tables, xi), math.inf, xi)


# ---------------------------------------------------------------------------
# closed-form 2x2 exponentials


def _split(A):
    a = 0.5 * (A[0, 0] + A[1, 1])
    B = A - a * np.eye(2)
    s = np.sqrt(complex(B[0, 0] * B[0, 0] + B[0, 1] * B[1, 0]))
    if s.real < 0:
        s = -s
    return a, B, s


def _sinhc(s):
    if abs(s) < 1e-3:
        s2 = s * s
        return 1 + s2 / 6 * (1 + s2 / 20 * (1 + s2 / 42))
    return np.sinh(s) / s


def expm2(A) -> np.ndarray:
    """exp(A) for a 2x2 matrix via exp(a)[cosh(s) I + sinh(s)/s B], B = A - a I traceless."""
    A = np.asarray(A, dtype=complex)
    a, B, s = _split(A)
    if abs(s) < 0.5:
        return np.exp(a) * (np.cosh(s) * np.eye(2) + _sinhc(s) * B)
    # eigen form, overflow-free for large |s|
    P = 0.5 * (np.eye(2) + B / s)
    return np.exp(a + s) * P + np.exp(a - s) * (np.eye(2) - P)


def expm2_minus_identity(A) -> np.ndarray:
    """exp(A) - I without cancellation when A is small."""
    A = np.asarray(A, dtype=complex)
    a, B, s = _split(A)
    if abs(s) < 0.5:
        c1 = np.expm1(a) * np.cosh(s) + 2 * np.sinh(0.5 * s) ** 2
        return c1 * np.eye(2) + np.exp(a) * _sinhc(s) * B
    P = 0.5 * (np.eye(2) + B / s)
    return np.expm1(a + s) * P + np.expm1(a - s) * (np.eye(2) - P)


def propagator(t: float, L: CGLiouvillian) -> np.ndarray:
    """exp(L t); ``L`` must have been built with kernel time ``t``."""
    if t == 0:
        return np.eye(2, dtype=complex)
    if math.isfinite(L.eval_time) and not math.isclose(L.eval_time, t, rel_tol=1e-12):
        raise ValueError("DCG generator must be evaluated at the propagation time")
    return expm2(L.matrix * t)
