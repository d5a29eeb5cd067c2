"""Exact reference dynamics of the quadratic dot-plus-leads model with discretized leads.

The state is the single-particle correlation matrix C_xy = <c_x^dag c_y>
(index 0 is the dot, then the left modes, then the right modes). Under
H = sum h_xy c_x^dag c_y with real symmetric h, C(t) = conj(U) C U with
U = exp(-i h t).

Lead modes sit on a uniform midpoint grid with couplings
t_k = sqrt(Gamma(w_k) dw / 2pi), so that a filled dot decays into an empty
continuum at the golden-rule rate Gamma(eps).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import expm_multiply

from .errors import DegenerateBranch, HorizonExceeded
from .model import OUTCOMES, E, F, Outcome, ReservoirSpec, SETConfig, fermi_occupation, spectral_density

BRANCH_FLOOR = 1e-14
EXHAUSTIVE_LIMIT = 12


@dataclass(frozen=True)
class DiscretizedBath:
    """Modes of one lead for one measurement outcome."""

    label: str
    energies: np.ndarray
    couplings: np.ndarray
    spacing: float

    @property
    def N(self) -> int:
        return self.energies.size

    @property
    def recurrence_time(self) -> float:
        return 2 * math.pi / self.spacing


def discretize_bath(res: ReservoirSpec, outcome: Outcome, proto, N: int,
                    window: tuple[float, float] | None = None) -> DiscretizedBath:
    """Uniform midpoint grid of N modes over the lead's support (or ``window``)."""
    if N < 1:
        raise ValueError("need at least one mode")
    lo, hi = window if window is not None else res.support()
    dw = (hi - lo) / N
    w = lo + dw * (np.arange(N) + 0.5)
    gam = np.asarray(spectral_density(w, res, outcome, proto), dtype=float)
    return DiscretizedBath(res.label, w, np.sqrt(gam * dw / (2 * math.pi)), dw)


def single_particle_hamiltonian(eps: float, baths) -> np.ndarray:
    """h with the dot energy, mode energies on the diagonal and couplings on row/column 0."""
    n = 1 + sum(b.N for b in baths)
    h = np.zeros((n, n))
    h[0, 0] = eps
    i = 1
    for b in baths:
        sl = slice(i, i + b.N)
        h[sl, sl] = np.diag(b.energies)
        h[0, sl] = b.couplings
        h[sl, 0] = b.couplings
        i += b.N
    return h


class ExactModel:
    """Discretized SET with one single-particle Hamiltonian per measurement outcome.

    Without feedback (delta = 0) both outcomes share the same Hamiltonian.
    """

    def __init__(self, config: SETConfig, N: int | tuple = 400, windows: dict | None = None):
        self.config = config
        Ns = (N, N) if np.isscalar(N) else tuple(N)
        windows = windows or {}
        self.baths = {nu: [discretize_bath(r, nu, config.feedback, n, windows.get(r.label))
                           for r, n in zip(config.reservoirs, Ns)] for nu in OUTCOMES}
        ref = self.baths[E]
        self.labels = [b.label for b in ref]
        self.slices = {}
        i = 1
        for b in ref:
            self.slices[b.label] = slice(i, i + b.N)
            i += b.N
        self.dim = i
        self.energies = np.concatenate([[config.dot.epsilon]] + [b.energies for b in ref])
        coupled = [b.recurrence_time for nu in OUTCOMES for b in self.baths[nu]
                   if np.any(b.couplings)]
        self.horizon = min(coupled, default=math.inf)
        self.h = {nu: single_particle_hamiltonian(config.dot.epsilon, self.baths[nu])
                  for nu in OUTCOMES}
        self._eig = {}

    def eig(self, outcome: Outcome):
        if outcome not in self._eig:
            self._eig[outcome] = np.linalg.eigh(self.h[outcome])
        return self._eig[outcome]

    def check_horizon(self, t: float):
        if t > self.horizon:
            raise HorizonExceeded(
                f"t = {t} exceeds the recurrence horizon 2pi/dw = {self.horizon:.4g}")

    def evolution(self, t: float, outcome: Outcome = E) -> np.ndarray:
        """U = exp(-i h t)."""
        self.check_horizon(t)
        lam, V = self.eig(outcome)
        return (V * np.exp(-1j * lam * t)) @ V.T

    def thermal_state(self, p_filled: float) -> np.ndarray:
        """Product state: dot with occupation ``p_filled``, leads thermal."""
        occ = [np.array([p_filled])]
        for r in self.config.reservoirs:
            occ.append(np.asarray(fermi_occupation(self.energies[self.slices[r.label]], r)))
        return np.diag(np.concatenate(occ)).astype(complex)

    # observables -----------------------------------------------------------

    def energy(self, C, outcome: Outcome) -> float:
        return float(np.real(np.sum(self.h[outcome] * C)))

    def coupling_energy(self, C, outcome: Outcome) -> float:
        h = self.h[outcome]
        return float(2 * np.real(np.dot(h[0, 1:], C[0, 1:])))

    def local_energy(self, C) -> float:
        """<H_d + H_r>."""
        return float(np.real(np.dot(self.energies, np.diag(C))))

    def lead_particles(self, C, label: str) -> float:
        return float(np.real(np.trace(C[self.slices[label], self.slices[label]])))

    def lead_energy(self, C, label: str) -> float:
        sl = self.slices[label]
        return float(np.real(np.dot(self.energies[sl], np.diag(C)[sl])))

    def total_particles(self, C) -> float:
        return float(np.real(np.trace(C)))


def exact_evolve(C, model: ExactModel, t: float, outcome: Outcome = E) -> np.ndarray:
    """C(t) = conj(U) C U under the outcome's Hamiltonian."""
    if t == 0:
        return np.array(C, dtype=complex)
    U = model.evolution(t, outcome)
    return U.conj() @ C @ U


def occupation_trace(model: ExactModel, C0, times, outcome: Outcome = E) -> np.ndarray:
    """n_d(t) on a time grid.

    For a diagonal initial state only the dot column of U is needed, which is
    propagated with a sparse Krylov exponential; otherwise the full spectrum is used.
    """
    times = np.asarray(times, dtype=float)
    if times.size and times.max() > model.horizon:
        model.check_horizon(float(times.max()))
    C0 = np.asarray(C0)
    if np.count_nonzero(C0 - np.diag(np.diagonal(C0))) == 0:
        occ = np.real(np.diagonal(C0))
        h = sparse.csr_matrix(model.h[outcome])
        e0 = np.zeros(model.dim, dtype=complex)
        e0[0] = 1.0
        out = np.empty(times.size)
        for i, t in enumerate(times):
            u = e0 if t == 0 else expm_multiply(-1j * t * h, e0)
            out[i] = np.dot(np.abs(u) ** 2, occ)
        return out
    lam, V = model.eig(outcome)
    rows = (V[0][None, :] * np.exp(-1j * np.outer(times, lam))) @ V.T
    return np.real(np.einsum("tx,xy,ty->t", rows.conj(), C0, rows))


@dataclass(frozen=True)
class MeasurementResult:
    states: dict  # Outcome -> conditioned C (missing if the branch is degenerate)
    probabilities: dict


def measure_branch(C, outcome: Outcome) -> np.ndarray:
    """Conditional Gaussian state after finding the dot empty or filled."""
    C = np.asarray(C, dtype=complex)
    p_f = float(np.real(C[0, 0]))
    p = p_f if outcome is F else 1.0 - p_f
    if p < BRANCH_FLOOR:
        raise DegenerateBranch(f"branch {outcome.value} has probability {p:.3g}")
    col = C[1:, 0]
    row = C[0, 1:]
    out = C.copy()
    if outcome is F:
        out[1:, 1:] = C[1:, 1:] - np.outer(col, row) / p_f
        out[0, 0] = 1.0
    else:
        out[1:, 1:] = C[1:, 1:] + np.outer(col, row) / (1.0 - p_f)
        out[0, 0] = 0.0
    out[0, 1:] = 0.0
    out[1:, 0] = 0.0
    return out


def exact_measure_feedback(C, config: SETConfig | None = None) -> MeasurementResult:
    """Both conditioned states with their probabilities; degenerate branches are skipped."""
    p_f = float(np.real(C[0, 0]))
    probs = {E: 1.0 - p_f, F: p_f}
    states = {}
    for nu in OUTCOMES:
        try:
            states[nu] = measure_branch(C, nu)
        except DegenerateBranch:
            continue
    return MeasurementResult(states, probs)


def dephase(C) -> np.ndarray:
    """Non-selective measurement: drop dot-lead coherences."""
    out = np.array(C, dtype=complex)
    out[0, 1:] = 0.0
    out[1:, 0] = 0.0
    return out


@dataclass(frozen=True)
class EnergyIdentity:
    """Three evaluations of the energy change caused by one measurement."""

    direct: float  # branch-averaged <H^nu> after minus <H^nu> before
    coupling: float  # -<H_c^nu> before
    local: float  # change of <H_d + H_r> over the preceding free period

    def residual(self) -> float:
        return max(abs(self.direct - self.coupling), abs(self.coupling - self.local))


def measurement_energy(model: ExactModel, C_before, C_start, outcome: Outcome) -> EnergyIdentity:
    """Measurement energy for a period run with ``outcome``'s Hamiltonian from ``C_start``.

    ``C_start`` must be free of dot-lead coherences (i.e. just measured).
    """
    res = exact_measure_feedback(C_before)
    after = sum(res.probabilities[nu] * model.energy(Cn, outcome) for nu, Cn in res.states.items())
    direct = after - model.energy(C_before, outcome)
    return EnergyIdentity(direct, -model.coupling_energy(C_before, outcome),
                          model.local_energy(C_before) - model.local_energy(C_start))


@dataclass
class FeedbackRun:
    """Measurement-averaged transfer over ``periods`` feedback periods.

    ``dn``/``dE`` are the changes of lead particle number and energy;
    ``measurement_energy`` sums -<H_c> over the measurements that close each period.
    """

    periods: int
    tau: float
    dn: dict
    dE: dict
    measurement_energy: float
    n_branches: int
    identity_residual: float
    conservation_residual: float
    dot_occupation: np.ndarray

    @property
    def feedback_energy(self) -> float:
        return self.dE["L"] + self.dE["R"]


class _Accumulator:
    def __init__(self, model, C0, periods):
        self.model, self.C0 = model, C0
        self.dn = {a: 0.0 for a in model.labels}
        self.dE = {a: 0.0 for a in model.labels}
        self.e_meas = 0.0
        self.n = 0
        self.resid = 0.0
        self.cons = 0.0
        self.occ = np.zeros(periods)

    def step(self, start, C, nu, w, depth):
        m = self.model
        self.cons = max(self.cons, abs(m.total_particles(C) - m.total_particles(start)),
                        abs(m.energy(C, nu) - m.energy(start, nu)))
        ident = measurement_energy(m, C, start, nu)
        self.resid = max(self.resid, ident.residual())
        self.e_meas += w * ident.coupling
        self.occ[depth] += w * float(np.real(C[0, 0]))

    def leaf(self, C, w):
        m = self.model
        self.n += 1
        for a in m.labels:
            self.dn[a] += w * (m.lead_particles(C, a) - m.lead_particles(self.C0, a))
            self.dE[a] += w * (m.lead_energy(C, a) - m.lead_energy(self.C0, a))

    def result(self, periods, tau):
        return FeedbackRun(periods, tau, self.dn, self.dE, self.e_meas, self.n,
                           self.resid, self.cons, self.occ)


def exact_feedback(model: ExactModel, p_filled: float, tau: float, periods: int,
                   samples: int | None = None, seed: int = 0) -> FeedbackRun:
    """Piecewise-constant feedback on the exact model, starting from a product state.

    Up to ``EXHAUSTIVE_LIMIT`` periods every outcome sequence is followed and
    weighted by its probability (shared prefixes are evolved once). Beyond that,
    or when ``samples`` is given, sequences are drawn by Monte Carlo with ``seed``.
    """
    model.check_horizon(periods * tau)
    C0 = model.thermal_state(p_filled)
    U = {nu: model.evolution(tau, nu) for nu in OUTCOMES}
    acc = _Accumulator(model, C0, periods)

    def advance(C, nu, w, depth):
        start = measure_branch(C, nu)
        C1 = U[nu].conj() @ start @ U[nu]
        acc.step(start, C1, nu, w, depth)
        return C1

    if samples is None and periods <= EXHAUSTIVE_LIMIT:
        def walk(C, w, depth):
            if depth == periods:
                acc.leaf(C, w)
                return
            p_f = float(np.real(C[0, 0]))
            for nu, p in ((E, 1.0 - p_f), (F, p_f)):
                if p < BRANCH_FLOOR:
                    continue
                walk(advance(C, nu, w * p, depth), w * p, depth + 1)

        walk(C0, 1.0, 0)
    else:
        rng = np.random.default_rng(seed)
        samples = samples or 1000
        w = 1.0 / samples
        for _ in range(samples):
            C = C0
            for depth in range(periods):
                nu = F if rng.random() < float(np.real(C[0, 0])) else E
                C = advance(C, nu, w, depth)
            acc.leaf(C, w)
    return acc.result(periods, tau)
