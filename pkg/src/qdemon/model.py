"""Physical configuration of the single-electron transistor and its elementary functions.

Units: the dot energy sets the energy scale and hbar = k_B = 1, so times are
measured in units of 1/epsilon.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Any, Mapping

import numpy as np
from scipy.special import expit

from .errors import ConfigError

# Truncation of infinite cutoffs: Fermi window and Lorentzian mass.
FERMI_WINDOW = 40.0
LORENTZ_WINDOW = 50.0


class Outcome(enum.Enum):
    """Result of the projective dot-occupation measurement."""

    EMPTY = "E"
    FILLED = "F"

    @property
    def index(self) -> int:
        return 0 if self is Outcome.EMPTY else 1


E = Outcome.EMPTY
F = Outcome.FILLED
OUTCOMES = (E, F)


@dataclass(frozen=True)
class DotSpec:
    epsilon: float = 1.0

    def __post_init__(self):
        if not math.isfinite(self.epsilon):
            raise ConfigError("dot energy must be finite")


@dataclass(frozen=True)
class ReservoirSpec:
    """One lead: thermal state plus a Lorentzian coupling density with hard cutoffs."""

    label: str
    beta: float
    mu: float
    gamma0: float
    eps_center: float
    delta_width: float
    omega_min: float = -math.inf
    omega_max: float = math.inf

    def __post_init__(self):
        if self.label not in ("L", "R"):
            raise ConfigError(f"reservoir label must be 'L' or 'R', got {self.label!r}")
        if not self.beta > 0:
            raise ConfigError("beta must be positive")
        if not self.delta_width > 0:
            raise ConfigError("delta_width must be positive")
        if not self.gamma0 >= 0:
            raise ConfigError("gamma0 must be non-negative")
        if not self.omega_min < self.omega_max:
            raise ConfigError("omega_min must be below omega_max")
        for name in ("mu", "eps_center"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"{name} must be finite")

    @property
    def has_finite_support(self) -> bool:
        return math.isfinite(self.omega_min) and math.isfinite(self.omega_max)

    def support(self) -> tuple[float, float]:
        """Integration window; infinite cutoffs are replaced by the truncation rule."""
        lo, hi = self.omega_min, self.omega_max
        if not math.isfinite(lo):
            lo = min(self.mu - FERMI_WINDOW / self.beta,
                     self.eps_center - LORENTZ_WINDOW * self.delta_width)
        if not math.isfinite(hi):
            hi = max(self.mu + FERMI_WINDOW / self.beta,
                     self.eps_center + LORENTZ_WINDOW * self.delta_width)
        return lo, hi


@dataclass(frozen=True)
class FeedbackProtocol:
    """Feedback period tau and strength delta (coupling scaling exp(+-delta))."""

    tau: float = 0.0
    delta: float = 0.0

    def __post_init__(self):
        if not self.tau >= 0:
            raise ConfigError("tau must be non-negative")
        if not math.isfinite(self.delta):
            raise ConfigError("delta must be finite")

    def coupling_factor(self, label: str, outcome: Outcome) -> float:
        # L is opened when empty, R when filled (delta > 0 pumps L -> R).
        sign = 1.0 if (label == "L") == (outcome is E) else -1.0
        return math.exp(sign * self.delta)


@dataclass(frozen=True)
class OccupationVector:
    p_empty: float
    p_filled: float

    def __post_init__(self):
        for p in (self.p_empty, self.p_filled):
            if not -1e-12 <= p <= 1 + 1e-12:
                raise ValueError(f"probability out of range: {p}")
        if abs(self.p_empty + self.p_filled - 1) > 1e-12:
            raise ValueError("occupation vector is not normalized")

    @classmethod
    def from_array(cls, sigma) -> "OccupationVector":
        s = np.real_if_close(np.asarray(sigma)).astype(float)
        return cls(float(s[0]), float(s[1]))

    def as_array(self) -> np.ndarray:
        return np.array([self.p_empty, self.p_filled])


@dataclass(frozen=True)
class SETConfig:
    """Dot, both leads and the feedback protocol; numerical tolerances ride along."""

    dot: DotSpec
    left: ReservoirSpec
    right: ReservoirSpec
    feedback: FeedbackProtocol = field(default_factory=FeedbackProtocol)
    quad_tol: float = 1e-10
    max_intervals: int = 10_000

    def __post_init__(self):
        if self.left.label != "L" or self.right.label != "R":
            raise ConfigError("left/right reservoirs must carry labels L/R")

    @property
    def reservoirs(self) -> tuple[ReservoirSpec, ReservoirSpec]:
        return (self.left, self.right)

    @property
    def bias(self) -> float:
        """V = mu_L - mu_R."""
        return self.left.mu - self.right.mu

    def with_delta(self, delta: float) -> "SETConfig":
        return replace(self, feedback=replace(self.feedback, delta=delta))

    def with_bias(self, V: float, center: float | None = None) -> "SETConfig":
        """Set mu_L = c + V/2, mu_R = c - V/2 (c defaults to the current mean potential)."""
        if center is None:
            center = 0.5 * (self.left.mu + self.right.mu)
        return replace(self, left=replace(self.left, mu=center + 0.5 * V),
                       right=replace(self.right, mu=center - 0.5 * V))

    def with_gamma0(self, gamma0: float) -> "SETConfig":
        return replace(self, left=replace(self.left, gamma0=gamma0),
                       right=replace(self.right, gamma0=gamma0))


def fermi_occupation(omega, res: ReservoirSpec):
    """Fermi function 1/(exp(beta (omega - mu)) + 1), overflow-safe."""
    out = expit(-res.beta * (np.asarray(omega, dtype=float) - res.mu))
    return out if out.ndim else float(out)


def fermi_hole(omega, res: ReservoirSpec):
    """1 - f(omega) without cancellation."""
    out = expit(res.beta * (np.asarray(omega, dtype=float) - res.mu))
    return out if out.ndim else float(out)


def lorentzian(omega, res: ReservoirSpec):
    """Unit-height Lorentzian times the cutoff window (no gamma0 factor)."""
    w = np.asarray(omega, dtype=float)
    d = res.delta_width
    inside = (w >= res.omega_min) & (w <= res.omega_max)
    out = np.where(inside, d * d / ((w - res.eps_center) ** 2 + d * d), 0.0)
    return out if out.ndim else float(out)


def coupling_strength(res: ReservoirSpec, outcome: Outcome, proto: FeedbackProtocol) -> float:
    """Outcome-conditioned prefactor Gamma_0^nu of the lead."""
    return res.gamma0 * proto.coupling_factor(res.label, outcome)


def spectral_density(omega, res: ReservoirSpec, outcome: Outcome, proto: FeedbackProtocol):
    """Gamma_alpha^nu(omega): outcome-scaled Lorentzian inside [omega_min, omega_max]."""
    return coupling_strength(res, outcome, proto) * lorentzian(omega, res)


# ---------------------------------------------------------------------------
# configuration files

_RES_KEYS = ("beta", "mu", "gamma0", "eps_center", "delta_width", "omega_min", "omega_max")


def _reservoir_from_mapping(label: str, data: Mapping[str, Any]) -> ReservoirSpec:
    data = dict(data)
    if "T" in data:
        if "beta" in data:
            raise ConfigError(f"[{label}] give either T or beta, not both")
        data["beta"] = 1.0 / float(data.pop("T"))
    unknown = set(data) - set(_RES_KEYS)
    if unknown:
        raise ConfigError(f"unknown keys in reservoir {label}: {sorted(unknown)}")
    missing = {"beta", "mu", "gamma0", "eps_center", "delta_width"} - set(data)
    if missing:
        raise ConfigError(f"missing keys in reservoir {label}: {sorted(missing)}")
    try:
        kwargs = {k: float(v) for k, v in data.items()}
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"non-numeric value in reservoir {label}: {exc}") from None
    return ReservoirSpec(label=label, **kwargs)


def config_from_mapping(data: Mapping[str, Any]) -> SETConfig:
    """Build an SETConfig from the [dot], [left], [right], [feedback], [numerics] tables."""
    try:
        dot = DotSpec(float(data.get("dot", {}).get("epsilon", 1.0)))
        left = _reservoir_from_mapping("L", data["left"])
        right = _reservoir_from_mapping("R", data["right"])
        fb = data.get("feedback", {})
        proto = FeedbackProtocol(tau=float(fb.get("tau", 0.0)), delta=float(fb.get("delta", 0.0)))
        num = data.get("numerics", {})
        return SETConfig(dot, left, right, proto,
                         quad_tol=float(num.get("quad_tol", 1e-10)),
                         max_intervals=int(num.get("max_intervals", 10_000)))
    except KeyError as exc:
        raise ConfigError(f"missing config section {exc}") from None


def band_config() -> SETConfig:
    """Benchmark parameters: infinite band, no feedback, mu_L = 0, mu_R = 10, T = 10."""
    inf = math.inf
    left = ReservoirSpec("L", beta=0.1, mu=0.0, gamma0=0.5, eps_center=5.0,
                         delta_width=5.0, omega_min=-inf, omega_max=inf)
    right = ReservoirSpec("R", beta=0.1, mu=10.0, gamma0=0.5, eps_center=-1.0,
                          delta_width=5.0, omega_min=-inf, omega_max=inf)
    return SETConfig(DotSpec(1.0), left, right, FeedbackProtocol(0.0, 0.0))


def feedback_config(delta: float = 1.0) -> SETConfig:
    """Feedback parameters: as band_config but with cutoffs [0, 20]."""
    base = band_config()
    left = replace(base.left, omega_min=0.0, omega_max=20.0)
    right = replace(base.right, omega_min=0.0, omega_max=20.0)
    return SETConfig(base.dot, left, right, FeedbackProtocol(0.0, delta))
