import math
import pickle

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from qdemon.errors import ConfigError
from qdemon.model import (
    E,
    F,
    FeedbackProtocol,
    OccupationVector,
    ReservoirSpec,
    config_from_mapping,
    fermi_hole,
    fermi_occupation,
    feedback_config,
    lorentzian,
    spectral_density,
)


def lead(**kw):
    base = dict(label="L", beta=0.1, mu=0.0, gamma0=0.5, eps_center=5.0, delta_width=5.0)
    base.update(kw)
    return ReservoirSpec(**base)


def test_fermi_at_chemical_potential():
    assert fermi_occupation(3.0, lead(mu=3.0)) == 0.5


def test_fermi_deep_tail_no_overflow():
    res = lead(beta=1.0, mu=0.0)
    with np.errstate(all="raise"):
        assert fermi_occupation(800.0, res) == 0.0
        assert fermi_hole(800.0, res) == 1.0
        assert fermi_occupation(-800.0, res) == 1.0


@pytest.mark.parametrize("x", [-30.0, -1.0, 0.3, 1.0, 7.5, 36.0])
def test_fermi_against_mpmath(x):
    res = lead(beta=1.0, mu=0.0)
    want = float(1 / (mpmath.exp(mpmath.mpf(x)) + 1))
    assert fermi_occupation(x, res) == pytest.approx(want, rel=1e-14)
    hole = float(1 - 1 / (mpmath.exp(mpmath.mpf(x)) + 1))
    assert fermi_hole(x, res) == pytest.approx(hole, rel=1e-14)


@given(st.floats(-1e3, 1e3), st.floats(1e-3, 1e2), st.floats(-50, 50))
def test_fermi_bounds_and_complement(w, beta, mu):
    res = lead(beta=beta, mu=mu)
    f, h = fermi_occupation(w, res), fermi_hole(w, res)
    assert 0.0 <= f <= 1.0
    assert f + h == pytest.approx(1.0, abs=1e-15)


def test_lorentzian_window_and_peak():
    res = lead(omega_min=0.0, omega_max=20.0)
    assert lorentzian(5.0, res) == 1.0
    assert lorentzian(10.0, res) == pytest.approx(0.5)
    assert lorentzian(-1e-9, res) == 0.0
    assert lorentzian(20.0 + 1e-9, res) == 0.0


def test_feedback_scaling():
    proto = FeedbackProtocol(delta=1.0)
    L, R = lead(), lead(label="R")
    assert spectral_density(5.0, L, E, proto) == pytest.approx(0.5 * math.e)
    assert spectral_density(5.0, L, F, proto) == pytest.approx(0.5 / math.e)
    assert spectral_density(5.0, R, E, proto) == pytest.approx(0.5 / math.e)
    assert spectral_density(5.0, R, F, proto) == pytest.approx(0.5 * math.e)
    assert spectral_density(5.0, L, F, FeedbackProtocol(delta=0.0)) == 0.5


def test_infinite_support_truncation():
    lo, hi = lead().support()
    assert lo == -400.0 and hi == 400.0
    assert lead(omega_min=0.0, omega_max=20.0).support() == (0.0, 20.0)


@pytest.mark.parametrize("kw", [dict(beta=0.0), dict(delta_width=-1.0), dict(gamma0=-0.1),
                                dict(omega_min=2.0, omega_max=1.0), dict(label="X")])
def test_reservoir_validation(kw):
    with pytest.raises(ConfigError):
        lead(**kw)


def test_occupation_vector():
    v = OccupationVector.from_array([0.25, 0.75])
    assert v.as_array().tolist() == [0.25, 0.75]
    with pytest.raises(ValueError):
        OccupationVector(0.5, 0.6)


def test_config_from_mapping_temperature_and_errors():
    data = {
        "left": dict(T=10.0, mu=0.0, gamma0=0.5, eps_center=5.0, delta_width=5.0),
        "right": dict(beta=0.1, mu=10.0, gamma0=0.5, eps_center=-1.0, delta_width=5.0),
        "feedback": {"delta": 1.0},
    }
    cfg = config_from_mapping(data)
    assert cfg.left.beta == pytest.approx(0.1)
    assert cfg.bias == -10.0
    assert cfg.feedback.delta == 1.0
    with pytest.raises(ConfigError):
        config_from_mapping({"left": data["left"]})
    with pytest.raises(ConfigError):
        config_from_mapping({**data, "left": {**data["left"], "colour": 1}})


def test_with_bias_is_symmetric_about_mean():
    cfg = feedback_config().with_bias(4.0)
    assert (cfg.left.mu, cfg.right.mu) == (7.0, 3.0)
    cfg = feedback_config().with_bias(-2.0, center=0.0)
    assert (cfg.left.mu, cfg.right.mu) == (-1.0, 1.0)


def test_configs_hashable_and_picklable():
    cfg = feedback_config()
    assert hash(cfg) == hash(pickle.loads(pickle.dumps(cfg)))
