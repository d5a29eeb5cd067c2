import math
import pickle
from dataclasses import replace

import numpy as np
import pytest

from qdemon.errors import SecondLawViolation
from qdemon.feedback import FCSMoments, feedback_cycle
from qdemon.model import E, F, feedback_config
from qdemon.thermo import (
    LANDAUER_BOUND,
    NotDefined,
    electric_power,
    entropy_balance,
    feedback_energy,
    gain,
    gain_value,
    heat_flows,
    is_defined,
    report_from_cycle,
    shannon_entropy,
    thermo_report,
)


def test_sentinel():
    assert not NotDefined
    assert pickle.loads(pickle.dumps(NotDefined)) is NotDefined
    assert repr(NotDefined) == "NotDefined"
    assert not is_defined(NotDefined) and is_defined(0.0)


def test_gain_arithmetic():
    assert gain_value(2.0, 0.05) == pytest.approx(40.0)
    assert gain_value(-1.0, 0.05) is NotDefined
    assert gain_value(1.0, -0.05) is NotDefined
    assert gain_value(0.0, 1.0) is NotDefined
    assert gain_value(1.0, 1e-12) > 1e11


def test_shannon():
    assert shannon_entropy([0.5, 0.5]) == pytest.approx(math.log(2), abs=1e-15)
    assert shannon_entropy([1.0, 0.0]) == 0.0


def test_zero_bias_no_power(fb):
    cfg = fb.with_bias(0.0)
    assert electric_power(0.7, cfg) == 0.0
    assert math.copysign(1, electric_power(0.7, cfg)) == 1.0


def test_power_sign_without_feedback():
    cfg = feedback_config(0.0)  # V = -10
    assert electric_power(1.0, cfg) < 0


def test_heat_equals_energy_at_zero_potentials(fb):
    cfg = fb.with_bias(0.0, center=0.0)
    qL, qR, q = heat_flows(0.6, cfg)
    m = feedback_cycle(0.6, cfg).moments
    assert (qL, qR) == (m.dE["L"], m.dE["R"])
    assert q == qL + qR


@pytest.mark.parametrize("V,tau", [(-14.0, 0.7), (3.0, 0.2), (18.0, 2.5)])
def test_first_law_bookkeeping(fb, V, tau):
    cfg = fb.with_bias(V)
    rep = thermo_report(tau, cfg)
    mu = {"L": cfg.left.mu, "R": cfg.right.mu}
    rebuilt = rep.heat_L + mu["L"] * rep.dn["L"] + rep.heat_R + mu["R"] * rep.dn["R"]
    assert rep.feedback_energy == pytest.approx(rebuilt, abs=1e-12)
    assert rep.feedback_energy == feedback_energy(tau, cfg)
    assert rep.heat_total == rep.heat_L + rep.heat_R


@pytest.mark.parametrize("V,tau", [(-14.0, 0.7), (-4.0, 0.5), (10.0, 1.5), (0.0, 0.05)])
def test_entropy_bounds(fb, V, tau):
    rep = thermo_report(tau, fb.with_bias(V))
    assert 0.0 <= rep.entropy_sys <= LANDAUER_BOUND
    assert rep.information == -rep.entropy_sys
    assert rep.efficiency <= 1 + 1e-9
    for b in rep.branch_data.values():
        assert b.entropy_production >= -1e-9
    bal = entropy_balance(tau, fb.with_bias(V))
    assert bal.efficiency == rep.efficiency


def test_zeno_freezing_of_entropy(fb):
    assert thermo_report(1e-4, fb).entropy_sys < 1e-5


def test_gain_defined_only_with_positive_power_and_energy(fb):
    cfg = fb.with_bias(-14.0)
    rep = thermo_report(0.7, cfg)
    assert rep.power > 0 and rep.feedback_energy > 0
    assert gain(0.7, cfg) == pytest.approx(rep.power * 0.7 / rep.feedback_energy)
    assert gain(0.7, fb.with_bias(10.0)) is NotDefined


def test_second_law_violation_is_reported(fb):
    cyc = feedback_cycle(0.5, fb)
    b = cyc.branches[F]
    # reverse the heat of one branch to fabricate an entropy-destroying process
    bad = FCSMoments({k: -v for k, v in b.dn.items()},
                     {k: -100 * v for k, v in b.dE.items()}, F, b.p_branch)
    broken = replace(cyc, branches={E: cyc.branches[E], F: bad})
    with pytest.raises(SecondLawViolation):
        report_from_cycle(broken, fb)
    report_from_cycle(broken, fb, check=False)
