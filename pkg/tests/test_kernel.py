import math

import mpmath

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from scipy import integrate
from scipy.special import sici

from qdemon.kernel import (
    ZERO,
    CountingFields,
    bms_liouvillian,
    build_cg_liouvillian,
    cg_rate_energy_weighted,
    cg_rates,
    expm2,
    expm2_minus_identity,
    propagator,
    rate_table,
    sinc2_transform,
)
from qdemon.model import E, F, fermi_hole, fermi_occupation, spectral_density


def windowed_mass(t, X):
    """(t/2pi) Int_{-X}^{X} sinc^2(t x / 2) dx in closed form."""
    a = t * X
    return (2 / math.pi) * (sici(a)[0] - math.sin(a / 2) ** 2 / (a / 2))


@pytest.mark.parametrize("t", [0.5, 3.0, 40.0, 2000.0])
def test_sinc2_mass_against_sine_integral(t):
    X = 20.0
    val = sinc2_transform(lambda x: np.ones((1, x.size)), t, 0.0, -X, X, [0.0], tol=1e-12)
    assert val[0].real == pytest.approx(windowed_mass(t, X), abs=1e-9)


def test_far_field_path_with_phase():
    # above DIRECT_LOBE_LIMIT the outer lobes go through QAWO; compare the phased
    # integral against the direct lobe-by-lobe route at a lobe count just below it
    w = lambda x: np.vstack([1.0 / (1.0 + 0.01 * x**2)])
    t_far, t_near = 1300.0, 1200.0
    far = sinc2_transform(w, t_far, 0.3, -20, 20, [0.7], tol=1e-12)[0]
    near = sinc2_transform(w, t_near, 0.3, -20, 20, [0.7], tol=1e-12)[0]
    # both approach the delta-function limit w(c) exp(i k c); the gap scales like 1/t
    limit = w(np.array([0.3]))[0, 0] * np.exp(0.7j * 0.3)
    assert abs(far - limit) < abs(near - limit) < 1e-3


def test_rate_against_dense_trapezoid(fb):
    res = fb.left
    t, zeta = 2.0, 0.3
    g10, g01 = cg_rates(t, res, E, fb.feedback, fb.dot, zeta)
    w = np.linspace(0.0, 20.0, 400_001)
    gam = spectral_density(w, res, E, fb.feedback)
    k = (t / (2 * math.pi)) * np.sinc(t * (w - 1.0) / (2 * math.pi)) ** 2
    want10 = np.trapezoid(k * gam * fermi_occupation(w, res) * np.exp(-1j * zeta * w), w)
    want01 = np.trapezoid(k * gam * fermi_hole(w, res) * np.exp(1j * zeta * w), w)
    assert abs(g10 - want10) < 1e-9
    assert abs(g01 - want01) < 1e-9


def test_filling_rate_in_mirrored_variable(fb):
    # filling rate written with the kernel at -eps and Gamma(-w) f(-w) e^{+i zeta w}
    res, t, zeta = fb.right, 1.5, 0.2
    g10, _ = cg_rates(t, res, F, fb.feedback, fb.dot, zeta)

    def integrand(w, part):
        k = (t / (2 * math.pi)) * np.sinc(t * (-1.0 - w) / (2 * math.pi)) ** 2
        val = k * spectral_density(-w, res, F, fb.feedback) * fermi_occupation(-w, res)
        return val * (math.cos(zeta * w) if part == 0 else math.sin(zeta * w))

    pts = [-1.0 - 2 * math.pi * n / t for n in range(1, 14)]
    re = integrate.quad(integrand, -20, 0, args=(0,), points=pts, epsabs=1e-13, limit=500)[0]
    im = integrate.quad(integrand, -20, 0, args=(1,), points=pts, epsabs=1e-13, limit=500)[0]
    assert abs(g10 - (re + 1j * im)) < 1e-10


def test_energy_weighted_rate_is_zeta_derivative(fb):
    res, t, h = fb.left, 0.8, 1e-4
    tab = rate_table(t, res, 1.0, (-2 * h, -h, 0.0, h, 2 * h))
    for g, d in ((tab.g10, tab.d10), (tab.g01, tab.d01)):
        fd = (-g[4] + 8 * g[3] - 8 * g[1] + g[0]) / (12 * h)
        assert fd == pytest.approx(d, rel=1e-8)
    d10, d01 = cg_rate_energy_weighted(t, res, E, fb.feedback, fb.dot)
    assert d10 == pytest.approx(fb.left.gamma0 * math.e * tab.d10, rel=1e-12)
    assert abs(d10.real) < 1e-15 and abs(d01.real) < 1e-15


def test_long_time_limit_approaches_bms(fb):
    res = fb.left
    bms = float(spectral_density(1.0, res, E, fb.feedback)) * fermi_occupation(1.0, res)
    gaps = []
    for t in (1e2, 1e3, 1e4):
        g10, _ = cg_rates(t, res, E, fb.feedback, fb.dot)
        gaps.append(abs(g10.real - bms) / bms)
    assert gaps[2] < gaps[1] < gaps[0] < 1e-2
    assert gaps[1] / gaps[2] == pytest.approx(10.0, rel=0.05)


def test_zero_coupling_gives_zero_rates(fb):
    cfg = fb.with_gamma0(0.0)
    assert cg_rates(1.0, cfg.left, E, cfg.feedback, cfg.dot) == (0j, 0j)


def test_liouvillian_trace_preserving(fb):
    for nu in (E, F):
        L = build_cg_liouvillian(0.7, fb, nu).matrix
        assert np.allclose(L.sum(axis=0), 0.0, atol=1e-15)
        P = propagator(0.7, build_cg_liouvillian(0.7, fb, nu))
        assert np.allclose(P.sum(axis=0), 1.0, atol=1e-14)
        assert np.all(P.real >= 0) and np.allclose(P.imag, 0.0)


def test_counting_field_placement(fb):
    xi = CountingFields(chi_L=0.3)
    L0 = build_cg_liouvillian(1.0, fb, E).matrix
    L = build_cg_liouvillian(1.0, fb, E, xi).matrix
    assert np.allclose(np.diag(L), np.diag(L0))
    gl10, gl01 = cg_rates(1.0, fb.left, E, fb.feedback, fb.dot)
    assert L[0, 1] - L0[0, 1] == pytest.approx(gl01 * (np.exp(0.3j) - 1))
    assert L[1, 0] - L0[1, 0] == pytest.approx(gl10 * (np.exp(-0.3j) - 1))


def test_propagator_identity_and_time_check(fb):
    L = build_cg_liouvillian(1.0, fb, E)
    assert np.array_equal(propagator(0.0, L), np.eye(2))
    with pytest.raises(ValueError):
        propagator(2.0, L)
    Lb = bms_liouvillian(fb, E)
    assert np.allclose(propagator(5.0, Lb), scipy.linalg.expm(5.0 * Lb.matrix))


matrices = arrays(np.float64, (2, 2, 2), elements=st.floats(-30, 30))


@settings(max_examples=200, deadline=None)
@given(matrices)
def test_expm2_matches_scipy(m):
    A = m[0] + 1j * m[1]
    want = scipy.linalg.expm(A)
    scale = max(1.0, np.abs(want).max())
    assert np.allclose(expm2(A), want, rtol=1e-11, atol=1e-11 * scale)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, (2, 2), elements=st.floats(-1e-3, 1e-3)))
def test_expm2_minus_identity_small(A):
    # scipy's expm(A) - I loses the small entries to cancellation; sum the series instead
    with mpmath.workdps(40):
        X = mpmath.matrix(A.tolist())
        term, M = mpmath.eye(2), mpmath.zeros(2)
        for k in range(1, 12):
            term = term * X / k
            M += term
        want = np.array([[float(M[i, j]) for j in range(2)] for i in range(2)])
    scale = max(np.abs(A).max(), 1e-300)
    assert np.allclose(expm2_minus_identity(A).real, want, rtol=1e-12, atol=1e-15 * scale)


def test_degenerate_2x2():
    # defective matrix (Jordan block): the eigen form would divide by s = 0
    A = np.array([[-1.0, 1.0], [0.0, -1.0]])
    assert np.allclose(expm2(A), scipy.linalg.expm(A), atol=1e-15)
    assert np.allclose(expm2(np.zeros((2, 2))), np.eye(2))
