"""Bath spectral functions: closed forms against quadrature oracles."""

import numpy as np
import pytest
import scipy.integrate
from hypothesis import given, settings, strategies as st

from tcl4.bath import (
    BathSpec,
    SpectralValue,
    asymp_sd,
    bcf,
    d_timed_sd_domega,
    djdw0,
    dsdw0,
    kk_check,
    sd_zero_temperature,
    timed_sd,
    timed_sd_tail,
    van_hove_boson_number,
)
from tcl4.errors import Divergence, DivergenceError, DomainError
from tcl4.quad import QuadSpec, integrate_time

TIGHT = QuadSpec(abs_tol=1e-15, rel_tol=1e-13)


def test_bathspec_validation():
    for bad in (dict(lam=0.0), dict(omega_c=-1.0), dict(s=0.0), dict(beta=0.0)):
        kw = dict(lam=0.1, omega_c=1.0, s=1.0, beta=np.inf)
        kw.update(bad)
        with pytest.raises(DomainError):
            BathSpec(**kw)


def test_s_snaps_to_ohmic():
    assert BathSpec(lam=0.1, omega_c=1.0, s=1.0 + 1e-10).s == 1.0
    assert BathSpec(lam=0.1, omega_c=1.0, s=1.0 + 1e-6).s != 1.0


def test_zero_temperature_flag():
    assert BathSpec(lam=0.1, omega_c=1.0, s=1.0).zero_temperature
    assert not BathSpec(lam=0.1, omega_c=1.0, s=1.0, beta=3.0).zero_temperature


def test_bcf_at_zero_time():
    spec = BathSpec(lam=0.1, omega_c=10.0, s=1.0)
    assert bcf(spec, 0.0) == pytest.approx(2.0, rel=1e-14)


def test_bcf_real_part_zero_crossing():
    # (s+1) arctan(w_c t) = pi/2 at t = 1/w_c for the Ohmic bath
    spec = BathSpec(lam=0.1, omega_c=10.0, s=1.0)
    assert bcf(spec, 0.1).real == pytest.approx(0.0, abs=1e-15)


def test_bcf_finite_beta_against_scipy():
    spec = BathSpec(lam=0.1, omega_c=10.0, s=1.0, beta=1.0)
    t = 0.03
    got = bcf(spec, t)

    def fre(w):
        return (sd_zero_temperature(spec, w) / np.tanh(0.5 * spec.beta * w)
                * np.cos(w * t) / np.pi)

    def fim(w):
        return -sd_zero_temperature(spec, w) * np.sin(w * t) / np.pi

    re, _ = scipy.integrate.quad(fre, 0, np.inf, limit=500, epsabs=1e-13)
    im, _ = scipy.integrate.quad(fim, 0, np.inf, limit=500, epsabs=1e-13)
    assert abs(got - complex(re, im)) < 1e-9


def test_bcf_imaginary_part_beta_independent():
    t = 0.7
    vals = [bcf(BathSpec(lam=0.1, omega_c=2.0, s=1.3, beta=b), t).imag
            for b in (np.inf, 10.0, 1.0)]
    assert max(vals) - min(vals) < 1e-9


def test_timed_sd_zero_time():
    spec = BathSpec(lam=0.2, omega_c=3.0, s=0.8)
    assert timed_sd(spec, 1.1, 0.0) == 0j
    assert timed_sd(spec, 0.0, 0.0) == 0j


def test_timed_sd_zero_frequency_ohmic():
    spec = BathSpec(lam=0.1, omega_c=10.0, s=1.0)
    t = 0.4
    want = 2j * spec.lam**2 * spec.omega_c * (
        (1.0 + 1j * spec.omega_c * t) ** -1.0 - 1.0)
    assert timed_sd(spec, 0.0, t) == pytest.approx(want, rel=1e-13)


@pytest.mark.parametrize("s", [0.4, 0.7, 1.0, 1.6, 2.5])
def test_timed_sd_closed_form_vs_quadrature(s):
    spec = BathSpec(lam=0.1, omega_c=2.0, s=s)
    for w, t in [(-1.7, 0.4), (-0.3, 2.5), (0.5, 7.0), (2.9, 1.1), (1.1, 20.0)]:
        closed = timed_sd(spec, w, t)

        def f(tau):
            return bcf(spec, tau) * np.exp(1j * w * tau)

        ref, _ = integrate_time(f, 0.0, t, carrier_freq=w, spec=TIGHT)
        assert abs(closed - ref) <= 1e-10 * abs(ref)


def test_timed_sd_vectorized_matches_scalar():
    spec = BathSpec(lam=0.1, omega_c=2.0, s=1.4)
    ts = np.array([0.0, 0.3, 1.7, 9.0])
    batch = timed_sd(spec, 0.8, ts)
    singles = np.array([timed_sd(spec, 0.8, t) for t in ts])
    assert np.array_equal(batch, singles)


def test_tail_complements_timed_sd():
    for s in (0.6, 1.0, 2.2):
        spec = BathSpec(lam=0.15, omega_c=1.5, s=s)
        for w in (-1.2, 0.0, 0.9):
            full = asymp_sd(spec, w).gamma
            for t in (0.0, 0.8, 12.0):
                lhs = timed_sd_tail(spec, w, t)
                rhs = full - timed_sd(spec, w, t)
                assert abs(lhs - rhs) <= 1e-12 * max(abs(full), abs(lhs))


def test_tail_requires_zero_temperature():
    spec = BathSpec(lam=0.1, omega_c=1.0, s=1.0, beta=2.0)
    with pytest.raises(DomainError):
        timed_sd_tail(spec, 0.5, 1.0)


def test_asymp_sd_heaviside():
    spec = BathSpec(lam=0.1, omega_c=2.0, s=0.7)
    for w in (-5.0, -0.01):
        assert asymp_sd(spec, w).J == pytest.approx(0.0, abs=1e-13)


def test_asymp_sd_matches_power_law():
    for s in (0.5, 1.0, 2.3):
        spec = BathSpec(lam=0.1, omega_c=2.0, s=s)
        for w in (0.3, 1.7, 5.0):
            sv = asymp_sd(spec, w)
            want = (2 * np.pi * spec.lam**2 * spec.omega_c
                    * (w / spec.omega_c) ** s * np.exp(-w / spec.omega_c))
            assert sv.J == pytest.approx(want, rel=1e-12)


def test_principal_density_at_zero():
    spec = BathSpec(lam=0.1, omega_c=10.0, s=1.0)
    assert asymp_sd(spec, 0.0).S == pytest.approx(-0.2, rel=1e-13)
    assert asymp_sd(spec, 0.0).J == 0.0


def test_spectral_value_gamma_property():
    sv = SpectralValue(J=0.25, S=-0.5)
    assert sv.gamma == 0.25 - 0.5j


def test_kms_example():
    spec = BathSpec(lam=0.1, omega_c=1.0, s=1.0, beta=2.0)
    ratio = asymp_sd(spec, -0.7).J / asymp_sd(spec, 0.7).J
    assert ratio == pytest.approx(np.exp(-1.4), rel=1e-10)


@settings(max_examples=30, deadline=None)
@given(
    w=st.floats(0.05, 4.0),
    beta=st.floats(0.2, 20.0),
    s=st.floats(0.3, 2.8),
)
def test_kms_property(w, beta, s):
    spec = BathSpec(lam=0.1, omega_c=1.0, s=s, beta=beta)
    jp = asymp_sd(spec, w).J
    jm = asymp_sd(spec, -w).J
    assert jp > 0
    assert jm == pytest.approx(np.exp(-beta * w) * jp, rel=1e-10)


def test_finite_beta_zero_frequency():
    ohmic = BathSpec(lam=0.1, omega_c=1.0, s=1.0, beta=4.0)
    assert asymp_sd(ohmic, 0.0).J == pytest.approx(
        2 * np.pi * ohmic.lam**2 / ohmic.beta, rel=1e-12)
    soft = BathSpec(lam=0.1, omega_c=1.0, s=1.5, beta=4.0)
    assert asymp_sd(soft, 0.0).J == 0.0
    sub = BathSpec(lam=0.1, omega_c=1.0, s=0.7, beta=4.0)
    with pytest.raises(DivergenceError):
        asymp_sd(sub, 1e-8)


def test_finite_beta_gamma_against_time_domain():
    spec = BathSpec(lam=0.1, omega_c=1.0, s=1.2, beta=2.0)
    w = 0.7

    def f(t):
        return np.array([bcf(spec, tt) * np.exp(1j * w * tt)
                         for tt in np.atleast_1d(t)])

    ref, _ = integrate_time(f, 0.0, np.inf, carrier_freq=w,
                            spec=QuadSpec(abs_tol=1e-10, rel_tol=1e-8))
    sv = asymp_sd(spec, w)
    assert sv.J == pytest.approx(float(np.real(ref)), abs=2e-9)
    assert sv.S == pytest.approx(float(np.imag(ref)), abs=2e-9)


def test_sd_slope_near_zero():
    spec = BathSpec(lam=0.1, omega_c=2.0, s=1.37)
    w = np.array([1e-4, 1e-3, 1e-2]) * spec.omega_c
    j = np.array([asymp_sd(spec, x).J for x in w])
    slope = np.polyfit(np.log(w), np.log(j), 1)[0]
    assert slope == pytest.approx(spec.s, abs=0.01)


def test_d_timed_sd_zero_time():
    spec = BathSpec(lam=0.1, omega_c=2.0, s=0.9)
    assert d_timed_sd_domega(spec, 0.7, 0.0) == 0j
    assert d_timed_sd_domega(spec, 0.0, 0.0) == 0j


@pytest.mark.parametrize("s", [0.5, 1.0, 1.9])
def test_d_timed_sd_against_quadrature(s):
    spec = BathSpec(lam=0.1, omega_c=2.0, s=s)
    for w in (0.0, -0.7, 1.3):
        for t in (0.5, 6.0):
            closed = d_timed_sd_domega(spec, w, t)

            def f(tau):
                return 1j * tau * bcf(spec, tau) * np.exp(1j * w * tau)

            ref, _ = integrate_time(f, 0.0, t, carrier_freq=w, spec=TIGHT)
            assert abs(closed - ref) <= 1e-9 * abs(ref)


def test_d_timed_sd_ohmic_limit():
    spec = BathSpec(lam=0.05, omega_c=1.0, s=1.0)
    val = d_timed_sd_domega(spec, 0.0, 1e6)
    assert val.real == pytest.approx(np.pi * spec.lam**2, abs=2e-8)


def test_d_timed_sd_subohmic_growth_exponent():
    spec = BathSpec(lam=0.1, omega_c=1.0, s=0.5)
    ts = np.geomspace(1e2, 1e4, 9)
    re = np.array([d_timed_sd_domega(spec, 0.0, t).real for t in ts])
    slope = np.polyfit(np.log(ts), np.log(re), 1)[0]
    assert slope == pytest.approx(1.0 - spec.s, abs=0.02)


def test_d_timed_sd_converges_to_djdw0():
    # s=1.5 approaches its limit only as t^{-1/2}; check the residual and
    # its decay rate rather than an absolute tolerance
    spec = BathSpec(lam=0.1, omega_c=1.0, s=1.5)
    r5 = d_timed_sd_domega(spec, 0.0, 1e5).real - djdw0(spec)
    r7 = d_timed_sd_domega(spec, 0.0, 1e7).real - djdw0(spec)
    assert abs(r5) < 2e-4
    assert r7 / r5 == pytest.approx(0.1, rel=0.2)


def test_djdw0_piecewise():
    assert djdw0(BathSpec(lam=0.1, omega_c=1.0, s=1.5)) == 0.0
    assert djdw0(BathSpec(lam=0.05, omega_c=1.0, s=1.0)) == pytest.approx(
        np.pi * 0.0025)
    flag = djdw0(BathSpec(lam=0.1, omega_c=1.0, s=0.6))
    assert isinstance(flag, Divergence)
    assert flag.exponent == pytest.approx(0.4)


def test_dsdw0_piecewise():
    from tcl4.specfun import gamma

    spec = BathSpec(lam=0.1, omega_c=1.0, s=1.5)
    assert dsdw0(spec) == pytest.approx(-2 * 0.01 * gamma(0.5), rel=1e-13)
    assert isinstance(dsdw0(BathSpec(lam=0.1, omega_c=1.0, s=0.8)), Divergence)
    log_flag = dsdw0(BathSpec(lam=0.1, omega_c=1.0, s=1.0))
    assert isinstance(log_flag, Divergence)
    assert log_flag.exponent == 0.0


def test_divergence_flag_never_floats():
    flag = dsdw0(BathSpec(lam=0.1, omega_c=1.0, s=0.8))
    with pytest.raises(DivergenceError):
        float(flag)


def test_kk_check_ohmic_grid():
    spec = BathSpec(lam=0.1, omega_c=2.0, s=1.0)
    grid = np.array([-3.0, -1.0, -0.3, 0.3, 1.0, 3.0]) * spec.omega_c
    assert kk_check(spec, grid) <= 1e-7 * spec.lam**2 * spec.omega_c


def test_kk_check_zero_frequency_superohmic():
    spec = BathSpec(lam=0.1, omega_c=2.0, s=2.0)
    assert kk_check(spec, [0.0]) <= 1e-10 * spec.lam**2 * spec.omega_c


def test_kk_check_rejects_finite_beta():
    with pytest.raises(DomainError):
        kk_check(BathSpec(lam=0.1, omega_c=1.0, s=1.0, beta=1.0), [0.5])


def test_van_hove_zero_time():
    assert van_hove_boson_number(BathSpec(lam=0.1, omega_c=2.0, s=1.3), 0.0) == 0.0


def test_van_hove_asymptote_matches_dsdw0():
    spec = BathSpec(lam=0.3, omega_c=1.0, s=2.0)
    limit = van_hove_boson_number(spec, np.inf)
    assert limit == pytest.approx(4 * spec.lam**2, rel=1e-13)
    assert limit == pytest.approx(-2 * dsdw0(spec), rel=1e-13)


@pytest.mark.parametrize("s,t", [(2.0, 3.0), (0.5, 5.0), (1.0, 2.0)])
def test_van_hove_against_quadrature(s, t):
    spec = BathSpec(lam=0.1, omega_c=2.0, s=s)
    got = van_hove_boson_number(spec, t)

    def f(w):
        return (2 / np.pi) * sd_zero_temperature(spec, w) \
            * (1 - np.cos(w * t)) / w**2

    ref, _ = scipy.integrate.quad(f, 0, np.inf, limit=400, epsabs=1e-13)
    assert got == pytest.approx(ref, abs=1e-8)


def test_van_hove_subohmic_growth():
    # fit far enough out that the constant offset no longer biases the slope
    spec = BathSpec(lam=0.1, omega_c=1.0, s=0.5)
    ts = np.geomspace(1e4, 1e8, 9)
    n = np.array([van_hove_boson_number(spec, t) for t in ts])
    slope = np.polyfit(np.log(ts), np.log(n), 1)[0]
    assert slope == pytest.approx(0.5, abs=0.02)


def test_van_hove_continuous_through_ohmic():
    t = 7.0
    at_one = van_hove_boson_number(BathSpec(lam=0.1, omega_c=1.0, s=1.0), t)
    near = van_hove_boson_number(BathSpec(lam=0.1, omega_c=1.0, s=1.0 + 1e-7), t)
    assert near == pytest.approx(at_one, rel=1e-5)


def test_van_hove_divergence_flag():
    spec = BathSpec(lam=0.1, omega_c=1.0, s=0.9)
    with pytest.raises(DivergenceError):
        van_hove_boson_number(spec, np.inf)
