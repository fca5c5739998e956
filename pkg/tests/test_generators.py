"""Generator assembly: structure checks and independent quadrature oracles."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import tcl4.generators as gen
from tcl4.bath import BathSpec, bcf
from tcl4.errors import Divergence, DivergenceError, DomainError
from tcl4.generators import (
    Superoperator,
    TriSDCache,
    _delta_gamma,
    generator_exists,
    overlap_decay_check,
    r0,
    r2,
    r4,
    r4_divergent_part,
    r4_oracle,
    tri_sd,
)
from tcl4.systems import gue_system, pure_dephasing, spin_boson_unbiased

OHMIC = BathSpec(lam=0.1, omega_c=10.0, s=1.0)


def bath(s, lam=0.1, omega_c=10.0):
    return BathSpec(lam=lam, omega_c=omega_c, s=s)


# ---------------------------------------------------------------------------
# zeroth and second order


def test_r0_is_diagonal_with_bohr_eigenvalues():
    sys = gue_system(2, 4, OHMIC)
    sys = type(sys)(energies=np.array([0.0, 1.0]), couplings=sys.couplings,
                    baths=sys.baths)
    r = r0(sys)
    off = r.data - np.diag(np.diag(r.data))
    assert np.max(np.abs(off)) == 0.0
    got = sorted(np.diag(r.data), key=lambda z: z.imag)
    assert np.allclose(got, [-1j, 0.0, 0.0, 1j], atol=1e-15)


def test_r0_trace_preservation_exact():
    r = r0(gue_system(4, 9, OHMIC))
    assert r.trace_defect() == 0.0
    assert r.hermiticity_defect() == 0.0


def test_r2_zero_time_vanishes():
    r = r2(gue_system(3, 2, OHMIC), 0.0)
    assert np.max(np.abs(r.data)) == 0.0


def test_r2_golden_rule_decay_rate():
    # excited-state decay rate of the unbiased two-level model equals the
    # bare spectral density at the splitting: 2|A_12|^2 J(w_21) with
    # |A_12|^2 = 1/2
    sys = spin_boson_unbiased(OHMIC)
    r = r2(sys, np.inf)
    w = 1.0
    jw = (2.0 * np.pi * OHMIC.lam**2 * OHMIC.omega_c
          * (w / OHMIC.omega_c) ** OHMIC.s * np.exp(-w / OHMIC.omega_c))
    elem = r.data[3, 3]  # row (1,1), col (1,1)
    assert elem.imag == pytest.approx(0.0, abs=1e-16)
    assert elem.real == pytest.approx(-jw, rel=1e-12)
    assert elem.real == pytest.approx(-0.05685261170389855, rel=1e-13)


def test_r2_structure_random_system():
    sys = gue_system(5, 11, OHMIC)
    for t in (0.8, np.inf):
        r = r2(sys, t)
        assert r.hermiticity_defect() == 0.0
        assert r.trace_defect() < 1e-12


@settings(max_examples=8, deadline=None)
@given(seed=st.integers(0, 10**6), s=st.sampled_from([0.7, 1.0, 1.6]),
       t=st.floats(0.05, 3.0))
def test_r2_preserves_structure_property(seed, s, t):
    r = r2(gue_system(3, seed, bath(s)), t)
    assert r.hermiticity_defect() == 0.0
    assert r.trace_defect() < 1e-12


def test_superoperator_apply_matches_matrix_action():
    sys = gue_system(3, 6, OHMIC)
    r = r2(sys, 0.7)
    rng = np.random.default_rng(0)
    rho = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    want = (r.data @ rho.reshape(9)).reshape(3, 3)
    assert np.array_equal(r.apply(rho), want)
    assert np.array_equal(r.tensor().reshape(9, 9), r.data)


def test_superoperator_rejects_non_square_block():
    with pytest.raises(DomainError):
        Superoperator(data=np.zeros((3, 3), dtype=complex))


# ---------------------------------------------------------------------------
# frequency-triple kernels against a direct 2D quadrature

# Independent oracle: the un-decomposed forms
#   F: int_0^t dtau DG_a(w1; t, tau) G_b(-w2; t - tau) e^{-i sig tau}
#   C: same with conj(G_b(w2; t - tau))
#   R: same with G_b(w2; tau)
# evaluated with nested Gauss-Legendre panels, the inner Gamma integral
# re-quadratured from scratch at every outer node.


def gl_nodes(edges, order=16):
    x, w = np.polynomial.legendre.leggauss(order)
    mid = 0.5 * (edges[:-1, None] + edges[1:, None])
    half = 0.5 * (edges[1:, None] - edges[:-1, None])
    return (mid + half * x[None, :]).ravel(), (half * w[None, :]).ravel()


def kernel_2d(kind, a, b, w1, w2, w3, t, scale=2):
    sig = w1 + w2 + w3
    osc = max(a.omega_c, b.omega_c, abs(w1), abs(w2), abs(sig))
    n_out = max(8, int(osc * t / 3) + 4) * scale
    tau, wt = gl_nodes(np.linspace(0.0, t, n_out + 1))

    def gamma_at(spec, w, uppers):
        n_in = max(4, int(max(spec.omega_c, abs(w)) * t / 4) + 3) * scale
        u01, v01 = gl_nodes(np.linspace(0.0, 1.0, n_in + 1))
        nodes = uppers[:, None] * u01[None, :]
        vals = bcf(spec, nodes.ravel()).reshape(nodes.shape)
        integ = vals * np.exp(1j * w * nodes) * v01[None, :]
        return integ.sum(axis=1) * uppers

    da = gamma_at(a, w1, np.array([t]))[0] - gamma_at(a, w1, tau)
    if kind == "F":
        second = gamma_at(b, -w2, t - tau)
    elif kind == "C":
        second = np.conj(gamma_at(b, w2, t - tau))
    else:
        second = gamma_at(b, w2, tau)
    return np.sum(da * second * np.exp(-1j * sig * tau) * wt)


def test_kernels_match_2d_quadrature():
    rng = np.random.default_rng(42)
    kinds = ("F", "C", "R")
    svals = (0.7, 1.0, 1.6)
    worst = 0.0
    for i in range(20):
        s = svals[i % 3]
        kind = kinds[(i // 3) % 3]
        a = BathSpec(lam=0.1, omega_c=10.0, s=s)
        b = BathSpec(lam=0.13, omega_c=7.0, s=s)
        w1, w2, w3 = rng.uniform(-8.0, 8.0, size=3)
        t = rng.uniform(0.3, 1.2)
        got = tri_sd(kind, a, b, w1, w2, w3, t).value
        ref = kernel_2d(kind, a, b, w1, w2, w3, t)
        worst = max(worst, abs(got - ref) / abs(ref))
    assert worst < 1e-8


def test_kernel_ratio_limit_is_continuous():
    # the ratio term switches to a frequency derivative below
    # 1e-8 * omega_c; values on either side of the switch must agree
    a = BathSpec(lam=0.1, omega_c=10.0, s=1.3)
    b = BathSpec(lam=0.13, omega_c=7.0, s=1.3)
    lo = tri_sd("R", a, b, 3.0, -1.0, -2.0 + 5e-8, 0.9).value
    hi = tri_sd("R", a, b, 3.0, -1.0, -2.0 + 2e-7, 0.9).value
    assert abs(lo - hi) / abs(hi) < 1e-6


def test_kernel_debug_mode_agrees(monkeypatch):
    monkeypatch.setattr(gen, "DEBUG_LIMIT_CHECK", True)
    a = BathSpec(lam=0.1, omega_c=10.0, s=1.3)
    val = tri_sd("R", a, a, 3.0, -1.0, -2.0 + 5e-8, 0.9).value
    monkeypatch.setattr(gen, "DEBUG_LIMIT_CHECK", False)
    ref = tri_sd("R", a, a, 3.0, -1.0, -2.0 + 5e-8, 0.9).value
    assert val == ref


def test_asymptotic_f_is_pure_ratio():
    from tcl4.bath import asymp_sd

    a = BathSpec(lam=0.1, omega_c=10.0, s=1.2)
    b = BathSpec(lam=0.13, omega_c=7.0, s=1.2)
    w1, w2, w3 = 1.1, -0.4, 0.2
    got = tri_sd("F", a, b, w1, w2, w3, np.inf).value
    want = (1j * asymp_sd(b, -w2).gamma
            * (asymp_sd(a, -w2 - w3).gamma - asymp_sd(a, w1).gamma)
            / (w1 + w2 + w3))
    assert got == pytest.approx(want, rel=1e-13)


def test_finite_kernels_approach_asymptotic_values():
    a = OHMIC
    b = BathSpec(lam=0.13, omega_c=7.0, s=1.0)
    w = (1.0, -0.4, 0.1)
    for kind in ("F", "C", "R"):
        limit = tri_sd(kind, a, b, *w, np.inf).value
        rels = [abs(tri_sd(kind, a, b, *w, t).value - limit) / abs(limit)
                for t in (6.0, 24.0, 96.0)]
        assert rels[0] > rels[1] > rels[2]
        assert rels[2] < 1e-3


def test_zero_triple_defined_as_zero():
    for t in (0.8, np.inf):
        assert tri_sd("R", OHMIC, OHMIC, 0.0, 0.0, 0.0, t).value == 0j


def test_delta_gamma_vanishes_at_upper_endpoint():
    for s, w, t in ((0.7, 2.0, 0.5), (1.0, -3.0, 1.1), (1.6, 0.0, 2.0)):
        assert _delta_gamma(bath(s), w, t, t) == 0j


def test_kernel_input_validation():
    with pytest.raises(DomainError):
        tri_sd("Q", OHMIC, OHMIC, 1.0, 1.0, 1.0, 0.5)
    with pytest.raises(DomainError):
        tri_sd("F", OHMIC, OHMIC, 1.0, 1.0, 1.0, -0.5)


def test_asymptotic_kernel_divergence_flag():
    # flagged exactly when w1 = 0, w2 + w3 = 0, s <= 1 at t = inf
    for s in (0.5, 1.0):
        v = tri_sd("R", bath(s), bath(s), 0.0, 0.7, -0.7, np.inf).value
        assert isinstance(v, Divergence)
        assert v.exponent == pytest.approx(1.0 - s)
    v = tri_sd("R", bath(1.6), bath(1.6), 0.0, 0.7, -0.7, np.inf).value
    assert isinstance(v, complex)


# ---------------------------------------------------------------------------
# fourth order against the triple-integral oracle


def test_r4_matches_oracle_two_level():
    sys = gue_system(2, 1, OHMIC)
    for t in (0.1, 0.5, 2.0):
        opt = r4(sys, t)
        ref = r4_oracle(sys, t)
        scale = np.max(np.abs(ref.data))
        assert np.max(np.abs(opt.data - ref.data)) < 1e-6 * scale


def test_r4_matches_oracle_three_level():
    sys = gue_system(3, 7, BathSpec(lam=0.08, omega_c=5.0, s=1.2))
    opt = r4(sys, 0.6)
    ref = r4_oracle(sys, 0.6)
    scale = np.max(np.abs(ref.data))
    assert np.max(np.abs(opt.data - ref.data)) < 1e-6 * scale


def test_r4_structure():
    r = r4(gue_system(3, 7, BathSpec(lam=0.08, omega_c=5.0, s=1.2)), 0.6)
    assert r.hermiticity_defect() == 0.0
    assert r.trace_defect() < 1e-10


def test_r4_oracle_zero_time_and_structure():
    sys = gue_system(2, 1, OHMIC)
    assert np.max(np.abs(r4_oracle(sys, 0.0).data)) == 0.0
    assert r4_oracle(sys, 0.5).hermiticity_defect() == 0.0


def test_r4_input_validation():
    sys = gue_system(2, 1, OHMIC)
    with pytest.raises(DomainError):
        r4(sys, -0.1)
    warm = BathSpec(lam=0.1, omega_c=10.0, s=1.0, beta=2.0)
    with pytest.raises(DomainError):
        r4(gue_system(2, 1, warm), np.inf)


def test_spin_boson_asymptotic_generator_finite_for_all_s():
    for s in (0.5, 1.0, 2.0):
        r = r4(spin_boson_unbiased(bath(s)), np.inf)
        assert np.all(np.isfinite(r.data))
        assert r.divergent_channels == ()


def test_r4_cache_cold_warm_and_disk_round_trip(tmp_path):
    sys = gue_system(2, 1, OHMIC)
    cache = TriSDCache()
    cold = r4(sys, np.inf, cache=cache)
    assert len(cache) > 0
    warm = r4(sys, np.inf, cache=cache)
    assert np.array_equal(cold.data, warm.data)

    path = str(tmp_path / "kernels.npz")
    cache.save(path)
    loaded = TriSDCache().load(path)
    assert len(loaded) == len(cache)
    again = r4(sys, np.inf, cache=loaded)
    assert np.array_equal(cold.data, again.data)


def test_subohmic_generic_system_divergence_handling():
    sys = gue_system(3, 5, bath(0.9))
    assert not generator_exists(sys)
    with pytest.raises(DivergenceError):
        r4(sys, np.inf)
    r = r4(sys, np.inf, allow_divergent=True)
    assert np.all(np.isfinite(r.data))
    assert len(r.divergent_channels) == 1
    flag, coeff = r.divergent_channels[0]
    assert flag.exponent == pytest.approx(0.1, abs=1e-12)
    assert np.max(np.abs(coeff)) > 0.0
    # the channel assembled from flagged kernels must reproduce the
    # independently derived closed-form divergent block
    ref_flag, ref_coeff = r4_divergent_part(sys, np.inf).divergent_channels[0]
    assert ref_flag.exponent == flag.exponent
    assert np.max(np.abs(coeff - ref_coeff)) < 1e-10 * np.max(np.abs(ref_coeff))


def test_ohmic_generic_asymptotic_generator():
    # dJ/dw is finite at s=1, so the asymptotic generator exists for any
    # coupling; finite-t values must drift toward it
    sys = gue_system(2, 1, OHMIC)
    r_inf = r4(sys, np.inf)
    assert r_inf.divergent_channels == ()
    assert r_inf.hermiticity_defect() == 0.0
    assert r_inf.trace_defect() < 1e-10
    scale = np.max(np.abs(r_inf.data))
    d50 = np.max(np.abs(r4(sys, 50.0).data - r_inf.data)) / scale
    d200 = np.max(np.abs(r4(sys, 200.0).data - r_inf.data)) / scale
    assert d200 < d50
    assert d200 < 5e-3


# ---------------------------------------------------------------------------
# divergent part and existence


def test_divergent_part_structural_zeros():
    t = 37.0
    d = r4_divergent_part(gue_system(3, 3, bath(0.5)), t).tensor()
    for n in range(3):
        for i in range(3):
            assert d[n, n, i, i] == 0j
            assert d[n, i, n, i] == 0j
    assert np.max(np.abs(d)) > 0.0  # generic coupling keeps the rest alive


def test_divergent_part_counterexamples_vanish():
    for s in (0.5, 1.0, 2.0):
        for make in (spin_boson_unbiased, lambda b: pure_dephasing(3, b)):
            sys = make(bath(s))
            for t in (12.0, np.inf):
                d = r4_divergent_part(sys, t)
                assert np.max(np.abs(d.data)) == 0.0
                assert d.divergent_channels == ()


def test_divergent_part_growth_exponent_subohmic():
    sys = gue_system(3, 3, bath(0.5))
    ts = np.geomspace(10.0, 1000.0, 7)
    norms = [np.linalg.norm(r4_divergent_part(sys, t).data) for t in ts]
    slope = np.polyfit(np.log(ts), np.log(norms), 1)[0]
    assert slope == pytest.approx(0.5, abs=0.05)


def test_divergent_part_asymptotic_channel_bookkeeping():
    d = r4_divergent_part(gue_system(3, 3, bath(0.5)), np.inf)
    assert np.max(np.abs(d.data)) == 0.0  # single bath, all of it diverges
    assert len(d.divergent_channels) == 1
    assert d.divergent_channels[0][0].exponent == pytest.approx(0.5)


def test_generator_existence_cases():
    assert generator_exists(spin_boson_unbiased(bath(0.5)))
    assert generator_exists(pure_dephasing(3, bath(0.5)))
    assert not generator_exists(gue_system(3, 5, bath(0.9)))
    assert generator_exists(gue_system(3, 5, bath(1.0)))
    assert generator_exists(gue_system(3, 5, bath(1.2)))


# ---------------------------------------------------------------------------
# overlap integral decay


def test_overlap_decay_ohmic_two_decades():
    # t^{-2} falloff: four orders of magnitude over t in [1, 100]
    rep = overlap_decay_check(OHMIC, 5.0, 5.0, 0.0, [1.0, 10.0, 100.0])
    ratio = rep["magnitude"][-1] / rep["magnitude"][0]
    assert ratio < 2e-4
    assert rep["exponent"] == pytest.approx(-2.0, abs=0.25)


def test_overlap_decay_subohmic_exponent():
    rep = overlap_decay_check(bath(0.7), 4.0, 2.5, 1.5,
                              np.geomspace(1.0, 100.0, 9))
    assert rep["exponent"] <= -1.2


def test_overlap_zero_time_entry():
    rep = overlap_decay_check(OHMIC, 5.0, 5.0, 0.0, [0.0, 0.5, 1.0])
    assert rep["magnitude"][0] == 0.0


def test_overlap_rejects_unsorted_grid():
    with pytest.raises(DomainError):
        overlap_decay_check(OHMIC, 1.0, 1.0, 0.0, [1.0, 0.5])
