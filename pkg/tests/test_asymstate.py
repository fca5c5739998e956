"""Perturbative asymptotic-state solver against the assembled generator.

The strongest checks here compare every perturbative formula with the
exact null vector (and exact eigenvalues) of the fully assembled
generator at two coupling strengths: residuals must shrink with the
sixth power of the coupling, which no sign or ordering mistake
survives.
"""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tcl4.asymstate import (PerturbativeState, asymptotic_state,
                            coherences2, coherences4, dephasing_rates2,
                            populations0, populations2, populations4,
                            relaxation_rates, sixth_order_rates)
from tcl4.bath import BathSpec, asymp_sd
from tcl4.errors import DomainError, SolvabilityError
from tcl4.generators import Superoperator, r0, r2, r4, r4_divergent_part
from tcl4.systems import gue_system, pure_dephasing, spin_boson_unbiased

OHMIC = BathSpec(lam=0.1, omega_c=10.0, s=1.0)


def zero_super(n):
    return Superoperator(np.zeros((n * n, n * n), dtype=complex))


def pauli_only(p):
    """Superoperator whose only nonzero entries are a population block."""
    n = p.shape[0]
    t = np.zeros((n, n, n, n), dtype=complex)
    idx = np.arange(n)
    t[idx[:, None], idx[:, None], idx[None, :], idx[None, :]] = p
    return Superoperator(t.reshape(n * n, n * n))


@pytest.fixture(scope="module")
def ohmic_ladder():
    """Generators for the same N=3 system at two coupling strengths."""
    out = {}
    for lam in (0.08, 0.04):
        sys = gue_system(3, 11, BathSpec(lam=lam, omega_c=10.0, s=1.0))
        out[lam] = (sys, r0(sys), r2(sys, np.inf), r4(sys, np.inf))
    return out


def cpt_solution(sys, R2, R4):
    e = sys.energies
    p0 = populations0(R2)
    c2 = coherences2(e, R2, p0)
    p2 = populations2(R2, R4, c2, p0)
    c4 = coherences4(e, R2, R4, c2, p2, p0)
    return p0, c2, p2, c4


def exact_null_state(full):
    vec = np.linalg.svd(full)[2][-1].conj()
    n = int(round(np.sqrt(len(vec))))
    rho = vec.reshape(n, n)
    return rho / np.trace(rho)


def test_populations0_is_ground_state_at_zero_temperature():
    sys = gue_system(5, 3, OHMIC)
    p0 = populations0(r2(sys, np.inf))
    assert np.max(np.abs(p0 - np.eye(5)[0])) <= 1e-12


def test_populations0_rejects_pure_dephasing():
    sys = pure_dephasing(3, OHMIC)
    with pytest.raises(DomainError):
        populations0(r2(sys, np.inf))


def test_populations0_rejects_disconnected_network():
    # Levels {0,1} exchange population, level 2 is isolated: the kernel
    # is two-dimensional and no unique asymptotic state exists.
    p = np.array([[-1.0, 0.5, 0.0], [1.0, -0.5, 0.0], [0.0, 0.0, 0.0]])
    with pytest.raises(DomainError):
        populations0(pauli_only(p))


def test_populations0_detects_broken_trace():
    p = np.array([[-1.0, 0.5], [1.0, -0.5]])
    p[0, 0] += 0.1  # columns no longer sum to zero
    with pytest.raises(SolvabilityError):
        populations0(pauli_only(p))


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(min_value=0, max_value=10 ** 6),
       n=st.integers(min_value=2, max_value=5))
def test_population_block_columns_sum_to_zero(seed, n):
    sys = gue_system(n, seed, OHMIC)
    t = r2(sys, np.inf).tensor()
    colsum = np.einsum("nnkk->k", t)
    scale = np.max(np.abs(t))
    assert np.max(np.abs(colsum)) <= 1e-13 * scale
    assert np.max(np.abs(populations0(r2(sys, np.inf)) - np.eye(n)[0])) \
        <= 1e-12


def test_state_matches_exact_null_vector(ohmic_ladder):
    # The exact stationary state of r0+r2+r4 equals the perturbative one
    # up to the first omitted orders: lambda^4 in the populations (the
    # rho4 diagonal is out of scope) and lambda^6 in the coherences.
    # Halving lambda must shrink the residuals by 16 and 64.
    errs = {}
    for lam, (sys, R0, R2, R4) in ohmic_ladder.items():
        rho = exact_null_state(R0.data + R2.data + R4.data)
        p0, c2, p2, c4 = cpt_solution(sys, R2, R4)
        off = ~np.eye(3, dtype=bool)
        errs[lam] = (np.max(np.abs((rho - c2 - c4)[off])),
                     np.max(np.abs(np.diag(rho).real - p0 - p2)))
    assert errs[0.08][0] < 2.5e-4
    assert errs[0.04][0] < 5e-6
    assert errs[0.08][0] / errs[0.04][0] > 40  # lambda^6 scaling
    assert errs[0.04][1] < 3e-4
    assert errs[0.08][1] / errs[0.04][1] > 12  # lambda^4 scaling


def test_rates_match_exact_eigenvalues(ohmic_ladder):
    # Population-sector eigenvalues of the assembled generator are the
    # ones with negligible imaginary part; nu2+nu4 must track them with
    # a lambda^6 error.
    errs = {}
    for lam, (sys, R0, R2, R4) in ohmic_ladder.items():
        spec = relaxation_rates(sys.energies, R2, R4)
        ev = np.linalg.eigvals(R0.data + R2.data + R4.data)
        ev = ev[np.argsort(np.abs(ev.imag))][:3]
        pred = spec.nu2 + spec.nu4
        errs[lam] = (
            max(np.min(np.abs(ev - z)) for z in spec.nu2),
            max(np.min(np.abs(ev - z)) for z in pred),
        )
    assert errs[0.08][1] < 5e-5
    assert errs[0.04][1] < 1e-6
    assert errs[0.08][0] / errs[0.08][1] > 20   # nu4 earns its keep
    assert errs[0.08][1] / errs[0.04][1] > 40   # lambda^6 scaling


def test_two_level_rate_is_golden_rule_total():
    sys = spin_boson_unbiased(OHMIC)
    spec = relaxation_rates(sys.energies, r2(sys, np.inf),
                            r4(sys, np.inf))
    assert spec.nu2[spec.zero_index] == 0.0
    rate = spec.decaying()[0]
    jw = asymp_sd(sys.baths[0], 1.0).gamma.real
    a12sq = abs(sys.couplings[0][0, 1]) ** 2
    assert rate == pytest.approx(-2.0 * a12sq * jw, rel=1e-12)
    assert rate == pytest.approx(-0.05685261170389855, rel=1e-12)


def test_zero_mode_eigenvector_is_populations0(ohmic_ladder):
    sys, _, R2, R4 = ohmic_ladder[0.08]
    spec = relaxation_rates(sys.energies, R2, R4)
    p0 = populations0(R2)
    assert np.max(np.abs(spec.modes[:, spec.zero_index] - p0)) <= 1e-10
    assert abs(spec.nu4[spec.zero_index]) <= 1e-14


def test_decaying_rates_nonpositive_for_random_systems():
    # Spectral positivity makes the golden-rule rate matrix diagonally
    # dominant with negative diagonal, so every decaying eigenvalue
    # lives in the left half plane.  Brute force over 50 draws.
    for seed in range(50):
        rng = np.random.default_rng(1000 + seed)
        n = int(rng.integers(2, 6))
        s = float(rng.choice([0.7, 1.0, 1.3, 1.8]))
        sys = gue_system(n, 1000 + seed,
                         BathSpec(lam=0.1, omega_c=10.0, s=s))
        spec = relaxation_rates(sys.energies, r2(sys, np.inf),
                                zero_super(n))
        dec = spec.decaying()
        assert np.all(dec.real < 0.0)
        for k in range(n):
            if k == spec.zero_index:
                assert spec.modes[:, k].sum() == pytest.approx(1.0)
            else:
                assert abs(spec.modes[:, k].sum()) <= 1e-10


def test_relaxation_rates_reject_degenerate_spectrum():
    p = np.array([[0.0, 0.7, 0.7], [0.0, -0.7, 0.0], [0.0, 0.0, -0.7]])
    with pytest.raises(DomainError):
        relaxation_rates(np.array([0.0, 1.0, 2.3]), pauli_only(p),
                         zero_super(3))


def test_populations2_is_traceless(ohmic_ladder):
    sys, _, R2, R4 = ohmic_ladder[0.08]
    p0, c2, p2, _ = cpt_solution(sys, R2, R4)
    assert abs(p2.sum()) <= 1e-14 * np.max(np.abs(p2))


def test_populations2_rejects_trace_breaking_r4(ohmic_ladder):
    sys, _, R2, R4 = ohmic_ladder[0.08]
    p0 = populations0(R2)
    c2 = coherences2(sys.energies, R2, p0)
    bad = R4.data.copy()
    bad[0, 0] += 1e-3  # population column sum no longer vanishes
    with pytest.raises(SolvabilityError):
        populations2(R2, Superoperator(bad), c2, p0)


def test_homogeneity_in_coupling_strength():
    # rho2 and nu2 carry two powers of lambda, rho4 coherences and nu4
    # four; doubling lambda in the bath must scale them by exactly 4
    # and 16 (the generators consume lambda only through lambda^2 J).
    states = {}
    specs = {}
    for lam in (0.05, 0.10):
        sys = gue_system(3, 7, BathSpec(lam=lam, omega_c=10.0, s=1.2))
        R2, R4 = r2(sys, np.inf), r4(sys, np.inf)
        states[lam] = asymptotic_state(sys, R2, R4)
        specs[lam] = relaxation_rates(sys.energies, R2, R4)
    assert np.allclose(states[0.10].rho2, 4.0 * states[0.05].rho2,
                       rtol=1e-11, atol=0.0)
    assert np.allclose(states[0.10].rho4_coherences,
                       16.0 * states[0.05].rho4_coherences,
                       rtol=1e-11, atol=0.0)
    assert np.allclose(np.sort(specs[0.10].nu2.real),
                       4.0 * np.sort(specs[0.05].nu2.real), rtol=1e-11)
    assert np.allclose(specs[0.10].nu4, 16.0 * specs[0.05].nu4,
                       rtol=1e-9, atol=0.0)


def test_subohmic_state_is_finite_with_divergence_note():
    sys = gue_system(3, 5, BathSpec(lam=0.1, omega_c=10.0, s=0.9))
    state = asymptotic_state(sys)
    assert len(state.divergence_notes) == 1
    assert "0.1" in state.divergence_notes[0]
    c4max = np.max(np.abs(state.rho4_coherences))
    assert 1e-4 < c4max < 1e-2
    assert np.trace(state.rho0) == pytest.approx(1.0, abs=1e-14)
    assert abs(np.trace(state.rho2)) <= 1e-14
    assert np.max(np.abs(np.diag(state.rho4_coherences))) == 0.0
    herm = state.rho2 - state.rho2.conj().T
    assert np.max(np.abs(herm)) <= 1e-12 * np.max(np.abs(state.rho2))


def test_divergent_ground_column_vanishes_with_time():
    # The divergent block feeds the fourth-order coherences only through
    # its ground-state column; at zero temperature that column dies off
    # as t grows (one-sided spectral density), which is why the
    # coherences stay finite even for sub-ohmic baths.
    sys = gue_system(3, 5, BathSpec(lam=0.1, omega_c=10.0, s=0.9))
    off = ~np.eye(3, dtype=bool)
    cols = []
    whole = []
    for t in (20.0, 80.0, 320.0):
        tens = r4_divergent_part(sys, t).tensor()
        cols.append(np.max(np.abs(tens[:, :, 0, 0][off])))
        whole.append(np.max(np.abs(tens)))
    assert cols[0] > cols[1] > cols[2]
    assert cols[2] < 1e-10
    assert whole[2] > 1e-4  # the block itself is alive, only the column dies
    chan = r4(sys, np.inf, allow_divergent=True).divergent_channels
    tens = chan[0][1].reshape(3, 3, 3, 3)
    assert np.max(np.abs(tens[:, :, 0, 0])) <= 1e-15


def test_coherences4_reduces_to_second_order_form(ohmic_ladder):
    # Feeding the zeroth-order populations through the second-order slot
    # with everything else zeroed reproduces the second-order formula;
    # with all lower orders zeroed the output vanishes identically.
    sys, _, R2, _ = ohmic_ladder[0.08]
    n = 3
    p0 = populations0(R2)
    zeros_v = np.zeros(n)
    zeros_m = np.zeros((n, n), dtype=complex)
    again = coherences4(sys.energies, R2, zero_super(n), zeros_m, p0,
                        zeros_v)
    assert np.allclose(again, coherences2(sys.energies, R2, p0),
                       rtol=0.0, atol=1e-16)
    nothing = coherences4(sys.energies, R2, zero_super(n), zeros_m,
                          zeros_v, zeros_v)
    assert np.max(np.abs(nothing)) == 0.0


def test_dephasing_rates_structure():
    sys = gue_system(4, 2, OHMIC)
    dr = dephasing_rates2(r2(sys, np.inf))
    assert np.max(np.abs(np.diag(dr))) == 0.0
    assert np.max(np.abs(dr - dr.conj().T)) == 0.0
    off = ~np.eye(4, dtype=bool)
    assert np.max(dr.real[off]) < 0.0


def test_state_serialization_round_trip():
    sys = gue_system(3, 7, BathSpec(lam=0.05, omega_c=10.0, s=1.2))
    state = asymptotic_state(sys)
    blob = json.dumps(state.to_dict())
    back = json.loads(blob)
    assert back["order_flags"] == {"populations_order": 2,
                                   "coherences_order": 4}
    re2 = np.array(back["rho2"]["re"]) + 1j * np.array(back["rho2"]["im"])
    assert np.allclose(re2, state.rho2, rtol=0.0, atol=1e-15)
    assert isinstance(PerturbativeState(**{
        "rho0": state.rho0, "rho2": state.rho2,
        "rho4_coherences": state.rho4_coherences}), PerturbativeState)


def test_sixth_order_entry_points_are_stubs():
    with pytest.raises(NotImplementedError, match="sixth-order"):
        populations4()
    with pytest.raises(NotImplementedError, match="sixth-order"):
        sixth_order_rates()
