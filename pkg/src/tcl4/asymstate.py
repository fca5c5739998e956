"""Perturbative corrections to the asymptotic state and its decay rates.

The asymptotic generator splits into a free part (diagonal, Bohr
rotations), a second-order part and a fourth-order part, each carrying
its powers of the coupling strength.  Expanding the null-vector problem
R rho = 0 order by order turns it into a chain of small linear systems
on the population sector plus explicit division formulas for the
coherences.  Everything here consumes asymptotic Superoperators built
elsewhere; no kernel integrals are evaluated in this module.

Order bookkeeping: populations come out correct through second order
and coherences through fourth.  Fourth-order populations (and anything
at sixth order) would need the sixth-order generator, which this
library does not build; the corresponding entry points exist but only
document that dependency.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DivergenceError, DomainError, SolvabilityError
from .generators import Superoperator, r2 as _r2, r4 as _r4
from .systems import SystemSpec

__all__ = [
    "PerturbativeState",
    "RelaxationSpectrum",
    "asymptotic_state",
    "coherences2",
    "coherences4",
    "dephasing_rates2",
    "populations0",
    "populations2",
    "populations4",
    "relaxation_rates",
    "sixth_order_rates",
]

# Relative floor under which the population block's zero singular value
# must sit, and above which the next one must stay for the kernel to
# count as one-dimensional.
_NULL_TOL = 1e-10
_GAP_TOL = 1e-7


def _pauli_block(r: Superoperator) -> np.ndarray:
    """Population-sector block P[n, k] = R_{nn,kk}.

    Hermiticity of the generator pins these entries to the real axis;
    the imaginary residue is roundoff and is dropped after a check.
    """
    t = r.tensor()
    n = r.n
    block = t[np.arange(n)[:, None], np.arange(n)[:, None],
              np.arange(n)[None, :], np.arange(n)[None, :]]
    scale = float(np.max(np.abs(block))) or 1.0
    worst = float(np.max(np.abs(block.imag)))
    if worst > 1e-12 * scale:
        raise SolvabilityError(
            f"population block is not real (imag {worst:.3e} vs scale "
            f"{scale:.3e}); the generator lost hermiticity")
    return block.real.copy()


def _check_channels_population_free(r: Superoperator) -> None:
    # Divergent channels never touch the population sector (their
    # secular entries vanish identically), so the finite part is the
    # whole story for every solve below.  Guard anyway.
    for flag, mat in r.divergent_channels:
        t = mat.reshape(r.n, r.n, r.n, r.n)
        idx = np.arange(r.n)
        block = t[idx[:, None], idx[:, None], idx[None, :], idx[None, :]]
        if float(np.max(np.abs(block))) > 1e-12 * (np.max(np.abs(mat)) or 1.0):
            raise DivergenceError(
                "a divergent channel leaks into the population sector "
                f"(growth exponent {flag.exponent}); cannot solve")


def populations0(r2_asym: Superoperator) -> np.ndarray:
    """Zeroth-order populations: the normalized kernel of the Pauli block.

    The block's columns sum to zero (trace preservation), so a kernel
    vector always exists; genericity of the coupling makes it unique.
    A second near-zero singular value means the golden-rule network is
    disconnected (pure dephasing being the extreme case) and no single
    asymptotic state is selected.
    """
    p = _pauli_block(r2_asym)
    u, s, vh = np.linalg.svd(p)
    scale = s[0]
    if scale == 0.0:
        raise DomainError(
            "population block vanishes: coupling drives no transitions")
    if s[-1] > _NULL_TOL * scale:
        raise SolvabilityError(
            f"population block has no kernel (smallest singular value "
            f"{s[-1]:.3e} vs scale {scale:.3e}); trace preservation broken")
    if len(s) > 1 and s[-2] <= _GAP_TOL * scale:
        raise DomainError(
            "population block kernel is not one-dimensional (second "
            f"singular value {s[-2]:.3e} vs scale {scale:.3e}); the "
            "transition network does not select a unique asymptotic state")
    vec = vh[-1].conj()
    total = vec.sum()
    if abs(total) < 1e-8:
        raise DomainError(
            "kernel vector is traceless; it cannot be normalized to a "
            "probability vector")
    vec = vec / total
    if float(np.max(np.abs(vec.imag))) > 1e-12:
        raise SolvabilityError("kernel vector has an imaginary part")
    return vec.real


def _omega(energies) -> np.ndarray:
    e = np.asarray(energies, dtype=float)
    om = e[:, None] - e[None, :]
    off = ~np.eye(len(e), dtype=bool)
    if np.any(om[off] == 0.0):
        raise DomainError(
            "degenerate energies: nondegenerate perturbation theory "
            "cannot divide by a zero Bohr frequency")
    return om


def _coherence_update(energies, r: Superoperator, diag: np.ndarray,
                      offdiag=None) -> np.ndarray:
    """Coherence division step shared by both orders.

    Builds (-i/w_ij) [ sum_k R_{ij,kk} diag_k + sum_{l!=m} R_{ij,lm}
    offdiag_{lm} ] on i != j, zero on the diagonal.
    """
    t = r.tensor()
    n = r.n
    idx = np.arange(n)
    src = np.einsum("ijkk,k->ij", t, np.asarray(diag, dtype=complex))
    if offdiag is not None:
        od = np.asarray(offdiag, dtype=complex).copy()
        od[idx, idx] = 0.0
        src = src + np.einsum("ijlm,lm->ij", t, od)
    om = _omega(energies)
    out = np.zeros((n, n), dtype=complex)
    off = ~np.eye(n, dtype=bool)
    out[off] = -1j * src[off] / om[off]
    return out


def coherences2(energies, r2_asym: Superoperator,
                pops0: np.ndarray) -> np.ndarray:
    """Second-order coherences (-i/w_ij) sum_k R2_{ij,kk} rho0_k."""
    return _coherence_update(energies, r2_asym, pops0)


def populations2(r2_asym: Superoperator, r4_asym: Superoperator,
                 coh2: np.ndarray, pops0: np.ndarray) -> np.ndarray:
    """Second-order population shift of the asymptotic state.

    Solves the singular system P x = b with the trace-zero row appended,
    where b collects the fourth-order secular feed and the second-order
    coherence backaction.  Solvability of the unaugmented system is
    exactly trace preservation of the fourth-order generator, so the
    residual check doubles as an assembly audit of the inputs.
    """
    _check_channels_population_free(r4_asym)
    p = _pauli_block(r2_asym)
    n = p.shape[0]
    t2 = r2_asym.tensor()
    t4 = r4_asym.tensor()
    idx = np.arange(n)
    od = np.asarray(coh2, dtype=complex).copy()
    od[idx, idx] = 0.0
    b = -np.einsum("nnkk,k->n", t4, np.asarray(pops0, dtype=complex)) \
        - np.einsum("nnlm,lm->n", t2, od)
    scale = float(np.linalg.norm(b)) or 1.0
    if float(np.max(np.abs(b.imag))) > 1e-12 * scale:
        raise SolvabilityError("population source term is not real")
    b = b.real
    if abs(b.sum()) > 1e-10 * scale:
        raise SolvabilityError(
            f"source term has a nonzero total ({b.sum():.3e} vs norm "
            f"{scale:.3e}): the fourth-order generator does not preserve "
            "the trace")
    aug = np.vstack([p, np.ones((1, n))])
    rhs = np.concatenate([b, [0.0]])
    x, *_ = np.linalg.lstsq(aug, rhs, rcond=None)
    resid = float(np.linalg.norm(p @ x - b))
    if resid > 1e-10 * scale:
        raise SolvabilityError(
            f"augmented solve left a residual {resid:.3e} (rhs norm "
            f"{scale:.3e}); the system is inconsistent")
    return x


def coherences4(energies, r2_asym: Superoperator, r4_asym: Superoperator,
                coh2: np.ndarray, pops2: np.ndarray,
                pops0: np.ndarray) -> np.ndarray:
    """Fourth-order coherences from the second-order state and R4.

    Any divergent channel riding on the fourth-order generator is
    contracted against the zeroth-order populations before being
    dropped: at zero temperature that contraction vanishes identically
    (the ground-state column of the channel is empty because the
    spectral density is one-sided), which is what keeps these
    coherences finite even for strongly sub-Ohmic baths.
    """
    out = _coherence_update(energies, r2_asym, pops2, coh2)
    out = out + _coherence_update(energies, r4_asym, pops0)
    n = r4_asym.n
    for flag, mat in r4_asym.divergent_channels:
        t = mat.reshape(n, n, n, n)
        feed = np.einsum("ijkk,k->ij", t, np.asarray(pops0, dtype=complex))
        if float(np.max(np.abs(feed))) > 1e-12 * (np.max(np.abs(mat)) or 1.0):
            raise DivergenceError(
                "divergent channel couples to the zeroth-order "
                f"populations (growth exponent {flag.exponent}); the "
                "fourth-order coherences do not converge")
    return out


def dephasing_rates2(r2_asym: Superoperator) -> np.ndarray:
    """Second-order decay rates of the coherence sectors.

    Entry (n, m) with n != m is the diagonal generator element seen by
    that coherence; its real part is the dephasing rate on top of the
    Bohr rotation.  Diagonal entries are zero placeholders.  Reported
    for diagnostics only, nothing downstream consumes them.
    """
    t = r2_asym.tensor()
    n = r2_asym.n
    ni, mi = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    out = t[ni, mi, ni, mi].copy()
    out[np.arange(n), np.arange(n)] = 0.0
    return out


@dataclass(frozen=True)
class RelaxationSpectrum:
    """Population-sector decay rates through fourth order.

    nu2 holds the second-order eigenvalues with the stationary mode
    pinned to exactly zero, nu4 the fourth-order corrections obtained
    by projecting the rank-deficient correction system onto each left
    eigenvector.  modes stores the population eigenvectors columnwise:
    the stationary column sums to one, every decaying column to zero.
    """

    nu2: np.ndarray
    nu4: np.ndarray
    modes: np.ndarray
    zero_index: int

    def decaying(self) -> np.ndarray:
        keep = np.ones(len(self.nu2), dtype=bool)
        keep[self.zero_index] = False
        return self.nu2[keep]


def relaxation_rates(energies, r2_asym: Superoperator,
                     r4_asym: Superoperator) -> RelaxationSpectrum:
    """Eigenvalues of the population sector with fourth-order shifts.

    The second-order rates are plain eigenvalues of the Pauli block.
    Their corrections come from the solvability condition of the
    correction system: projecting its right-hand side onto the matching
    left eigenvector isolates nu4 without ever inverting the singular
    operator.  Clustered second-order eigenvalues make those projections
    meaningless, so near-degeneracy is an error, not a warning.
    """
    _check_channels_population_free(r4_asym)
    p = _pauli_block(r2_asym)
    n = p.shape[0]
    vals, vl, vr = scipy.linalg.eig(p, left=True, right=True)
    scale = float(np.max(np.abs(vals))) or 1.0
    gaps = np.abs(vals[:, None] - vals[None, :])[~np.eye(n, dtype=bool)]
    if n > 1 and float(gaps.min()) <= 1e-8 * scale:
        raise DomainError(
            f"second-order rates are degenerate (smallest gap "
            f"{gaps.min():.3e} vs scale {scale:.3e}); per-mode corrections "
            "are not defined")
    zero = int(np.argmin(np.abs(vals)))
    if abs(vals[zero]) > _NULL_TOL * scale:
        raise SolvabilityError(
            f"no stationary mode: smallest rate {abs(vals[zero]):.3e} "
            f"vs scale {scale:.3e}")

    t2 = r2_asym.tensor()
    t4 = r4_asym.tensor()
    nu2 = np.array(vals, dtype=complex)
    nu2[zero] = 0.0
    nu4 = np.zeros(n, dtype=complex)
    modes = np.zeros((n, n), dtype=complex)
    for k in range(n):
        right = vr[:, k]
        if k == zero:
            right = right / right.sum()
        else:
            lead = int(np.argmax(np.abs(right)))
            right = right / right[lead]
            if abs(right.sum()) > 1e-10 * float(np.max(np.abs(right))):
                raise SolvabilityError(
                    "decaying mode is not traceless; left ones-vector "
                    "is not in the kernel of the transposed block")
        modes[:, k] = right
        coh = _coherence_update(energies, r2_asym, right)
        b = -np.einsum("nnkk,k->n", t4, right) \
            - np.einsum("nnlm,lm->n", t2, coh)
        left = vl[:, k]
        weight = np.vdot(left, right)
        if abs(weight) < 1e-8 * float(
                np.linalg.norm(left) * np.linalg.norm(right)):
            raise SolvabilityError(
                "left/right eigenvectors are nearly orthogonal; the "
                "projection for nu4 is ill-conditioned")
        nu4[k] = -np.vdot(left, b) / weight
    return RelaxationSpectrum(nu2=nu2, nu4=nu4, modes=modes, zero_index=zero)


@dataclass(frozen=True)
class PerturbativeState:
    """Asymptotic state corrections, populations to second order and
    coherences to fourth.

    rho0 and rho2 are full density-matrix corrections (rho0 carries the
    trace, rho2 is traceless); rho4_coherences holds only off-diagonal
    entries because the matching population shift sits one generator
    order beyond this library.  order_flags records that split and
    divergence_notes whatever channels were examined and dropped.
    """

    rho0: np.ndarray
    rho2: np.ndarray
    rho4_coherences: np.ndarray
    order_flags: dict = field(default_factory=dict)
    divergence_notes: tuple = ()

    def to_dict(self) -> dict:
        def split(m):
            return {"re": np.asarray(m).real.tolist(),
                    "im": np.asarray(m).imag.tolist()}
        return {
            "rho0": split(self.rho0),
            "rho2": split(self.rho2),
            "rho4_coherences": split(self.rho4_coherences),
            "order_flags": dict(self.order_flags),
            "divergence_notes": list(self.divergence_notes),
        }


def asymptotic_state(sys: SystemSpec, r2_asym: Superoperator = None,
                     r4_asym: Superoperator = None,
                     cache=None) -> PerturbativeState:
    """Assemble the perturbative asymptotic state for one system.

    Generators may be passed in to reuse existing work; missing ones
    are built at t = infinity (divergent fourth-order channels are
    tolerated here because the state only ever contracts them against
    the ground-state column, which vanishes at zero temperature).
    """
    if r2_asym is None:
        r2_asym = _r2(sys, np.inf)
    if r4_asym is None:
        r4_asym = _r4(sys, np.inf, cache=cache, allow_divergent=True)
    e = sys.energies
    p0 = populations0(r2_asym)
    c2 = coherences2(e, r2_asym, p0)
    p2 = populations2(r2_asym, r4_asym, c2, p0)
    c4 = coherences4(e, r2_asym, r4_asym, c2, p2, p0)
    notes = tuple(
        f"fourth-order channel with growth exponent {flag.exponent:g} "
        "dropped: its contraction with the zeroth-order populations "
        "vanishes at zero temperature"
        for flag, _ in r4_asym.divergent_channels)
    rho0 = np.diag(p0.astype(complex))
    rho2 = c2 + np.diag(p2.astype(complex))
    flags = {"populations_order": 2, "coherences_order": 4}
    state = PerturbativeState(rho0=rho0, rho2=rho2, rho4_coherences=c4,
                              order_flags=flags, divergence_notes=notes)
    if abs(np.trace(state.rho2)) > 1e-12 * (np.max(np.abs(rho2)) or 1.0):
        raise SolvabilityError("second-order correction is not traceless")
    herm = float(np.max(np.abs(rho2 - rho2.conj().T)))
    if herm > 1e-10 * (np.max(np.abs(rho2)) or 1.0):
        raise SolvabilityError("second-order correction is not hermitian")
    return state


def populations4(*args, **kwargs):
    """Fourth-order populations are out of reach of this library.

    Their defining system feeds on the sixth-order generator the same
    way the second-order populations feed on the fourth-order one.  No
    sixth-order generator, no fourth-order populations.
    """
    raise NotImplementedError(
        "fourth-order populations require the sixth-order generator, "
        "which this library does not build")


def sixth_order_rates(*args, **kwargs):
    """Sixth-order rate corrections: same missing dependency."""
    raise NotImplementedError(
        "sixth-order rate corrections require the sixth-order generator, "
        "which this library does not build")
