"""Mean-force ground state of a system coupled to one zero-temperature bath.

The joint ground state |G> of H_sys + H_bath + A (x) B, expanded through
fourth order in the coupling by Rayleigh-Schrodinger theory, defines the
mean-force state rho = Tr_bath |G><G| / <G|G>.  After tracing, every bath
sum collapses onto the principal density S evaluated at non-positive
frequencies, where it is smooth: no principal values appear anywhere in
this module, only closed forms, divided differences of S, and half-line
integrals of J times rational kernels.

Conventions.  Level 0 is the system ground state and E_q >= 0 denotes the
gap to level q.  S(w) is the imaginary part of the asymptotic one-sided
bath integral (bath.asymp_sd), so S(-u) for u >= 0 is the only spectral
object needed.  Second-order corrections are closed forms; fourth-order
coherences need single quadratures whose integrands contain S(-c-w) for
nonnegative shifts c.

Integrands are integrated in the log variable w = exp(v) with the pole
order at w = 0 stripped analytically.  The raw kernels carry up to 1/w^2
(two couplings into the intermediate ground channel), which for s near 1
produces the w^(s-2) endpoint behaviour responsible for the divergence of
the expansion at s <= 1; the stripped form stays bounded on the entire
half-line, so the quadrature never sees the singularity, only the
narrowing decay rate.

A word on what diverges.  The fourth-order projector expansion of
Tr_bath |G><G| has coherences that blow up like 1/(s-1) as s -> 1+, with
coefficient 2 lam^2 |A_00|^2 rho2_ij: the infrared norm of the one-boson
cloud times the second-order coherence pattern.  The wavefunction-norm
cross term -<G1|G1> rho2 carries exactly the opposite singular part, so
the normalized state stays bounded in the limit.  mfgs4_coherences
returns the projector expansion by default, which is the object whose
divergence the slope of S at zero frequency controls; pass
normalized=True for the bounded combination.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bath import BathSpec, d_asymp_sd_domega
from .errors import Divergence, DomainError
from .quad import QuadSpec, pv_integral
from .specfun import gamma, upper_incomplete_gamma
from .systems import SystemSpec

__all__ = [
    "MfgsState",
    "DivergentTerm",
    "mfgs2",
    "mfgs4_coherences",
    "mfgs_divergent_term",
    "gs_divergence_prefactor",
    "divergence_coefficient",
]

# Divided differences of S switch to the derivative inside this window.
_DD_GATE_FRAC = 1e-8

# exp(x) * Gamma(-s, x) goes over to the asymptotic series beyond here.
_UG_ASYMPTOTIC_X = 600.0


@dataclass(frozen=True)
class MfgsState:
    """Second-order mean-force correction to the reduced ground state."""

    rho2: np.ndarray

    @property
    def state(self) -> np.ndarray:
        """Zeroth plus second order; not positivity-corrected."""
        n = self.rho2.shape[0]
        out = np.array(self.rho2, dtype=complex)
        out[0, 0] += 1.0
        return out


@dataclass(frozen=True)
class DivergentTerm:
    """The isolated pair of zero-frequency-slope terms for one coherence.

    value holds the pair evaluated in its combined, everywhere-finite
    form; ds0_prefactor is the coefficient that multiplies dS/dw(0) when
    the pair is split into the slope term and its companion integral.
    The flag is set when the split pieces diverge individually (s <= 1).
    """

    value: complex
    ds0_prefactor: complex
    flag: Divergence | None = None


def _stilde_neg(spec: BathSpec, u):
    """S(-u) for u >= 0, vectorized closed form at zero temperature.

    Equals -2 lam^2 Gamma(s+1) omega_c * [x^s e^x Gamma(-s, x)] at
    x = u/omega_c.  The bracket tends to 1/s as x -> 0 and to 1/x at
    large x; beyond _UG_ASYMPTOTIC_X the product is summed as the
    alternating asymptotic series to dodge exp overflow.
    """
    u = np.asarray(u, dtype=float)
    scalar = u.ndim == 0
    x = np.atleast_1d(u / spec.omega_c).astype(float)
    if np.any(x < -1e-12 * max(1.0, float(np.max(np.abs(x))))):
        raise DomainError("S(-u) helper expects u >= 0")
    x = np.clip(x, 0.0, None)
    s = spec.s
    bracket = np.empty_like(x)

    tiny = x < 1e-13
    bracket[tiny] = 1.0 / s

    mid = (~tiny) & (x <= _UG_ASYMPTOTIC_X)
    if mid.any():
        xm = x[mid]
        ug = upper_incomplete_gamma(-s, xm.astype(complex)).real
        bracket[mid] = xm**s * np.exp(xm) * ug

    big = x > _UG_ASYMPTOTIC_X
    if big.any():
        # x^s e^x Gamma(-s,x) ~ (1/x) sum_k (-1)^k (s+1)...(s+k) / x^k
        xb = x[big]
        term = np.ones_like(xb)
        acc = np.ones_like(xb)
        for k in range(1, 16):
            term *= -(s + k) / xb
            acc += term
        bracket[big] = acc / xb

    out = -2.0 * spec.lam**2 * gamma(s + 1.0) * spec.omega_c * bracket
    return float(out[0]) if scalar else out


def _dstilde(spec: BathSpec, u: float) -> float:
    """dS/dw at w = -u (u >= 0); u = 0 hits the bath's zero-w branch."""
    return d_asymp_sd_domega(spec, -float(u)).imag


class _Route:
    """Shared per-system data for the wavefunction-route assembly."""

    def __init__(self, sys: SystemSpec, quad: QuadSpec | None):
        if sys.n_baths != 1:
            raise DomainError("mean-force expansion needs exactly one bath")
        spec = sys.baths[0]
        if not spec.zero_temperature:
            raise DomainError("mean-force expansion implemented at T = 0")
        self.spec = spec
        self.A = np.asarray(sys.couplings[0], dtype=complex)
        self.E = np.asarray(sys.energies, dtype=float) - float(sys.energies[0])
        self.n = len(self.E)
        self.a1 = self.A[:, 0].copy()
        self.st = np.array([_stilde_neg(spec, e) for e in self.E])
        self.gate = _DD_GATE_FRAC * spec.omega_c
        # B[l, k] = A_{lk} a1_k shows up in every chain contraction
        self.B = self.A * self.a1[None, :]
        self.e2 = float(np.real(np.abs(self.a1) ** 2 @ self.st))
        psi20 = np.zeros(self.n, dtype=complex)
        psi20[1:] = -(self.B[1:, :] @ self.st) / self.E[1:]
        self.psi20 = psi20
        self.C = self.A[:, 1:] @ psi20[1:]
        self.quad = quad or QuadSpec(
            abs_tol=max(1e-15 * spec.lam**4, 1e-290), rel_tol=1e-11)

    # -- second order ----------------------------------------------------

    def dt(self) -> np.ndarray:
        """dS/dw at -E_q for every level; q = 0 only converges for s > 1."""
        return np.array([_dstilde(self.spec, e) for e in self.E])

    def p2(self, i: int, j: int) -> complex:
        """Traced second-order projector entry, i != j."""
        val = self.a1[i] * np.conj(self.a1[j]) * self._dd_scalar(
            self.E[i], self.E[j])
        if i == 0:
            val += np.conj(self.psi20[j])
        if j == 0:
            val += self.psi20[i]
        return complex(val)

    def _dd_scalar(self, u: float, v: float) -> float:
        if abs(u - v) < self.gate:
            return -_dstilde(self.spec, 0.5 * (u + v))
        return (_stilde_neg(self.spec, u) - _stilde_neg(self.spec, v)) \
            / (u - v)

    # -- node-batch kernels ----------------------------------------------

    def _sl(self, om: np.ndarray) -> np.ndarray:
        """S(-(E_l + w)) stacked over levels, shape (n, len(om))."""
        return np.stack([_stilde_neg(self.spec, e + om) for e in self.E])

    def _wfrac(self, om: np.ndarray):
        """1/(E_k + w) and w/(E_k + w) without poisoning the gapless row.

        Deep-IR log nodes underflow to w = 0.0 exactly; the gapless row
        of the first array is never consumed, and the second one equals
        1 there identically, so both get pinned instead of dividing.
        """
        den = self.E[:, None] + om[None, :]
        wr = np.zeros_like(den)
        np.divide(1.0, den, out=wr, where=den > np.finfo(float).tiny)
        wx = om[None, :] * wr
        wx[0] = 1.0
        return wr, wx

    def _dd_grid(self, num: np.ndarray, den: np.ndarray,
                 mid: np.ndarray) -> np.ndarray:
        """Gated divided difference (S(-u) - S(-v)) / (u - v), any shape."""
        mask = np.abs(den) < self.gate
        safe = np.where(mask, 1.0, den)
        out = num / safe
        if mask.any():
            flat = np.argwhere(mask)
            for idx in flat:
                out[tuple(idx)] = -_dstilde(self.spec, mid[tuple(idx)])
        return out

    def _kernels(self, om: np.ndarray):
        """Everything the fourth-order integrands share at a node batch."""
        n, E = self.n, self.E
        sl = self._sl(om)                           # (n, m)
        wr, wx = self._wfrac(om)
        num = sl[:, None, :] - self.st[None, :, None].real
        den = (E[:, None] - E[None, :])[:, :, None] + om[None, None, :]
        mid = 0.5 * ((E[:, None] + E[None, :])[:, :, None]
                     + om[None, None, :])
        dd = self._dd_grid(num.real, den, mid)      # D(E_l + w, E_k)
        return sl, wr, wx, dd

    def _t3x(self, om, sl, wr, wx, dd) -> np.ndarray:
        """w times the one-boson third-order amplitude, all levels.

        The intermediate ground channel contributes a genuine 1/w for
        excited output levels; for the ground output the level-shift
        counterterm cancels it, leaving a divided difference along the
        diagonal of D.  Both forms stay bounded as w -> 0.
        """
        n = self.n
        # inner_l = sum_k A_{lk} a1_k Q-regular parts, pole excluded
        reg = -(sl * (self.B[:, 1:] @ wr[1:, :])) + np.einsum(
            "lk,lkm->lm", self.B, dd)
        g = self.A @ reg                            # (n, m) bracket kernels
        phat = -self.a1[0] * (self.B @ sl)          # ground-channel pole
        t3x = np.empty_like(g)
        t3x[1:] = -(om[None, :] * (self.C[1:, None] + g[1:])
                    + self.e2 * self.a1[1:, None] * wx[1:]
                    + phat[1:]) * wr[1:]
        diag = np.einsum("lm,l->m", dd[np.arange(n), np.arange(n), :],
                         np.abs(self.a1) ** 2)
        t3x[0] = -(self.C[0] + g[0] - self.a1[0] * diag)
        return t3x

    # -- half-line integrals ----------------------------------------------

    def _bath_integral(self, pole_order: int, hbar) -> complex:
        """(1/pi) Int_0^inf J(w) hbar(w) / w^pole_order dw.

        hbar must be the pole-stripped numerator, bounded at w = 0.  The
        integral runs in v = log w so the w^(s - pole_order) endpoint
        becomes a plain exponential decay toward v -> -inf.
        """
        spec = self.spec
        s, wc, lam = spec.s, spec.omega_c, spec.lam
        rate = s + 1.0 - pole_order
        if rate <= 0:
            raise DomainError(
                f"half-line kernel with pole order {pole_order} needs "
                f"s > {pole_order - 1}")
        ell = np.log(wc)
        v_lo = ell - 41.0 / rate
        v_hi = ell + 4.2

        def g(v):
            v = np.asarray(v, dtype=float)
            x = np.exp(v)
            weight = 2.0 * lam**2 * wc * np.exp(rate * v - s * ell - x / wc)
            return weight * hbar(x)

        return pv_integral(g, [], spec=self.quad, lo=v_lo, hi=v_hi)

    # -- fourth-order entry assembly ---------------------------------------

    def _pair_product(self, i: int, j: int) -> complex:
        """Trace of the two-boson x two-boson block against |i><j|.

        Partial fractions in (x + y) reduce the double bath integral to
        four single ones; the inner frequency always lands in S(-c-x) or
        a divided difference against a level gap.
        """
        E = self.E
        total = 0.0 + 0.0j
        for c, sign in ((E[i], 1.0), (E[j], -1.0)):

            def h_same(om, c=c):
                sc = _stilde_neg(self.spec, c + om)
                _, wx_ = self._wfrac(om)
                xw_i = self.B[i] @ wx_
                xw_j = np.conj(self.B[j] @ wx_)
                return -sc * xw_i * xw_j

            def h_cross(om, c=c):
                sc = _stilde_neg(self.spec, c + om)
                _, wx_ = self._wfrac(om)
                xw_i = self.B[i] @ wx_
                num = sc[None, :] - self.st[:, None].real
                den = (c - E)[:, None] + om[None, :]
                mid = 0.5 * ((c + E)[:, None] + om[None, :])
                vj = np.conj(self.B[j]) @ self._dd_grid(num, den, mid)
                return xw_i * vj

            total += sign * (self._bath_integral(2, h_same)
                             + self._bath_integral(1, h_cross))
        return total / (E[j] - E[i])

    def _three_one(self, i: int, j: int) -> complex:
        """Traced <third order| x |first order> block plus its conjugate."""
        E, a1 = self.E, self.a1

        if i == 0:
            def hbar(om):
                sl, wr, wx, dd = self._kernels(om)
                t3x = self._t3x(om, sl, wr, wx, dd)
                return (om * t3x[0] * np.conj(a1[j]) * wr[j]
                        + a1[0] * np.conj(t3x[j]))
            return -self._bath_integral(2, hbar)

        def hbar(om):
            sl, wr, wx, dd = self._kernels(om)
            t3x = self._t3x(om, sl, wr, wx, dd)
            return (t3x[i] * np.conj(a1[j]) * wr[j]
                    + a1[i] * np.conj(t3x[j]) * wr[i])
        return -self._bath_integral(1, hbar)

    def _psi40(self, m: int) -> complex:
        """Zero-boson fourth-order amplitude on level m >= 1."""
        def hbar(om):
            sl, wr, wx, dd = self._kernels(om)
            t3x = self._t3x(om, sl, wr, wx, dd)
            return self.A[m] @ t3x

        contracted = self._bath_integral(1, hbar)
        return -(contracted - self.e2 * self.psi20[m]) / self.E[m]

    def entry(self, i: int, j: int) -> complex:
        """Projector-expansion fourth-order coherence (i, j), i < j."""
        val = self._pair_product(i, j) + self._three_one(i, j)
        val += self.psi20[i] * np.conj(self.psi20[j])
        if i == 0:
            val += np.conj(self._psi40(j))
        return complex(val)


def mfgs2(sys: SystemSpec) -> MfgsState:
    """Second-order mean-force correction, closed form.

    Populations sit on the slope of S at minus the level gap; coherences
    combine the S differences across the two gaps with the zero-boson
    second-order amplitude feeding the ground row.  Trace vanishes
    exactly by writing the ground population as minus the excited sum.
    """
    route = _Route(sys, None)
    n = route.n
    rho2 = np.zeros((n, n), dtype=complex)
    # Slope of S only at the excited gaps: the ground entry follows from
    # the trace, which is what keeps s <= 1 finite at this order.
    for q in range(1, n):
        rho2[q, q] = -abs(route.a1[q]) ** 2 * _dstilde(route.spec,
                                                       route.E[q])
    rho2[0, 0] = -np.sum(np.diag(rho2)[1:])
    for i in range(n):
        for j in range(n):
            if i != j:
                rho2[i, j] = route.p2(i, j)
    return MfgsState(rho2=rho2)


def mfgs4_coherences(sys: SystemSpec,
                     quad: QuadSpec | None = None,
                     normalized: bool = False) -> np.ndarray:
    """Fourth-order coherences of the mean-force ground-state expansion.

    Returns a complex (n, n) matrix with zero diagonal (fourth-order
    populations are out of scope).  The default is the projector
    expansion of Tr_bath |G><G|, which diverges like 1/(s-1) as s -> 1+
    with per-entry coefficient divergence_coefficient(sys, i, j);
    normalized=True subtracts the wavefunction-norm cross term, whose
    singular part is equal and opposite, leaving the bounded coherences
    of the normalized state (only meaningful for s > 1).

    For s <= 1 the intermediate ground channel makes the expansion
    ill-defined entry by entry and the return value is an object matrix
    of Divergence flags instead; each note records the prefactor of
    dS/dw(0) in the isolated divergent pair for that entry, and the
    diagonal is None.
    """
    route = _Route(sys, quad)
    n = route.n
    if route.spec.s <= 1.0:
        out = np.empty((n, n), dtype=object)
        out[:] = None
        expo = 0.0 if route.spec.s == 1.0 else 1.0 - route.spec.s
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                k = _ds0_prefactor(route, i, j)
                out[i, j] = Divergence(
                    exponent=expo,
                    note=f"fourth-order mean-force coherence ({i},{j}): "
                         f"dS/dw(0) diverges for s <= 1; isolated-pair "
                         f"prefactor {k:.9e}")
        return out

    n2 = 0.0
    if normalized:
        n2 = -float(np.real(np.abs(route.a1) ** 2 @ route.dt()))
    rho4 = np.zeros((n, n), dtype=complex)
    for i in range(n):
        for j in range(i + 1, n):
            rho4[i, j] = route.entry(i, j)
            if normalized:
                rho4[i, j] -= n2 * route.p2(i, j)
            rho4[j, i] = np.conj(rho4[i, j])
    return rho4


def _ds0_prefactor(route: _Route, i: int, j: int) -> complex:
    """Coefficient of dS/dw(0) in the isolated divergent pair at (i, j)."""
    A, a1, E, st = route.A, route.a1, route.E, route.st
    wij = E[i] - E[j]
    ci = a1[0] * (a1[i] * np.conj(a1[j]) * a1[0]
                  - abs(a1[i]) ** 2 * A[i, j]) / wij
    cj = -a1[i] * np.conj(a1[j]) * a1[0] * (a1[0] - A[j, j]) / wij
    return complex(ci * st[i] + cj * st[j])


def gs_divergence_prefactor(sys: SystemSpec, i: int, j: int) -> complex:
    """dS/dw(0) prefactor of the isolated pair for coherence (i, j).

    This is the closed-form coefficient reported in divergence
    diagnostics; it is finite for every s > 0 and vanishes whenever the
    ground-level coupling diagonal A_00 does.
    """
    route = _Route(sys, None)
    _check_pair(route.n, i, j)
    return _ds0_prefactor(route, i, j)


def divergence_coefficient(sys: SystemSpec, i: int, j: int) -> complex:
    """Coefficient of 1/(s-1) in the projector-expansion coherence (i, j).

    Closed form 2 lam^2 |A_00|^2 rho2_ij: the only unscreened singular
    channel is the double pole of the two-boson ground chain, whose
    residue is the one-boson-cloud norm times the second-order coherence.
    Evaluated at the system's own s, where every ingredient is finite for
    s > 0; the limit of (s-1) * mfgs4_coherences as s -> 1+ equals this
    expression continued to s = 1.
    """
    route = _Route(sys, None)
    _check_pair(route.n, i, j)
    lam = route.spec.lam
    return complex(2.0 * lam**2 * abs(route.a1[0]) ** 2 * route.p2(i, j))


def mfgs_divergent_term(sys: SystemSpec, i: int, j: int,
                        quad: QuadSpec | None = None) -> DivergentTerm:
    """The isolated pair of slope terms for coherence (i, j), combined.

    Splitting the pair into K * dS/dw(0) plus a companion J-integral
    makes both pieces blow up like Gamma(s-1) as s -> 1+; their sum is
    the divergence-free divided-difference integral evaluated here, so
    the returned value is finite for every s > 0.  The flag marks the
    region where the split pieces diverge individually.
    """
    route = _Route(sys, quad)
    _check_pair(route.n, i, j)
    A, a1, E, st = route.A, route.a1, route.E, route.st
    wij = E[i] - E[j]
    ci = a1[0] * (a1[i] * np.conj(a1[j]) * a1[0]
                  - abs(a1[i]) ** 2 * A[i, j]) / wij
    cj = -a1[i] * np.conj(a1[j]) * a1[0] * (a1[0] - A[j, j]) / wij

    def bracket(q: int) -> float:
        def hbar(om):
            num = _stilde_neg(route.spec, E[q] + om) - st[q].real
            mid = E[q] + 0.5 * om
            return route._dd_grid(np.atleast_1d(num),
                                  np.atleast_1d(np.asarray(om, float)),
                                  np.atleast_1d(mid))
        return float(np.real(route._bath_integral(1, hbar)))

    value = ci * bracket(i) + cj * bracket(j)
    flag = None
    if route.spec.s <= 1.0:
        expo = 0.0 if route.spec.s == 1.0 else 1.0 - route.spec.s
        flag = Divergence(
            exponent=expo,
            note="dS/dw(0) and the companion integral diverge "
                 "individually for s <= 1; value holds their finite sum")
    return DivergentTerm(
        value=complex(value),
        ds0_prefactor=_ds0_prefactor(route, i, j),
        flag=flag)


def _check_pair(n: int, i: int, j: int):
    if not (0 <= i < n and 0 <= j < n):
        raise DomainError(f"level index out of range for n = {n}")
    if i == j:
        raise DomainError("divergent-pair terms are defined off-diagonal")
