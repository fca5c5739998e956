"""Spectral machinery of a power-law bosonic bath.

Everything here is a function of four bath parameters: a dimensionless
coupling, a cutoff frequency, a power-law exponent, and an inverse
temperature (infinite for zero temperature).  The zero-temperature
spectral density is

    J(w) = 2 pi lam^2 omega_c (w/omega_c)^s exp(-w/omega_c),  w > 0

and the correlation function, the running half-Fourier transform
("timed spectral density"), its frequency derivative, and the
asymptotic spectral/principal densities all follow from it.  At zero
temperature each of these has a closed form in terms of the upper
incomplete gamma function; at finite temperature we fall back on the
quadrature engines.

Branch convention: the closed forms evaluate (-w/omega_c)^s and
Gamma(-s, -w/omega_c - i w t) on the negative real axis.  For w > 0 the
time-dependent argument approaches the axis from below as t -> 0+, so
both factors are taken on the lower side of the branch cut (signed zero
imaginary part).  For w < 0 the argument is positive real and the
question does not arise.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .errors import Divergence, DivergenceError, DomainError
from .quad import QuadSpec, adaptive_gk, integrate_time, pv_integral
from .specfun import gamma, upper_incomplete_gamma

# below this fraction of omega_c, closed forms switch to their w=0
# branch: the generic branch subtracts two large incomplete gammas and
# loses one digit per decade of smallness
_OMEGA_TOL_FRAC = 1e-8

# finite-temperature sub-Ohmic spectral density diverges at w=0
_FINITE_T_IR_FRAC = 1e-6


@dataclass(frozen=True)
class BathSpec:
    """Power-law bath parameters.

    lam is the dimensionless coupling (the spec's "lambda"; renamed
    because of the Python keyword), omega_c the cutoff frequency, s the
    power-law exponent, beta the inverse temperature with numpy.inf
    meaning zero temperature.  s within 1e-9 of 1 is snapped to exactly
    1 so the logarithmic branches are used instead of 1/(s-1) forms.
    """

    lam: float
    omega_c: float
    s: float
    beta: float = np.inf

    def __post_init__(self):
        if not (self.lam > 0):
            raise DomainError(f"lam must be > 0, got {self.lam}")
        if not (self.omega_c > 0):
            raise DomainError(f"omega_c must be > 0, got {self.omega_c}")
        if not (self.s > 0):
            raise DomainError(f"s must be > 0, got {self.s}")
        if not (self.beta > 0):
            raise DomainError(f"beta must be > 0, got {self.beta}")
        if self.s != 1.0 and abs(self.s - 1.0) <= 1e-9:
            object.__setattr__(self, "s", 1.0)

    @property
    def zero_temperature(self) -> bool:
        return np.isinf(self.beta)


@dataclass(frozen=True)
class SpectralValue:
    """Real and imaginary parts of the half-Fourier transform of the BCF."""

    J: float
    S: float

    @property
    def gamma(self) -> complex:
        return self.J + 1j * self.S


def _prefactor(spec: BathSpec) -> float:
    # 2 lam^2 Gamma(s+1) omega_c, shared by most closed forms
    return 2.0 * spec.lam**2 * gamma(spec.s + 1.0) * spec.omega_c


def _neg_pow(x, s: float):
    """x^s for real x on the lower side of the cut (x < 0 allowed).

    The -0.0 imaginary part must be written into the array directly:
    complex arithmetic like x + (-0.0)*1j rounds the signed zero away.
    """
    z = np.asarray(x, dtype=complex).copy()
    z.imag = np.where(z.imag == 0, -0.0, z.imag)
    return np.exp(s * np.log(z))


def sd_zero_temperature(spec: BathSpec, omega):
    """The characteristic spectral density J(w) at zero temperature."""
    w = np.asarray(omega, dtype=float)
    x = w / spec.omega_c
    with np.errstate(invalid="ignore"):
        out = np.where(
            w > 0,
            2.0 * np.pi * spec.lam**2 * spec.omega_c
            * np.abs(x) ** spec.s * np.exp(-np.clip(x, 0, None)),
            0.0,
        )
    return out if out.ndim else float(out)


def bcf(spec: BathSpec, t):
    """Bath correlation function C(t); array-valued over t.

    Zero temperature is the closed power-law form; finite temperature
    integrates the coth-weighted spectral density (the imaginary part is
    temperature independent and always comes from the closed form).
    """
    t = np.asarray(t, dtype=float)
    pref = spec.lam**2 * spec.omega_c**2 * 2.0 * gamma(spec.s + 1.0)
    cold = pref * (1.0 + 1j * spec.omega_c * t) ** (-(spec.s + 1.0))
    if spec.zero_temperature:
        return cold if cold.ndim else complex(cold)

    b = spec.beta * spec.omega_c

    def re_part(tt):
        a = spec.omega_c * tt

        def f(x):
            return x**spec.s * np.exp(-x) / np.tanh(0.5 * b * x) * np.cos(a * x)

        val, _ = integrate_time(f, 0.0, np.inf, carrier_freq=a,
                                spec=QuadSpec(abs_tol=1e-13, rel_tol=1e-11))
        return 2.0 * spec.lam**2 * spec.omega_c**2 * float(np.real(val))

    if t.ndim == 0:
        return complex(re_part(float(t)) + 1j * cold.imag)
    re = np.array([re_part(tt) for tt in t.ravel()]).reshape(t.shape)
    return re + 1j * cold.imag


def timed_sd(spec: BathSpec, omega: float, t):
    """Running half-Fourier transform of the BCF up to time t.

    Closed form at zero temperature (both the generic and the zero
    frequency branch); direct quadrature of bcf * exp(i w tau) at finite
    temperature.  Vectorized over t.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("t must be >= 0")
    if not spec.zero_temperature:
        def one(tt):
            if tt == 0.0:
                return 0j

            def f(tau):
                return _bcf_array(spec, tau) * np.exp(1j * omega * tau)

            val, _ = integrate_time(f, 0.0, float(tt), carrier_freq=omega)
            return complex(val)

        if t.ndim == 0:
            return one(float(t))
        return np.array([one(tt) for tt in t.ravel()]).reshape(t.shape)

    if abs(omega) < _OMEGA_TOL_FRAC * spec.omega_c:
        val = 2j * spec.lam**2 * gamma(spec.s) * spec.omega_c * (
            (1.0 + 1j * spec.omega_c * t) ** (-spec.s) - 1.0)
        return val if val.ndim else complex(val)

    x = -omega / spec.omega_c
    z0 = complex(x, -0.0)
    zt = x - 1j * omega * t
    # keep t=0 entries on the same (lower) side of the cut as z0
    zt = np.where(t == 0, z0, zt) if zt.ndim else (z0 if t == 0 else zt)
    pw = _neg_pow(x, spec.s)
    # e^{-w/omega_c} = e^{x} with x = -w/omega_c
    head = 2j * spec.lam**2 * gamma(spec.s + 1.0) * spec.omega_c * pw * np.exp(x)
    val = head * (upper_incomplete_gamma(-spec.s, zt)
                  - upper_incomplete_gamma(-spec.s, z0))
    return val if np.ndim(val) else complex(val)


def _bcf_array(spec: BathSpec, tau):
    # finite-T bcf is a quadrature per point; loop the scalar path
    tau = np.asarray(tau, dtype=float)
    out = np.empty(tau.shape, dtype=complex)
    out.ravel()[:] = [bcf(spec, tt) for tt in tau.ravel()]
    return out


def timed_sd_tail(spec: BathSpec, omega: float, t):
    """Remaining tail of the half-Fourier integral from t to infinity.

    Equal to asymp_sd(spec, omega).gamma - timed_sd(spec, omega, t) but
    evaluated in a single incomplete-gamma call, so the two near-equal
    closed forms are never subtracted.  Zero temperature only; the
    asymptotic-generator machinery that needs this runs at T=0.
    """
    if not spec.zero_temperature:
        raise DomainError("timed_sd_tail requires zero temperature")
    t = np.asarray(t, dtype=float)
    if abs(omega) < _OMEGA_TOL_FRAC * spec.omega_c:
        val = -2j * spec.lam**2 * gamma(spec.s) * spec.omega_c \
            * (1.0 + 1j * spec.omega_c * t) ** (-spec.s)
        return val if val.ndim else complex(val)
    x = -omega / spec.omega_c
    zt = x - 1j * omega * t
    zt = np.where(t == 0, complex(x, -0.0), zt) if zt.ndim \
        else (complex(x, -0.0) if t == 0 else zt)
    pw = _neg_pow(x, spec.s)
    head = 2j * spec.lam**2 * gamma(spec.s + 1.0) * spec.omega_c * pw * np.exp(x)
    val = -head * upper_incomplete_gamma(-spec.s, zt)
    return val if np.ndim(val) else complex(val)


def asymp_sd(spec: BathSpec, omega: float) -> SpectralValue:
    """Asymptotic spectral (J) and principal (S) densities at omega.

    Zero temperature: closed forms.  Finite temperature: J from detailed
    balance on the zero-temperature density, S from the Kramers-Kronig
    principal-value transform of J.
    """
    w = float(omega)
    if spec.zero_temperature:
        if abs(w) < _OMEGA_TOL_FRAC * spec.omega_c:
            return SpectralValue(J=0.0, S=-2.0 * spec.lam**2
                                 * gamma(spec.s) * spec.omega_c)
        tail = timed_sd_tail(spec, w, 0.0)
        # Gamma_w(inf) = -head * Gamma(-s, -w/omega_c) = tail at t=0
        return SpectralValue(J=float(tail.real), S=float(tail.imag))

    if abs(w) >= _FINITE_T_IR_FRAC * spec.omega_c:
        jpos = sd_zero_temperature(spec, abs(w))
        if w > 0:
            J = jpos / (-np.expm1(-spec.beta * w))
        else:
            J = jpos / np.expm1(spec.beta * abs(w))
    else:
        # w within the infrared window
        if spec.s < 1.0:
            raise DivergenceError(Divergence(
                exponent=spec.s - 1.0,
                note="finite-temperature sub-Ohmic J diverges at zero "
                     "frequency like w^(s-1)"))
        J = 2.0 * np.pi * spec.lam**2 / spec.beta if spec.s == 1.0 else 0.0

    S = _kk_transform(spec, w)
    return SpectralValue(J=float(J), S=float(S))


def _thermal_j_positive(spec: BathSpec, wp):
    """Finite-T J on strictly positive frequencies, vectorized."""
    jz = sd_zero_temperature(spec, wp)
    return jz / (-np.expm1(-spec.beta * np.asarray(wp, dtype=float)))


def _kk_transform(spec: BathSpec, w: float) -> float:
    """S(w) = (1/pi) PV int J(w')/(w - w') dw' folded onto (0, inf)."""
    qs = QuadSpec(abs_tol=1e-13 * spec.lam**2 * spec.omega_c**2,
                  rel_tol=1e-10)
    cap = 1e-3 * spec.omega_c
    if spec.zero_temperature:
        def f(wp):
            return sd_zero_temperature(spec, wp) / np.pi

        # the pole factor 1/(w - w') is always part of the integrand;
        # excision only happens when w falls inside (0, inf)
        return pv_integral(f, [w], qs, lo=0.0, hi=np.inf, excision_cap=cap)

    if w == 0.0:
        def f0(wp):
            return (_thermal_j_positive(spec, wp) / np.pi
                    * np.expm1(-spec.beta * wp) / wp)

        val, _ = integrate_time(f0, 0.0, np.inf, carrier_freq=0.0, spec=qs)
        return float(np.real(val))

    def direct(wp):
        return _thermal_j_positive(spec, wp) / np.pi

    def mirrored(wp):
        return (_thermal_j_positive(spec, wp) * np.exp(-spec.beta * wp)
                / np.pi)

    if w > 0:
        out = pv_integral(direct, [w], qs, lo=0.0, hi=np.inf,
                          excision_cap=cap)
        tail, _ = integrate_time(lambda wp: mirrored(wp) / (w + wp),
                                 0.0, np.inf, carrier_freq=0.0, spec=qs)
        return out + float(np.real(tail))
    out = pv_integral(mirrored, [-w], qs, lo=0.0, hi=np.inf,
                      excision_cap=cap)
    head, _ = integrate_time(lambda wp: direct(wp) / (w - wp),
                             0.0, np.inf, carrier_freq=0.0, spec=qs)
    return out + float(np.real(head))


def d_timed_sd_domega(spec: BathSpec, omega: float, t):
    """Frequency derivative of the timed spectral density.

    Zero temperature uses closed forms: at w=0 the explicit power-law or
    logarithmic branch, elsewhere a form assembled from the timed
    density itself.  Finite temperature integrates i tau C(tau) e^{i w tau}.
    Vectorized over t.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("t must be >= 0")
    if not spec.zero_temperature:
        def one(tt):
            if tt == 0.0:
                return 0j

            def f(tau):
                return (1j * tau * _bcf_array(spec, tau)
                        * np.exp(1j * omega * tau))

            val, _ = integrate_time(f, 0.0, float(tt), carrier_freq=omega)
            return complex(val)

        if t.ndim == 0:
            return one(float(t))
        return np.array([one(tt) for tt in t.ravel()]).reshape(t.shape)

    u = 1.0 + 1j * spec.omega_c * t
    s = spec.s
    if abs(omega) < _OMEGA_TOL_FRAC * spec.omega_c:
        if s == 1.0:
            val = -2j * spec.lam**2 * gamma(s + 1.0) * (
                0.5 * np.log1p((spec.omega_c * t) ** 2)
                + 1j * np.arctan(spec.omega_c * t)
                - 1j * spec.omega_c * t / u)
        else:
            val = -2j * spec.lam**2 * gamma(s + 1.0) * (
                1.0 / (s * (s - 1.0))
                - u ** (1.0 - s) / (s - 1.0)
                + u ** (-s) / s)
        # the three u-powers cancel exactly at t=0 on paper; make them
        # cancel exactly in floats too
        val = np.where(t == 0, 0j, val)
        return val if val.ndim else complex(val)

    # d/dw Gamma_w(t) = (s/w - 1/omega_c) Gamma_w(t)
    #                 + (2i lam^2 Gamma(s+1) omega_c / w)(1 - u^{-s} e^{i w t})
    base = timed_sd(spec, omega, t)
    extra = (2j * spec.lam**2 * gamma(s + 1.0) * spec.omega_c / omega) * (
        1.0 - u ** (-s) * np.exp(1j * omega * t))
    val = (s / omega - 1.0 / spec.omega_c) * base + extra
    return val if np.ndim(val) else complex(val)


def d_asymp_sd_domega(spec: BathSpec, omega: float) -> complex:
    """t -> infinity limit of d_timed_sd_domega (zero temperature).

    At w=0 this is the pair (dJ/dw, dS/dw) packed as a complex number;
    divergent cases raise with a typed flag.
    """
    if not spec.zero_temperature:
        raise DomainError("d_asymp_sd_domega requires zero temperature")
    s = spec.s
    if abs(omega) < _OMEGA_TOL_FRAC * spec.omega_c:
        if s <= 1.0:
            raise DivergenceError(Divergence(
                exponent=1.0 - s,
                note="d(Gamma)/dw at w=0 grows like t^(1-s)" if s < 1.0
                else "d(Gamma)/dw at w=0: real part finite (pi lam^2), "
                     "imaginary part grows logarithmically"))
        return complex(-2j * spec.lam**2 * gamma(s + 1.0) / (s * (s - 1.0)))
    base = asymp_sd(spec, omega).gamma
    extra = 2j * spec.lam**2 * gamma(s + 1.0) * spec.omega_c / omega
    return complex((s / omega - 1.0 / spec.omega_c) * base + extra)


def djdw0(spec: BathSpec):
    """dJ/dw at w=0 (temperature independent): 0, pi lam^2, or a flag."""
    if spec.s > 1.0:
        return 0.0
    if spec.s == 1.0:
        return np.pi * spec.lam**2
    return Divergence(exponent=1.0 - spec.s,
                      note="dJ/dw at w=0 grows like t^(1-s) for s < 1")


def dsdw0(spec: BathSpec):
    """dS/dw at w=0 at zero temperature: -2 lam^2 Gamma(s-1), or a flag."""
    if spec.s > 1.0:
        return -2.0 * spec.lam**2 * gamma(spec.s - 1.0)
    if spec.s == 1.0:
        return Divergence(exponent=0.0,
                          note="dS/dw at w=0 diverges logarithmically at s=1")
    return Divergence(exponent=1.0 - spec.s,
                      note="dS/dw at w=0 grows like t^(1-s) for s < 1")


def kk_check(spec: BathSpec, omega_grid) -> float:
    """Max deviation between closed-form S and the PV transform of J."""
    if not spec.zero_temperature:
        raise DomainError("kk_check compares zero-temperature closed forms")
    worst = 0.0
    for w in np.asarray(omega_grid, dtype=float).ravel():
        s_closed = asymp_sd(spec, w).S
        s_pv = _kk_transform(spec, w)
        worst = max(worst, abs(s_closed - s_pv))
    return worst


def van_hove_boson_number(spec: BathSpec, t) -> float:
    """Boson count emitted by the exactly solvable flat-coupling model.

    Closed form 4 lam^2 Gamma(s-1) {1 - cos[(s-1) arctan w_c t] /
    (1 + w_c^2 t^2)^{(s-1)/2}}, written via expm1/half-angle so it stays
    accurate through the s -> 1 crossover (where it degenerates to
    2 lam^2 log(1 + w_c^2 t^2)).  t = inf allowed only for s > 1.
    """
    s = spec.s
    if np.isinf(t):
        if s <= 1.0:
            raise DivergenceError(Divergence(
                exponent=1.0 - s,
                note="boson number diverges like t^(1-s)" if s < 1.0
                else "boson number diverges logarithmically at s=1"))
        return 4.0 * spec.lam**2 * gamma(s - 1.0)
    t = float(t)
    if t < 0:
        raise DomainError("t must be >= 0")
    x = spec.omega_c * t
    big_l = np.log1p(x * x)
    if s == 1.0:
        return 2.0 * spec.lam**2 * big_l
    eps = s - 1.0
    theta = eps * np.arctan(x)
    r = np.exp(-0.5 * eps * big_l)
    # 1 - r cos(theta) = (1 - r) + r (1 - cos theta), both stable
    bracket = -np.expm1(-0.5 * eps * big_l) + r * 2.0 * np.sin(0.5 * theta) ** 2
    # 4 lam^2 Gamma(s-1) * bracket; Gamma(s-1) = Gamma(s+1)/(s(s-1)) keeps
    # s < 1 inside the gamma domain
    return 4.0 * spec.lam**2 * gamma(s + 1.0) / (s * eps) * bracket
