"""Gamma-family special functions for complex arguments.

The bath closed forms need the upper incomplete gamma Gamma(a, z) with
real order a (typically a = -s < 0, non-integer) and complex z, on the
principal branch arg(z) in (-pi, pi].  IEEE signed zeros select the side
of the cut on the negative real axis: Im(z) = -0.0 evaluates the limit
from below, Im(z) = +0.0 (or unsigned) from above.  numpy's log/angle
already honor this, so all powers are taken through exp(a*log(z)).

Region map for upper_incomplete_gamma (a scalar, z vectorized):

    |arg z| > 0.87 pi (cut sector, any |z|)      -> series region
    |z| <= a+1 on the right half-plane, or
    |z| <= 8 elsewhere                            -> series region
    everything else                               -> Lentz continued fraction

The continued fraction converges fastest exactly where it is needed
(large |z| off the cut) and degrades toward the cut, where the series
region takes over: there the Kummer-transformed argument -z is nearly
positive real, so that series is nearly loss-free at any |z|.  A
Poincare large-|z| expansion is deliberately absent: on the principal
branch near the cut it misses the exponentially-small-relative Stokes
constant (~ i pi e^{-i pi a}/Gamma(1-a)), which is exactly the regime the
bath closed forms evaluate at negative real z.

Series region dispatch:
    a snapped to an integer <= 0             -> logarithmic series
    otherwise                                -> Gamma(a) - gamma_lower(a, z)
        Re z >= 0: Nielsen series for gamma_lower
        Re z <  0: Kummer-reflected series

Known precision ledge: for a within (1e-12, ~1e-4) of a non-positive
integer the series region loses roughly eps/dist digits to cancellation
between Gamma(a) and the lower-gamma series (both ~ 1/dist).  Orders are
snapped to the integer path inside 1e-12.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ConvergenceError, DomainError

_SMALL_RADIUS = 8.0
_CUT_SECTOR = 0.87 * np.pi
_MAX_SERIES = 600
_MAX_CF = 5000
_EPS = np.finfo(float).eps


def gamma(x: float) -> float:
    """Euler gamma of a real argument; poles raise DomainError."""
    if x <= 0 and x == math.floor(x):
        raise DomainError(f"gamma pole at non-positive integer x={x}")
    try:
        return math.gamma(x)
    except (ValueError, OverflowError) as exc:  # pragma: no cover
        raise DomainError(f"gamma({x}): {exc}") from exc


def _zpow(a: float, z: np.ndarray) -> np.ndarray:
    """z**a on the principal branch, signed-zero aware via log."""
    return np.exp(a * np.log(z))


def _nielsen_lower(a: float, z: np.ndarray) -> np.ndarray:
    """gamma_lower(a, z) = z^a e^-z sum z^n / (a (a+1) ... (a+n)).

    Stable for Re z >= 0 (terms do not alternate in the dominant
    direction); used only there.
    """
    term = np.full(z.shape, 1.0 / a, dtype=complex)
    total = term.copy()
    active = np.ones(z.shape, dtype=bool)
    for n in range(1, _MAX_SERIES):
        term = term * z / (a + n)
        total = np.where(active, total + term, total)
        active &= np.abs(term) > _EPS * np.abs(total)
        if not active.any():
            break
    else:
        bad = np.argwhere(active)[0]
        raise ConvergenceError(
            f"lower-gamma series stalled: a={a}, z={z[tuple(bad)]}, "
            f"iterations={_MAX_SERIES}"
        )
    return _zpow(a, z) * np.exp(-z) * total


def _kummer_lower(a: float, z: np.ndarray) -> np.ndarray:
    """gamma_lower(a, z) = (z^a / a) M(a, a+1, -z).

    The Kummer transform moves the series argument to -z, which has
    positive real part in the Re z < 0 region where the plain series
    cancels catastrophically.
    """
    w = -z
    term = np.ones(z.shape, dtype=complex)
    total = term.copy()
    active = np.ones(z.shape, dtype=bool)
    for n in range(1, _MAX_SERIES):
        term = term * w / n * ((a + n - 1) / (a + n))
        total = np.where(active, total + term, total)
        active &= np.abs(term) > _EPS * np.abs(total)
        if not active.any():
            break
    else:
        bad = np.argwhere(active)[0]
        raise ConvergenceError(
            f"Kummer series stalled: a={a}, z={z[tuple(bad)]}, "
            f"iterations={_MAX_SERIES}"
        )
    return _zpow(a, z) / a * total


def _lentz_cf(a: float, z: np.ndarray) -> np.ndarray:
    """Continued fraction for Gamma(a, z), modified Lentz iteration."""
    tiny = 1e-300
    b = z + 1.0 - a
    c = np.full(z.shape, 1.0 / tiny, dtype=complex)
    d = 1.0 / np.where(b != 0, b, tiny)
    h = d.copy()
    active = np.ones(z.shape, dtype=bool)
    for i in range(1, _MAX_CF):
        an = -i * (i - a)
        b = b + 2.0
        d = an * d + b
        d = np.where(np.abs(d) < tiny, tiny, d)
        c = b + an / c
        c = np.where(np.abs(c) < tiny, tiny, c)
        d = 1.0 / d
        delta = c * d
        h = np.where(active, h * delta, h)
        active &= np.abs(delta - 1.0) > 1e-16
        if not active.any():
            break
    else:
        bad = np.argwhere(active)[0]
        raise ConvergenceError(
            f"incomplete-gamma continued fraction did not converge: "
            f"a={a}, z={z[tuple(bad)]}, iterations={_MAX_CF}"
        )
    return np.exp(-z) * _zpow(a, z) * h


_EULER_GAMMA = 0.5772156649015328606


def _integer_order_series(m: int, z: np.ndarray) -> np.ndarray:
    """Gamma(-n, z) for integer n = -m >= 0 by the logarithmic series

        (-1)^n/n! (psi(n+1) - Log z) - z^-n sum_{k != n} (-z)^k/((k-n) k!).

    The sum's argument -z sits near the positive axis in the cut sector,
    so the series is cancellation-free there at any |z| (unlike the
    exp1 downward recurrence, which loses a factor |z| per order).
    """
    n = -m
    psi = -_EULER_GAMMA + sum(1.0 / j for j in range(1, n + 1))
    w = -z
    p = np.ones(z.shape, dtype=complex)  # (-z)^k / k!
    total = np.zeros(z.shape, dtype=complex)
    if n != 0:
        total += p / (0.0 - n)
    active = np.ones(z.shape, dtype=bool)
    for k in range(1, _MAX_SERIES):
        p = p * w / k
        if k == n:
            continue
        term = p / (k - n)
        total = np.where(active, total + term, total)
        active &= np.abs(term) > _EPS * np.abs(total)
        if not active.any():
            break
    else:
        bad = np.argwhere(active)[0]
        raise ConvergenceError(
            f"integer-order incomplete-gamma series stalled: a={m}, "
            f"z={z[tuple(bad)]}, iterations={_MAX_SERIES}"
        )
    sign = -1.0 if n % 2 else 1.0
    return sign / math.factorial(n) * (psi - np.log(z)) - _zpow(float(-n), z) * total


def upper_incomplete_gamma(a: float, z) -> complex | np.ndarray:
    """Principal-branch Gamma(a, z), real a, complex z (scalar or array).

    Satisfies Gamma(a+1, z) = a Gamma(a, z) + z^a e^-z and
    Gamma(a, conj z) = conj Gamma(a, z).  Raises DomainError at z = 0
    with a <= 0.
    """
    a = float(a)
    z_arr = np.asarray(z, dtype=complex)
    scalar = z_arr.ndim == 0
    z_arr = np.atleast_1d(z_arr)
    out = np.empty(z_arr.shape, dtype=complex)

    at_zero = z_arr == 0
    if at_zero.any():
        if a <= 0:
            raise DomainError(f"Gamma(a, 0) diverges for a = {a} <= 0")
        out[at_zero] = gamma(a)

    rest = ~at_zero
    if rest.any():
        zr = z_arr[rest]
        az = np.abs(zr)
        near_cut = np.abs(np.angle(zr)) > _CUT_SECTOR
        # Right half-plane: Gamma(a,z) decays like e^-z, so the
        # Gamma(a) - gamma_lower subtraction cancels unless |z| <~ a+1
        # (the classical series/CF split).  Left half-plane: no such
        # cancellation; near the cut the Kummer series works at any |z|.
        right = zr.real >= 0
        m_series = (right & (az <= max(0.5, a + 1.0))) | (
            ~right & ((az <= _SMALL_RADIUS) | near_cut)
        )
        m_cf = ~m_series

        sub = np.empty(zr.shape, dtype=complex)
        if m_cf.any():
            sub[m_cf] = _lentz_cf(a, zr[m_cf])
        if m_series.any():
            zs = zr[m_series]
            a_int = round(a)
            if a_int <= 0 and abs(a - a_int) < 1e-12:
                ser = _integer_order_series(int(a_int), zs)
            else:
                low = np.empty(zs.shape, dtype=complex)
                neg = zs.real < 0
                if neg.any():
                    low[neg] = _kummer_lower(a, zs[neg])
                if (~neg).any():
                    low[~neg] = _nielsen_lower(a, zs[~neg])
                ser = gamma(a) - low
            sub[m_series] = ser
        out[rest] = sub

    return out[0] if scalar else out
