"""Adaptive quadrature engines for the integrals left to numerics.

Three surfaces:

    integrate_time  finite or semi-infinite time integrals of decaying,
                    possibly oscillatory complex integrands
    pv_integral     Cauchy principal values with simple poles supplied
                    analytically (the integrand passed in is the smooth
                    numerator)
    adaptive_gk     the underlying Gauss-Kronrod engine, exposed because
                    the generator assembly reuses it for custom kernels

Integrands are vectorized: f(x) receives a 1-D node array and returns
values with the node axis last, so array-valued integrands (tables of
spectral functions over many frequencies at once) ride through the same
engine; the error norm is the max over components.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DomainError, ToleranceNotMet

# 15-point Kronrod extension of 7-point Gauss, on [-1, 1]
_XK = np.array([
    -0.991455371120813, -0.949107912342759, -0.864864423359769,
    -0.741531185599394, -0.586087235467691, -0.405845151377397,
    -0.207784955007898, 0.0,
    0.207784955007898, 0.405845151377397, 0.586087235467691,
    0.741531185599394, 0.864864423359769, 0.949107912342759,
    0.991455371120813,
])
_WK = np.array([
    0.022935322010529, 0.063092092629979, 0.104790010322250,
    0.140653259715525, 0.169004726639267, 0.190350578064785,
    0.204432940075298, 0.209482141084728,
    0.204432940075298, 0.190350578064785, 0.169004726639267,
    0.140653259715525, 0.104790010322250, 0.063092092629979,
    0.022935322010529,
])
_WG = np.array([
    0.129484966168870, 0.279705391489277, 0.381830050505119,
    0.417959183673469, 0.381830050505119, 0.279705391489277,
    0.129484966168870,
])
_GAUSS_IDX = np.arange(1, 15, 2)  # Gauss nodes sit at the odd Kronrod slots


@dataclass(frozen=True)
class QuadSpec:
    """Tolerances and subdivision policy for the quadrature engines."""

    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    max_subdivisions: int = 2000
    segment_rule: str = "geometric"  # uniform | geometric | magnitude-adaptive

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise DomainError("tolerances must be positive")
        if self.max_subdivisions < 1:
            raise DomainError("max_subdivisions must be >= 1")
        if self.segment_rule not in ("uniform", "geometric", "magnitude-adaptive"):
            raise DomainError(f"unknown segment_rule {self.segment_rule!r}")


def _gk_panel(f, lo: np.ndarray, hi: np.ndarray):
    """G7/K15 on a batch of panels; returns (k15, |k15-g7| max-norm)."""
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    # nodes shaped (panels, 15) -> flat for one vectorized call
    x = (mid[:, None] + half[:, None] * _XK[None, :]).ravel()
    vals = np.asarray(f(x))
    vals = vals.reshape(vals.shape[:-1] + (len(lo), 15))
    k15 = (vals * _WK).sum(axis=-1) * half
    g7 = (vals[..., _GAUSS_IDX] * _WG).sum(axis=-1) * half
    diff = np.abs(k15 - g7)
    while diff.ndim > 1:
        diff = diff.max(axis=0)
    return k15, diff


def adaptive_gk(f, lo: float, hi: float, spec: QuadSpec | None = None,
                initial_panels: np.ndarray | None = None):
    """Adaptive Gauss-Kronrod on [lo, hi] for vectorized complex f.

    Returns (value, err_est).  Bisects the worst panels until the summed
    error estimate meets max(abs_tol, rel_tol*|value|) or the panel
    budget runs out (then warns ToleranceNotMet and returns best).
    """
    spec = spec or QuadSpec()
    if hi == lo:
        return 0.0 * np.asarray(f(np.array([lo])))[..., 0], 0.0
    if initial_panels is None:
        edges = np.array([lo, hi])
    else:
        edges = np.asarray(initial_panels, dtype=float)
    los, his = edges[:-1].copy(), edges[1:].copy()
    vals, errs = _gk_panel(f, los, his)

    for _ in range(spec.max_subdivisions):
        total = vals.sum(axis=-1)
        tol = max(spec.abs_tol, spec.rel_tol * float(np.max(np.abs(total))))
        err = float(errs.sum())
        if err <= tol:
            return total, err
        # split the worst offenders in one batch (at most 8 per round)
        k = min(8, len(errs))
        worst = np.argpartition(errs, -k)[-k:]
        worst = worst[errs[worst] > tol / (4 * len(errs))]
        if len(worst) == 0:
            worst = np.array([int(np.argmax(errs))])
        mid = 0.5 * (los[worst] + his[worst])
        new_lo = np.concatenate([los[worst], mid])
        new_hi = np.concatenate([mid, his[worst]])
        new_vals, new_errs = _gk_panel(f, new_lo, new_hi)
        keep = np.ones(len(errs), dtype=bool)
        keep[worst] = False
        los = np.concatenate([los[keep], new_lo])
        his = np.concatenate([his[keep], new_hi])
        vals = np.concatenate([vals[..., keep], new_vals], axis=-1)
        errs = np.concatenate([errs[keep], new_errs])

    total = vals.sum(axis=-1)
    err = float(errs.sum())
    warnings.warn(
        f"adaptive_gk: tolerance not met on [{lo}, {hi}] "
        f"(err={err:.3e})", ToleranceNotMet)
    return total, err


def _wynn_epsilon(partial_sums):
    """Shanks-type acceleration (Wynn epsilon) of a partial-sum sequence.

    Returns (estimate, err_est) from the deepest stable even column.
    """
    s = [complex(v) for v in partial_sums]
    if not s:
        raise DomainError("empty partial-sum sequence")
    n = len(s)
    if n == 1:
        return s[0], abs(s[0])
    e0 = [0j] * (n + 1)          # column -1
    e1 = list(s)                 # column 0
    best = s[-1]
    prev_best = s[-2]
    for k in range(1, n):
        e2 = []
        for i in range(n - k):
            denom = e1[i + 1] - e1[i]
            if denom == 0:
                if (k - 1) % 2 == 0:
                    # equal entries in an even column: genuinely converged
                    return e1[i + 1], 0.0
                # equal entries in an odd (auxiliary) column: breakdown,
                # deeper columns are garbage; report the best so far with
                # an honest error, never zero
                return best, abs(best - prev_best)
            e2.append(e0[i + 1] + 1.0 / denom)
        e0, e1 = e1, e2
        if k % 2 == 0 and e1:
            prev_best, best = best, e1[-1]
    return best, abs(best - prev_best)


def _initial_edges(t_lo, t_hi, rule, n=8):
    if rule == "uniform":
        return np.linspace(t_lo, t_hi, n + 1)
    # geometric from the left edge: short panels where kernels move fast
    span = t_hi - t_lo
    fracs = np.concatenate([[0.0], np.geomspace(2.0 ** (1 - n), 1.0, n)])
    return t_lo + span * fracs


def _edges_clustered(a, b, left=False, right=False, n=5):
    """Panel edges on [a, b], geometrically refined toward marked ends."""
    fracs = {0.0, 1.0}
    if left:
        fracs.update(np.geomspace(2.0 ** -n, 0.5, n))
    if right:
        fracs.update(1.0 - np.geomspace(2.0 ** -n, 0.5, n))
    if not (left or right):
        fracs.update(np.linspace(0, 1, 5))
    return a + (b - a) * np.array(sorted(fracs))


def _accelerate(partial_sums):
    """Wynn epsilon over scalar or array partial sums (component-wise)."""
    arr = np.stack([np.asarray(s, dtype=complex) for s in partial_sums],
                   axis=-1)
    if arr.ndim == 1:
        return _wynn_epsilon(arr)
    flat = arr.reshape(-1, arr.shape[-1])
    vals = np.empty(flat.shape[0], dtype=complex)
    worst = 0.0
    for i in range(flat.shape[0]):
        vals[i], e = _wynn_epsilon(flat[i])
        worst = max(worst, e)
    return vals.reshape(arr.shape[:-1]), worst


def integrate_time(f, t_lo: float, t_hi: float, carrier_freq: float = 0.0,
                   spec: QuadSpec | None = None):
    """Integral of complex f over [t_lo, t_hi], t_hi possibly infinite.

    carrier_freq is the dominant oscillation rate of f (rad/time); for
    semi-infinite ranges it sets half-period segmentation so the segment
    sums almost alternate and epsilon acceleration converges even for
    slow power-law tail decay.  Returns (value, err_est).
    """
    spec = spec or QuadSpec()
    if not np.isinf(t_hi):
        if t_hi < t_lo:
            raise DomainError("t_hi < t_lo")
        rule = "uniform" if spec.segment_rule == "uniform" else "geometric"
        return adaptive_gk(f, t_lo, t_hi, spec,
                           _initial_edges(t_lo, t_hi, rule))

    # semi-infinite: leading chunk + tail segments
    w = abs(carrier_freq)
    seg_len = np.pi / w if w > 0 else 1.0
    head_end = t_lo + seg_len
    inner = QuadSpec(abs_tol=spec.abs_tol / 4, rel_tol=spec.rel_tol / 4,
                     max_subdivisions=spec.max_subdivisions,
                     segment_rule=spec.segment_rule)
    value, err = adaptive_gk(f, t_lo, head_end, inner)
    sums = [value]
    seg_mags = []
    sum_mags = [float(np.max(np.abs(value)))]
    lo = head_end
    max_segments = max(64, spec.max_subdivisions // 4)
    oscillatory = w > 0
    tail_err = np.inf
    accel_prev = None
    for _ in range(max_segments):
        hi = lo + seg_len if oscillatory else max(2.0 * lo, lo + seg_len)
        seg, seg_err = adaptive_gk(f, lo, hi, inner)
        err += seg_err
        sums.append(sums[-1] + seg)
        seg_mags.append(float(np.max(np.abs(seg))))
        sum_mags.append(float(np.max(np.abs(sums[-1]))))
        lo = hi
        if len(seg_mags) >= 8:
            m = seg_mags[-8:]
            g = sum_mags[-8:]
            # divergence = segments not decaying AND the running sum
            # itself growing; alternating segments of near-constant
            # magnitude keep the sum bounded and belong to acceleration
            if (all(b >= a * 0.999 for a, b in zip(m, m[1:]))
                    and all(b >= a for a, b in zip(g, g[1:]))
                    and m[-1] > spec.abs_tol):
                raise ConvergenceError(
                    "integrate_time: tail segments are not decaying "
                    f"(last magnitudes {m[-3:]}); integral likely divergent")
        if len(sums) >= 6 and seg_mags[-1] <= 1.0001 * seg_mags[-2]:
            # extrapolate only while segments shrink; a growing tail must
            # reach the divergence guard above, not an epsilon anti-limit
            accel, tail_err = _accelerate(sums[-min(len(sums), 24):])
            scale = max(float(np.max(np.abs(accel))), 1e-300)
            drift = (np.inf if accel_prev is None
                     else float(np.max(np.abs(accel - accel_prev))))
            # trust the extrapolation once two consecutive depths agree
            if max(tail_err, drift) <= max(spec.abs_tol, spec.rel_tol * scale):
                return accel, err + tail_err
            accel_prev = accel
    accel, tail_err = _accelerate(sums[-24:])
    warnings.warn("integrate_time: semi-infinite tail did not settle",
                  ToleranceNotMet)
    return accel, err + tail_err


def pv_integral(f, poles, spec: QuadSpec | None = None, lo: float = 0.0,
                hi: float = np.inf, excision_cap: float | None = None) -> float:
    """Cauchy principal value of f(w) / prod_i (p_i - w) over [lo, hi].

    f is the smooth real numerator; the simple-pole factors are supplied
    through `poles` and handled analytically inside symmetric excision
    windows (the odd part cancels exactly; the even remainder
    [g(p-u) - g(p+u)]/u is regular at u=0).  Double poles are the
    caller's business via partial fractions.
    """
    spec = spec or QuadSpec()
    poles = sorted(float(p) for p in poles)
    for p, q in zip(poles, poles[1:]):
        if q - p < 1e-14 * max(1.0, abs(p)):
            raise DomainError(f"coincident poles {p} and {q}")
    if excision_cap is None:
        excision_cap = 1e-3 * max(1.0, max((abs(p) for p in poles), default=1.0))

    def full(w):
        w = np.asarray(w)
        den = np.ones_like(w)
        for p in poles:
            den = den * (p - w)
        return np.asarray(f(w)) / den

    inside = [p for p in poles if lo < p < hi]
    halfwidths = {}
    for i, p in enumerate(inside):
        h = excision_cap
        if i > 0:
            h = min(h, (p - inside[i - 1]) / 4)
        if i + 1 < len(inside):
            h = min(h, (inside[i + 1] - p) / 4)
        h = min(h, (p - lo) / 2)
        if np.isfinite(hi):
            h = min(h, (hi - p) / 2)
        halfwidths[p] = h

    total = 0.0
    err = 0.0
    mag_scale = 0.0  # pre-cancellation magnitude, for the warning threshold

    # regular stretches between excision windows
    edges = [lo]
    for p in inside:
        edges += [p - halfwidths[p], p + halfwidths[p]]
    edges.append(hi)
    window_edges = set()
    for p in inside:
        window_edges.update((p - halfwidths[p], p + halfwidths[p]))
    for a, b in zip(edges[::2], edges[1::2]):
        if np.isinf(b):
            v, e = integrate_time(full, a, np.inf, 0.0, spec)
        else:
            v, e = adaptive_gk(
                full, a, b, spec,
                _edges_clustered(a, b, left=a in window_edges,
                                 right=b in window_edges))
        total += float(np.real(v))
        mag_scale = max(mag_scale, abs(float(np.real(v))))
        err += e

    # windows: PV int_{p-h}^{p+h} = int_0^h [g(p-u) - g(p+u)]/u du
    # with g the integrand minus this pole's factor
    for p in inside:
        h = halfwidths[p]

        def g(w, _p=p):
            w = np.asarray(w)
            den = np.ones_like(w)
            for q in poles:
                if q != _p:
                    den = den * (q - w)
            return np.asarray(f(w)) / den

        def window(u, _p=p):
            return (g(_p - u) - g(_p + u)) / u

        v, e = adaptive_gk(window, 0.0, h, spec,
                           _initial_edges(0.0, h, "geometric", 6))
        total += float(np.real(v))
        mag_scale = max(mag_scale, abs(float(np.real(v))))
        err += e

    tol = max(spec.abs_tol, spec.rel_tol * max(abs(total), mag_scale))
    if err > 4 * tol:
        warnings.warn(f"pv_integral: error estimate {err:.2e} above tolerance",
                      ToleranceNotMet)
    return total
