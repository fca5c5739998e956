"""TCL generator assembly up to fourth order.

The second-order generator needs only the timed spectral density at the
Bohr frequencies.  The fourth-order generator is assembled from three
families of frequency-triple kernels (kinds "F", "C", "R"), each a
single 1D time integral plus a closed ratio term; kernel values are
shared across the O(N^4) index sums through a quantized-frequency
cache, which is what makes repeated assemblies cheap.  A brute-force
triple-quadrature oracle over the time-ordered region is included for
cross-validation on small systems.

Superoperator index convention: row = (n, m) flattened as n*N + m,
column = (i, j) as i*N + j, so data[n*N+m, i*N+j] multiplies rho_{ij}
and feeds d(rho_{nm})/dt.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .bath import (BathSpec, _prefactor, asymp_sd, bcf, d_asymp_sd_domega,
                   d_timed_sd_domega, djdw0, timed_sd, timed_sd_tail)
from .errors import (Divergence, DivergenceError, DomainError,
                     ToleranceNotMet)
from .quad import QuadSpec, _edges_clustered, adaptive_gk, integrate_time
from .systems import SystemSpec

# |w1+w2+w3| below this fraction of omega_c switches the ratio term to
# the frequency-derivative limit
_LIMIT_FRAC = 1e-8
# cache-key frequency quantum as a fraction of omega_c
_KEY_FRAC = 1e-12
# evaluate near-threshold ratio terms both ways and warn on mismatch
DEBUG_LIMIT_CHECK = False


@dataclass(frozen=True, eq=False)
class Superoperator:
    """Dense N^2 x N^2 generator block, plus any divergent channels.

    divergent_channels lists (flag, coefficient matrix) pairs for
    asymptotic contributions that grow without bound; data then holds
    only the finite part.
    """

    data: np.ndarray
    divergent_channels: tuple = ()

    def __post_init__(self):
        d = np.asarray(self.data, dtype=complex)
        n = int(round(np.sqrt(d.shape[0])))
        if d.shape != (n * n, n * n):
            raise DomainError("superoperator data must be N^2 x N^2")
        object.__setattr__(self, "data", d)

    @property
    def n(self) -> int:
        return int(round(np.sqrt(self.data.shape[0])))

    def tensor(self) -> np.ndarray:
        n = self.n
        return self.data.reshape(n, n, n, n)

    def hermiticity_defect(self) -> float:
        t = self.tensor()
        return float(np.max(np.abs(t - np.conj(np.transpose(t, (1, 0, 3, 2))))))

    def trace_defect(self) -> float:
        """max_(ij) |sum_n R_{nn,ij}|, relative to the matrix norm."""
        t = self.tensor()
        rowsum = np.einsum("nnij->ij", t)
        scale = np.linalg.norm(self.data)
        return float(np.max(np.abs(rowsum)) / scale) if scale else 0.0

    def apply(self, rho: np.ndarray) -> np.ndarray:
        n = self.n
        return (self.data @ np.asarray(rho, dtype=complex).reshape(n * n)
                ).reshape(n, n)


@dataclass(frozen=True)
class TriSD:
    """One frequency-triple kernel value (or its divergence flag)."""

    kind: str
    bath_a: BathSpec
    bath_b: BathSpec
    freqs: tuple
    t: float
    value: object  # complex, or Divergence when flagged


class TriSDCache:
    """Keyed store of kernel values, reusable across assemblies.

    Keys quantize the frequency triple to 1e-12 * omega_c so that
    algebraically equal Bohr combinations share one entry.  Any miss in
    a requested batch triggers a recompute of the whole batch, so the
    stored numbers never depend on evaluation history.  save/load
    round-trip bit-exactly through npz arrays.
    """

    def __init__(self):
        self._d = {}

    def __len__(self):
        return len(self._d)

    def get(self, key):
        return self._d.get(key)

    def put(self, key, value):
        self._d[key] = value

    def save(self, path):
        keys = list(self._d.keys())
        np.savez(
            path,
            kind=np.array([k[0] for k in keys]),
            bath_a=np.array([k[1] for k in keys], dtype=float),
            bath_b=np.array([k[2] for k in keys], dtype=float),
            qw=np.array([k[3] for k in keys], dtype=np.int64),
            t=np.array([k[4] for k in keys], dtype=float),
            val=np.array([self._d[k] for k in keys], dtype=complex),
        )

    def load(self, path):
        z = np.load(path, allow_pickle=False)
        for i in range(len(z["t"])):
            key = (str(z["kind"][i]), tuple(float(x) for x in z["bath_a"][i]),
                   tuple(float(x) for x in z["bath_b"][i]),
                   tuple(int(q) for q in z["qw"][i]), float(z["t"][i]))
            self._d[key] = complex(z["val"][i])
        return self


def _bath_key(spec: BathSpec) -> tuple:
    return (spec.lam, spec.omega_c, spec.s, spec.beta)


def _cache_key(kind, a, b, w1, w2, w3, t):
    q = _KEY_FRAC * min(a.omega_c, b.omega_c)
    qw = tuple(int(round(w / q)) for w in (w1, w2, w3))
    return (kind, _bath_key(a), _bath_key(b), qw, float(t))


def _complete(delta: np.ndarray) -> np.ndarray:
    # R_{nm,ij} = dR_{nm,ij} + conj(dR_{mn,ji})
    return delta + np.conj(np.transpose(delta, (1, 0, 3, 2)))


def _as_superoperator(delta, channels=()) -> Superoperator:
    n = delta.shape[0]
    chans = tuple((flag, _complete(c).reshape(n * n, n * n))
                  for flag, c in channels)
    return Superoperator(data=_complete(delta).reshape(n * n, n * n),
                         divergent_channels=chans)


def _gamma_matrix(spec: BathSpec, tab, t) -> np.ndarray:
    """Gamma at every Bohr frequency: G[n, m] = Gamma_{w_nm}(t)."""
    vals = np.empty(len(tab.values), dtype=complex)
    for k, w in enumerate(tab.values):
        if np.isinf(t):
            vals[k] = asymp_sd(spec, float(w)).gamma
        else:
            vals[k] = complex(timed_sd(spec, float(w), t))
    return vals[tab.index]


def _jay_matrix(spec: BathSpec, tab, t) -> np.ndarray:
    """Real part of Gamma at every Bohr frequency."""
    return np.real(_gamma_matrix(spec, tab, t))


def r0(sys: SystemSpec) -> Superoperator:
    """Free generator: coherent rotation at the Bohr frequencies."""
    n = sys.n_levels
    om = sys.bohr().omega
    data = np.zeros((n, n, n, n), dtype=complex)
    ni, mi = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    data[ni, mi, ni, mi] = -1j * om
    return Superoperator(data=data.reshape(n * n, n * n))


def r2(sys: SystemSpec, t) -> Superoperator:
    """Second-order generator at time t (np.inf for the asymptotic one).

    The asymptotic finite-temperature sub-Ohmic case propagates the bath
    layer's divergence error: the zero-frequency spectral value it needs
    does not exist there.
    """
    n = sys.n_levels
    tab = sys.bohr()
    eye = np.eye(n)
    delta = np.zeros((n, n, n, n), dtype=complex)
    for a, b in zip(sys.couplings, sys.baths):
        g = _gamma_matrix(b, tab, t)
        delta += np.einsum("ni,jm,in->nmij", a, a, g)
        inner = np.einsum("nk,ki,ik->ni", a, a, g)
        delta -= np.einsum("ni,mj->nmij", inner, eye)
    return _as_superoperator(delta)


# ---------------------------------------------------------------------------
# frequency-triple kernels


def _delta_gamma(spec, w, t, tau):
    # Gamma_w(t) - Gamma_w(tau); the tail form avoids the catastrophic
    # cancellation of two near-equal running integrals at large t
    if spec.zero_temperature:
        return timed_sd_tail(spec, w, tau) - timed_sd_tail(spec, w, t)
    return timed_sd(spec, w, t) - timed_sd(spec, w, tau)


def _kernel_scale(a: BathSpec, b: BathSpec) -> float:
    return _prefactor(a) * _prefactor(b) / max(a.omega_c, b.omega_c)


def _ratio_term(a: BathSpec, w1, w2, w3, t, ga_t):
    """(Gamma_{-w2-w3} - Gamma_{w1}) / sum(w), or its derivative limit."""
    sig = w1 + w2 + w3
    tol = _LIMIT_FRAC * a.omega_c

    def by_derivative():
        if np.isinf(t):
            return -d_asymp_sd_domega(a, w1)
        return -complex(d_timed_sd_domega(a, w1, t))

    def by_fraction():
        wneg = -w2 - w3
        if np.isinf(t):
            g_hi = asymp_sd(a, wneg).gamma
        else:
            g_hi = complex(timed_sd(a, wneg, t))
        return (g_hi - ga_t) / sig

    if abs(sig) < tol:
        return by_derivative()
    if DEBUG_LIMIT_CHECK and abs(sig) < 1e3 * tol:
        d, f = by_derivative(), by_fraction()
        scale = max(abs(d), abs(f), 1e-300)
        if abs(d - f) / scale > 1e-6:
            warnings.warn(f"ratio-term limit mismatch near sum(w)=0: "
                          f"{d} vs {f}", stacklevel=3)
    return by_fraction()


def _batch_finite(a: BathSpec, b: BathSpec, entries, t: float,
                  qspec: QuadSpec | None):
    """Kernel values at finite t for entries = [(kind, w1, w2, w3), ...]."""
    n_e = len(entries)
    vals = np.zeros(n_e, dtype=complex)
    if t == 0.0:
        return vals
    kinds = np.array([e[0] for e in entries])
    w1 = np.array([e[1] for e in entries])
    w2 = np.array([e[2] for e in entries])
    w3 = np.array([e[3] for e in entries])
    sig = w1 + w2 + w3
    live = ~((w1 == 0.0) & (w2 == 0.0) & (w3 == 0.0))  # (0,0,0) is 0
    if not np.any(live):
        return vals

    # frequencies feeding each primitive family
    is_f = (kinds == "F") & live
    is_c = (kinds == "C") & live
    is_r = (kinds == "R") & live
    wa = np.unique(w1[live])
    wb_rev = np.unique(np.concatenate([-w2[is_f], w2[is_c]]))
    wb_tau = np.unique(w2[is_r])
    ia = np.searchsorted(wa, np.where(live, w1, wa[0] if len(wa) else 0.0))
    ib = np.zeros(n_e, dtype=int)
    ib[is_f] = np.searchsorted(wb_rev, -w2[is_f])
    ib[is_c] = np.searchsorted(wb_rev, w2[is_c])
    ib[is_r] = np.searchsorted(wb_tau, w2[is_r])

    def integrand(tau):
        z = np.zeros((0, len(tau)), dtype=complex)
        da = np.stack([_delta_gamma(a, float(w), t, tau) for w in wa]) \
            if len(wa) else z
        rev = np.stack([_delta_gamma(b, float(w), t, t - tau)
                        for w in wb_rev]) if len(wb_rev) else z
        dtau = np.stack([_delta_gamma(b, float(w), t, tau)
                         for w in wb_tau]) if len(wb_tau) else z
        second = np.zeros((n_e, len(tau)), dtype=complex)
        second[is_f] = rev[ib[is_f]]
        second[is_c] = np.conj(rev[ib[is_c]])
        second[is_r] = dtau[ib[is_r]]
        phase = np.exp(-1j * sig[:, None] * tau[None, :])
        out = -da[ia] * second * phase
        out[~live] = 0.0
        return out

    wc = max(a.omega_c, b.omega_c)
    n0 = int(min(64, max(8, wc * t / 2.0 + 4,
                         float(np.max(np.abs(sig))) * t / 3.0 + 4)))
    edges = np.linspace(0.0, t, n0 + 1)
    if qspec is None:
        qspec = QuadSpec(abs_tol=1e-11 * _kernel_scale(a, b), rel_tol=1e-10,
                         max_subdivisions=4000)
    vals, _ = adaptive_gk(integrand, 0.0, t, spec=qspec, initial_panels=edges)

    gb_t = {float(w): complex(timed_sd(b, float(w), t))
            for w in np.concatenate([wb_rev, wb_tau])}
    ga_t = {float(w): complex(timed_sd(a, float(w), t)) for w in wa}
    for k in range(n_e):
        if not live[k]:
            vals[k] = 0.0
            continue
        d = _ratio_term(a, float(w1[k]), float(w2[k]), float(w3[k]), t,
                        ga_t[float(w1[k])])
        if kinds[k] == "F":
            pref = 1j * gb_t[float(-w2[k])]
        elif kinds[k] == "C":
            pref = 1j * np.conj(gb_t[float(w2[k])])
        else:
            pref = 1j * gb_t[float(w2[k])]
        vals[k] += pref * d
    return vals


def _batch_asymptotic(a: BathSpec, b: BathSpec, entries,
                      qspec: QuadSpec | None):
    """Asymptotic kernel values.

    Returns (values, flags); flags maps an entry index to its
    (prefactor, Divergence) pair and the value slot stays zero.
    """
    if not (a.zero_temperature and b.zero_temperature):
        raise DomainError("asymptotic kernels are implemented at zero "
                          "temperature only")
    n_e = len(entries)
    vals = np.zeros(n_e, dtype=complex)
    flags = {}
    memo_a, memo_b = {}, {}

    def ga(w):
        if w not in memo_a:
            memo_a[w] = asymp_sd(a, w).gamma
        return memo_a[w]

    def gb(w):
        if w not in memo_b:
            memo_b[w] = asymp_sd(b, w).gamma
        return memo_b[w]

    if qspec is None:
        qspec = QuadSpec(abs_tol=1e-11 * _kernel_scale(a, b), rel_tol=1e-10)

    residual_groups = {}
    for k, (kind, w1, w2, w3) in enumerate(entries):
        if w1 == 0.0 and w2 == 0.0 and w3 == 0.0:
            continue
        sig = w1 + w2 + w3
        if kind == "F":
            pref = 1j * gb(-w2)
        elif kind == "C":
            pref = 1j * np.conj(gb(w2))
        else:
            pref = 1j * gb(w2)
        if abs(sig) < _LIMIT_FRAC * a.omega_c:
            try:
                vals[k] = pref * (-d_asymp_sd_domega(a, w1))
            except DivergenceError as err:
                # the divergent piece is exactly pref times the
                # derivative limit; any finite residual below still
                # lands in the value slot
                flags[k] = (pref, err.args[0])
        else:
            vals[k] = pref * (ga(-w2 - w3) - ga(w1)) / sig
        if kind == "R":
            # the one surviving integral; every tail factor carries a
            # single e^{i w tau} phase, so the integrand's net carrier
            # is exactly -w3 and entries sharing w3 batch together
            key = int(round(w3 / (_KEY_FRAC * a.omega_c)))
            residual_groups.setdefault(key, []).append((k, w1, w2, sig, w3))

    for _, group in sorted(residual_groups.items()):
        idxs = [g[0] for g in group]
        gw1 = np.array([g[1] for g in group])
        gw2 = np.array([g[2] for g in group])
        gsig = np.array([g[3] for g in group])
        w3 = group[0][4]
        uw1 = np.unique(gw1)
        uw2 = np.unique(gw2)
        j1 = np.searchsorted(uw1, gw1)
        j2 = np.searchsorted(uw2, gw2)

        def f(tau, _j1=j1, _j2=j2, _uw1=uw1, _uw2=uw2, _sig=gsig):
            ta = np.stack([timed_sd_tail(a, float(w), tau) for w in _uw1])
            tb = np.stack([timed_sd_tail(b, float(w), tau) for w in _uw2])
            ph = np.exp(-1j * _sig[:, None] * tau[None, :])
            return ta[_j1] * tb[_j2] * ph

        res, _ = integrate_time(f, 0.0, np.inf, carrier_freq=w3, spec=qspec)
        res = np.atleast_1d(res)
        for pos, k in enumerate(idxs):
            vals[k] -= res[pos]
    return vals, flags


def tri_sd(kind: str, bath_a: BathSpec, bath_b: BathSpec, w1: float,
           w2: float, w3: float, t, qspec: QuadSpec | None = None) -> TriSD:
    """One frequency-triple kernel; t = np.inf for the asymptotic value.

    The all-zero triple is defined as 0 (the assembly proves its
    coefficient cancels, so the convention never matters).  A divergent
    asymptotic entry comes back with the Divergence flag in value.
    """
    if kind not in ("F", "C", "R"):
        raise DomainError(f"unknown kernel kind {kind!r}")
    entry = [(kind, float(w1), float(w2), float(w3))]
    if np.isinf(t):
        vals, flags = _batch_asymptotic(bath_a, bath_b, entry, qspec)
        value = flags[0][1] if 0 in flags else complex(vals[0])
    else:
        if t < 0:
            raise DomainError("t must be >= 0")
        value = complex(_batch_finite(bath_a, bath_b, entry, float(t),
                                      qspec)[0])
    return TriSD(kind=kind, bath_a=bath_a, bath_b=bath_b,
                 freqs=(float(w1), float(w2), float(w3)), t=float(t),
                 value=value)


# ---------------------------------------------------------------------------
# fourth-order assembly

# Each row: (einsum pattern, coupling order, value-tensor letters,
# frequency index pairs, sign, kind).  Coupling order entries pick the
# alpha (0) or beta (1) operator for each matrix factor in the pattern.
# The 'ni' groups reduce over three internal indices and carry an
# implicit delta_{jm}; the rest produce the full (n, m, i, j) block.
_GROUPS = [
    ("na,ab,bc,ci,abci->ni", (0, 1, 0, 1), "abci",
     (("c", "b"), ("c", "i"), ("a", "c")), +1, "F"),
    ("na,ab,bc,ci,abci->ni", (0, 1, 0, 1), "abci",
     (("c", "b"), ("a", "b"), ("b", "i")), -1, "R"),
    ("na,ab,bc,ci,abci->ni", (0, 0, 1, 1), "abci",
     (("b", "a"), ("c", "i"), ("a", "c")), -1, "F"),
    ("na,ab,bc,ci,abci->ni", (0, 1, 1, 0), "abci",
     (("i", "c"), ("a", "b"), ("b", "i")), +1, "R"),
    ("jm,na,ab,bi,nabi->nmij", (0, 1, 0, 1), "nabi",
     (("b", "a"), ("b", "i"), ("n", "b")), -1, "F"),
    ("jm,na,ab,bi,nabi->nmij", (0, 1, 0, 1), "nabi",
     (("b", "a"), ("n", "a"), ("a", "i")), +1, "R"),
    ("jm,ab,na,bi,nabi->nmij", (0, 1, 0, 1), "nabi",
     (("a", "n"), ("b", "i"), ("n", "b")), +1, "F"),
    ("jm,ab,na,bi,nabi->nmij", (0, 1, 1, 0), "nabi",
     (("i", "b"), ("n", "a"), ("a", "i")), -1, "R"),
    ("na,ab,bi,jm,abijm->nmij", (0, 0, 1, 1), "abijm",
     (("b", "a"), ("j", "m"), ("a", "i")), +1, "C"),
    ("na,ab,bi,jm,abijm->nmij", (0, 0, 1, 1), "abijm",
     (("b", "a"), ("j", "m"), ("a", "i")), +1, "R"),
    ("na,ab,bi,jm,abijm->nmij", (0, 1, 0, 1), "abijm",
     (("i", "b"), ("j", "m"), ("a", "i")), -1, "C"),
    ("na,ab,bi,jm,abijm->nmij", (0, 1, 0, 1), "abijm",
     (("i", "b"), ("j", "m"), ("a", "i")), -1, "R"),
    ("na,bm,ai,jb,najbi->nmij", (0, 0, 1, 1), "najbi",
     (("a", "n"), ("j", "b"), ("n", "i")), -1, "C"),
    ("na,bm,ai,jb,najbi->nmij", (0, 0, 1, 1), "najbi",
     (("a", "n"), ("j", "b"), ("n", "i")), -1, "R"),
    ("na,jb,bm,ai,najbi->nmij", (1, 1, 0, 0), "najbi",
     (("i", "a"), ("j", "b"), ("n", "i")), +1, "C"),
    ("na,jb,bm,ai,najbi->nmij", (1, 1, 0, 0), "najbi",
     (("i", "a"), ("j", "b"), ("n", "i")), +1, "R"),
]


def _group_ids(idx: np.ndarray, kk: int, letters: str, pairs) -> np.ndarray:
    """Triple-id tensor over the group's free indices."""
    n = idx.shape[0]
    grids = np.meshgrid(*([np.arange(n)] * len(letters)), indexing="ij",
                        sparse=True)
    pos = {ch: k for k, ch in enumerate(letters)}
    ks = [idx[grids[pos[r]], grids[pos[c]]].astype(np.int64)
          for r, c in pairs]
    full = (ks[0] * kk + ks[1]) * kk + ks[2]
    return np.ascontiguousarray(np.broadcast_to(full, (n,) * len(letters)))


def _lookup(uniq_ids, values, kk):
    """id tensor -> value tensor mapping, dense when affordable."""
    if kk ** 3 <= 2_000_000:
        table = np.zeros(kk ** 3, dtype=complex)
        table[uniq_ids] = values
        return lambda ids: table[ids]
    return lambda ids: values[np.searchsorted(uniq_ids, ids)]


def _resolve_values(kind, a, b, uniq_ids, freq_table, t, cache, qspec,
                    asymptotic):
    """Kernel values for the distinct triples, through the cache.

    Any miss recomputes the full batch in canonical (sorted-id) order,
    so the numbers never depend on which subset happened to be cached.
    Flagged (divergent) entries are never cached.
    """
    kk = len(freq_table)
    k1 = uniq_ids // (kk * kk)
    k2 = (uniq_ids // kk) % kk
    k3 = uniq_ids % kk
    triples = np.stack([freq_table[k1], freq_table[k2], freq_table[k3]],
                       axis=1)
    tkey = np.inf if asymptotic else t
    keys = [_cache_key(kind, a, b, *trip, tkey) for trip in triples]
    if cache is not None:
        hits = [cache.get(key) for key in keys]
        if all(h is not None for h in hits):
            return np.array(hits, dtype=complex), {}
    entries = [(kind, float(trip[0]), float(trip[1]), float(trip[2]))
               for trip in triples]
    if asymptotic:
        values, flags = _batch_asymptotic(a, b, entries, qspec)
    else:
        values, flags = _batch_finite(a, b, entries, t, qspec), {}
    if cache is not None:
        for k, (key, v) in enumerate(zip(keys, values)):
            if k not in flags:
                cache.put(key, complex(v))
    return values, flags


def _divergent_bracket(sys: SystemSpec, t, slopes):
    """Population-to-coherence tensor of the divergence-prone block.

    slopes supplies the zero-frequency slope factor per bath (None
    skips the bath).  Complete as written: no hermiticity completion is
    applied on top.
    """
    n = sys.n_levels
    tab = sys.bohr()
    out = np.zeros((n, n, n, n), dtype=complex)
    eye = np.eye(n)
    for a_op, slope in zip(sys.couplings, slopes):
        if slope is None or slope == 0.0:
            continue
        dd = np.real(np.diag(a_op))
        gap = dd[:, None] - dd[None, :]  # gap[p, q] = A_pp - A_qq
        for b_op, b_bath in zip(sys.couplings, sys.baths):
            jmat = _jay_matrix(b_bath, tab, t)
            t1 = np.einsum("mi,nm,im,im->nmi", gap, a_op, jmat,
                           np.abs(b_op) ** 2)
            t2 = np.einsum("ni,nm,in,in->nmi", gap, a_op, jmat,
                           np.abs(b_op) ** 2)
            out += -4j * slope * np.einsum("nmi,ij->nmij", t1 - t2, eye)
    return out


def generator_exists(sys: SystemSpec) -> bool:
    """Whether the asymptotic fourth-order generator is finite.

    True when every bath has a finite zero-frequency slope of the real
    spectral density, or when the coupling structure zeroes the
    divergent channel identically (purely off-diagonal couplings, pure
    dephasing, and similar cancellations).
    """
    divergent = [isinstance(djdw0(b), Divergence) for b in sys.baths]
    if not any(divergent):
        return True
    t_probe = 3.0 / min(b.omega_c for b in sys.baths)
    slopes = [1.0 if d else None for d in divergent]
    coeff = _divergent_bracket(sys, t_probe, slopes)
    return bool(np.max(np.abs(coeff)) <= 1e-12)


def r4_divergent_part(sys: SystemSpec, t) -> Superoperator:
    """The isolated population-to-coherence block that can diverge.

    At t = inf a sub-Ohmic bath's unbounded slope factor is reported as
    a divergent channel; the data matrix then excludes that bath's
    contribution.
    """
    n = sys.n_levels
    if np.isinf(t):
        slopes, flags = [], []
        for b in sys.baths:
            dj = djdw0(b)
            if isinstance(dj, Divergence):
                slopes.append(None)
                flags.append(dj)
            else:
                slopes.append(float(dj))
                flags.append(None)
        data = _divergent_bracket(sys, t, slopes)
        channels = []
        for k, flag in enumerate(flags):
            if flag is None:
                continue
            unit = [1.0 if j == k else None for j in range(len(sys.baths))]
            coeff = _divergent_bracket(sys, t, unit)
            if np.max(np.abs(coeff)) > 0.0:
                channels.append((flag, coeff.reshape(n * n, n * n)))
        return Superoperator(data=data.reshape(n * n, n * n),
                             divergent_channels=tuple(channels))
    slopes = [float(np.real(d_timed_sd_domega(b, 0.0, t)))
              for b in sys.baths]
    data = _divergent_bracket(sys, t, slopes)
    return Superoperator(data=data.reshape(n * n, n * n))


def r4(sys: SystemSpec, t, cache: TriSDCache | None = None,
       allow_divergent: bool = False,
       qspec: QuadSpec | None = None) -> Superoperator:
    """Fourth-order generator at time t (np.inf for the asymptotic one).

    Kernel values are shared across the index sums via the quantized
    frequency-triple cache; pass the same cache to later calls to reuse
    them.  The asymptotic generator of a system whose divergent channel
    does not cancel raises unless allow_divergent is set, in which case
    the finite part comes back with the channel attached.
    """
    asymptotic = bool(np.isinf(t))
    if asymptotic:
        if not all(b.zero_temperature for b in sys.baths):
            raise DomainError("asymptotic fourth-order generator requires "
                              "zero temperature")
        if not generator_exists(sys) and not allow_divergent:
            raise DivergenceError(
                "asymptotic generator diverges for this system; pass "
                "allow_divergent=True for the finite part plus the "
                "divergent channel")
    elif t < 0:
        raise DomainError("t must be >= 0")

    n = sys.n_levels
    tab = sys.bohr()
    kk = len(tab.values)
    freq_table = tab.values
    zero_pos = int(np.searchsorted(freq_table, 0.0))
    if freq_table[zero_pos] != 0.0:
        raise AssertionError("Bohr table lost its zero entry")
    zero_id = (np.int64(zero_pos) * kk + zero_pos) * kk + zero_pos

    groups = [(pattern, order, _group_ids(tab.index, kk, letters, pairs),
               sign, kind)
              for pattern, order, letters, pairs, sign, kind in _GROUPS]
    uniq_by_kind = {
        kind: np.unique(np.concatenate(
            [g[2].ravel() for g in groups if g[4] == kind]))
        for kind in ("F", "C", "R")
    }

    delta = np.zeros((n, n, n, n), dtype=complex)
    eye = np.eye(n)
    chan_by_bath = {}
    pref_scale = 0.0

    for ai, (a_op, a_bath) in enumerate(zip(sys.couplings, sys.baths)):
        for b_op, b_bath in zip(sys.couplings, sys.baths):
            lookups = {}
            divg = None
            for kind in ("F", "C", "R"):
                uniq = uniq_by_kind[kind]
                values, flags = _resolve_values(
                    kind, a_bath, b_bath, uniq, freq_table, t, cache,
                    qspec, asymptotic)
                values = np.asarray(values, dtype=complex).copy()
                ind = np.zeros_like(values)
                zpos = int(np.searchsorted(uniq, zero_id))
                if zpos < len(uniq) and uniq[zpos] == zero_id:
                    values[zpos] = 0.0
                    ind[zpos] = 1.0
                pref = np.zeros_like(values)
                for k, (p, flag) in flags.items():
                    pref[k] = p
                    divg = flag
                    pref_scale = max(pref_scale, abs(p))
                lookups[kind] = (_lookup(uniq, values, kk),
                                 _lookup(uniq, ind, kk),
                                 _lookup(uniq, pref, kk))

            zero_acc = {k: np.zeros((n, n, n, n), dtype=complex)
                        for k in ("F", "C", "R")}
            chan_acc = np.zeros((n, n, n, n), dtype=complex)
            ops = (a_op, b_op)
            for pattern, order, ids, sign, kind in groups:
                val_fn, ind_fn, pref_fn = lookups[kind]
                coefs = [ops[o] for o in order]

                def term(tensor):
                    contrib = sign * np.einsum(pattern, *coefs, tensor,
                                               optimize=True)
                    if contrib.ndim == 2:  # 'ni' output with delta_{jm}
                        return np.einsum("ni,mj->nmij", contrib, eye)
                    return contrib

                delta += term(val_fn(ids))
                zero_acc[kind] += term(ind_fn(ids))
                if divg is not None:
                    chan_acc += term(pref_fn(ids))

            for kind in ("F", "C", "R"):
                worst = float(np.max(np.abs(zero_acc[kind])))
                if worst > 1e-10:
                    raise AssertionError(
                        f"zero-frequency-triple coefficient for kind "
                        f"{kind} did not cancel: {worst}")
            if divg is not None and float(np.max(np.abs(chan_acc))) > 0.0:
                key = (ai, divg)
                if key in chan_by_bath:
                    chan_by_bath[key] = chan_by_bath[key] + chan_acc
                else:
                    chan_by_bath[key] = chan_acc

    # Flagged entries stand for pref * (-dGamma/dw at w1=0), whose real
    # slope dJ/dw is finite exactly at s=1 and whose imaginary slope
    # dS/dw diverges for every s <= 1.  The assembled dS coefficient is
    # odd under the hermiticity swap, so it drops out of the completed
    # generator for any coupling; only the dJ slope can survive.
    exists = generator_exists(sys)
    chan_list = []
    scale = max(pref_scale, 1e-300)
    for (ai, flag), coeff in chan_by_bath.items():
        odd = coeff - np.conj(np.transpose(coeff, (1, 0, 3, 2)))
        if float(np.max(np.abs(odd))) > 1e-9 * scale:
            raise AssertionError(
                "principal-slope coefficient of a flagged kernel did not "
                f"cancel (size {float(np.max(np.abs(odd)))})")
        dj = djdw0(sys.baths[ai])
        if not isinstance(dj, Divergence):
            delta += -float(dj) * coeff
            continue
        size = float(np.max(np.abs(_complete(coeff))))
        if exists:
            # structural cancellation: flagged kernels appeared but the
            # assembled coefficient must vanish
            if size > 1e-9 * scale:
                raise AssertionError(
                    "divergent channel failed to cancel for a system "
                    f"whose generator exists (size {size})")
            continue
        if size > 1e-12 * scale:
            chan_list.append((flag, -coeff))
    return _as_superoperator(delta, tuple(chan_list))


# ---------------------------------------------------------------------------
# brute-force oracle


def _oracle_eval(sys: SystemSpec, t: float, nodes: int) -> np.ndarray:
    n = sys.n_levels
    om = sys.bohr().omega
    eye = np.eye(n)
    x, w = np.polynomial.legendre.leggauss(nodes)
    u = 0.5 * (x + 1.0)
    uw = 0.5 * w
    u1, u2, u3 = np.meshgrid(u, u, u, indexing="ij")
    w123 = (uw[:, None, None] * uw[None, :, None] * uw[None, None, :]).ravel()
    t1 = (t * u1).ravel()
    t2 = t1 * u2.ravel()
    t3 = t2 * u3.ravel()
    wgt = w123 * (t * t1 * t2)  # nested-range jacobian

    def picture(mat, tk):
        return mat[None, :, :] * np.exp(1j * om[None, :, :]
                                        * tk[:, None, None])

    def comm(p, q):
        return p @ q - q @ p

    delta = np.zeros((n, n, n, n), dtype=complex)
    for a_op, a_bath in zip(sys.couplings, sys.baths):
        a0 = a_op * np.exp(1j * om * t)
        for b_op, b_bath in zip(sys.couplings, sys.baths):
            a2 = picture(a_op, t2)
            a3 = picture(a_op, t3)
            b1 = picture(b_op, t1)
            b2 = picture(b_op, t2)
            b3 = picture(b_op, t3)
            c02 = bcf(a_bath, t - t2)
            c03 = bcf(a_bath, t - t3)
            c13 = bcf(b_bath, t1 - t3)
            c31 = bcf(b_bath, t3 - t1)
            c12 = bcf(b_bath, t1 - t2)
            c21 = bcf(b_bath, t2 - t1)

            def acc(scal, xmat, ymat=None):
                # X rho Y contributes S_{nm,ij} += X_{ni} Y_{jm}
                cw = wgt * scal
                if ymat is None:
                    p = np.einsum("g,gni->ni", cw, xmat, optimize=True)
                    return np.einsum("ni,mj->nmij", p, eye)
                tq = np.einsum("g,gni,gjm->nijm", cw, xmat, ymat,
                               optimize=True)
                return np.transpose(tq, (0, 3, 1, 2))

            def nested(scal, mid, ymat=None):
                # [a0, mid rho ymat], ymat=None meaning identity
                if ymat is None:
                    return (acc(scal, np.matmul(a0, mid))
                            - acc(scal, mid, np.broadcast_to(a0, mid.shape)))
                return (acc(scal, np.matmul(a0, mid), ymat)
                        - acc(scal, mid, np.matmul(ymat, a0)))

            delta += nested(c02 * c13, comm(b1, a2) @ b3)
            delta -= nested(c02 * c31, comm(b1, a2), b3)
            delta += nested(c03 * c12, comm(a3, b2), b1)
            delta += nested(c03 * c12, comm(b1 @ b2, a3))
            delta -= nested(c03 * c21, comm(b1, a3), b2)

    # rotate from the interaction picture at time t
    ph = np.exp(-1j * om * t)
    return delta * ph[:, :, None, None] * np.conj(ph)[None, None, :, :]


def r4_oracle(sys: SystemSpec, t: float, rtol: float = 3e-8) -> Superoperator:
    """Direct triple quadrature of the time-ordered generator.

    Ground truth for small systems; the node count climbs until two
    successive tensor-product rules agree to rtol.  Restricted to
    N <= 4, zero temperature, finite t.
    """
    if sys.n_levels > 4:
        raise DomainError("oracle is restricted to N <= 4")
    if not all(b.zero_temperature for b in sys.baths):
        raise DomainError("oracle is restricted to zero temperature")
    if np.isinf(t) or t < 0:
        raise DomainError("t must be finite and >= 0")
    n = sys.n_levels
    if t == 0.0:
        return Superoperator(data=np.zeros((n * n, n * n), dtype=complex))
    wc = max(b.omega_c for b in sys.baths)
    nodes = int(min(56, max(28, 1.2 * wc * t)))
    prev = _oracle_eval(sys, t, nodes)
    for nodes in (nodes + 12, nodes + 28):
        cur = _oracle_eval(sys, t, nodes)
        scale = float(np.max(np.abs(cur)))
        if float(np.max(np.abs(cur - prev))) <= rtol * scale:
            return _as_superoperator(cur)
        prev = cur
    warnings.warn("oracle quadrature did not certify the requested "
                  "tolerance", ToleranceNotMet)
    return _as_superoperator(prev)


def overlap_decay_check(spec: BathSpec, w1: float, w2: float, w3: float,
                        t_grid) -> dict:
    """Decay of the cross-kernel overlap integral with growing t.

    Returns the magnitude per grid time and the log-log slope fitted
    over the second half of the grid.  This is the diagnostic that
    justifies dropping the overlap term from the asymptotic "F" and "C"
    kernels: the magnitude must fall off as a power of t.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(np.diff(t_grid) <= 0):
        raise DomainError("t_grid must be increasing")
    sig = w1 + w2 + w3
    gscale = _prefactor(spec) ** 2 / spec.omega_c
    mags = np.empty(len(t_grid))
    for k, t in enumerate(t_grid):
        if t == 0.0:
            mags[k] = 0.0
            continue

        def f(tau, _t=t):
            da = _delta_gamma(spec, w1, _t, tau)
            db = _delta_gamma(spec, -w2, _t, _t - tau)
            return da * db * np.exp(-1j * sig * tau)

        edges = _edges_clustered(
            0.0, t, left=True, right=True,
            n=max(5, int(np.log2(max(spec.omega_c * t, 2.0))) + 2))
        if abs(sig) * t > 20.0:
            extra = np.linspace(0.0, t, int(abs(sig) * t / 4.0) + 2)
            edges = np.unique(np.concatenate([edges, extra]))
        val, _ = adaptive_gk(
            f, 0.0, t,
            spec=QuadSpec(abs_tol=1e-13 * gscale, rel_tol=1e-7,
                          max_subdivisions=4000),
            initial_panels=edges)
        mags[k] = abs(complex(val))
    half = len(t_grid) // 2
    good = mags[half:] > 0.0
    if int(np.sum(good)) >= 2:
        slope = float(np.polyfit(np.log(t_grid[half:][good]),
                                 np.log(mags[half:][good]), 1)[0])
    else:
        slope = float("nan")
    return {"t": t_grid, "magnitude": mags, "exponent": slope}
