"""Validate continuum mfgs4 against a dense-mode discretization.

The discrete evaluator below is a numpy transliteration of the exact
route certified against the rational RSPT oracle in dev_probe_route.py.
Modes discretize J~ on graded Gauss-Legendre panels; agreement of the
continuum module with the dense-mode sums validates the continuum
mapping (closed-form S inside single quadratures).
"""
import numpy as np
from numpy.polynomial.legendre import leggauss

from tcl4.bath import BathSpec, sd_zero_temperature
from tcl4.systems import SystemSpec
from tcl4.mfgs import mfgs2, mfgs4_coherences, _stilde_neg
from tcl4.asymstate import asymptotic_state  # check name later


def modes(spec, lo=1e-9, hi=45.0, nodes=24, grow=1.35):
    edges = [lo]
    while edges[-1] < hi:
        edges.append(min(edges[-1] * grow, hi))
    xs, ws = [], []
    xg, wg = leggauss(nodes)
    for a, b in zip(edges[:-1], edges[1:]):
        xs.append(0.5 * (a + b) + 0.5 * (b - a) * xg)
        ws.append(0.5 * (b - a) * wg)
    x = np.concatenate(xs) * spec.omega_c
    w = np.concatenate(ws) * spec.omega_c
    g2 = sd_zero_temperature(spec, x) * w / np.pi
    return x, g2


def discrete_rho4(E, A, x, g2, normalized=False):
    n = len(E)
    a1 = A[:, 0]
    B = A * a1[None, :]

    def SE(c):
        return np.sum(g2 / (c + x))

    def SE2(c):
        return np.sum(g2 / (c + x) ** 2)

    SEk = np.array([SE(e) for e in E])
    e2 = -np.sum(np.abs(a1) ** 2 * SEk)
    n2 = np.sum(np.abs(a1) ** 2 * np.array([SE2(e) for e in E]))
    psi20 = np.zeros(n, dtype=complex)
    psi20[1:] = (B[1:] @ SEk) / E[1:]
    C = A[:, 1:] @ psi20[1:]

    # q_lk on the full mode grid
    inv_kx = 1.0 / (E[:, None] + x[None, :])          # (n, M)
    SEl_shift = np.array([[SE(E[l] + xx) for xx in x] for l in range(n)])
    # sum_b g2 /((E_k + x_b)(E_l + x_a + x_b)) via outer contraction
    q2 = np.empty((n, n, len(x)))
    for l in range(n):
        for k in range(n):
            q2[l, k] = ((g2 * inv_kx[k])[None, :]
                        @ (1.0 / (E[l] + x[:, None] + x[None, :])).T).ravel()
    q = SEl_shift[:, None, :] * inv_kx[None, :, :] + q2

    t3 = np.empty((n, len(x)), dtype=complex)
    for p in range(n):
        acc = np.einsum("l,lk,k,lkm->m", A[p], A, a1, q)
        t3[p] = -(C[p] + acc + e2 * a1[p] * inv_kx[p]) * inv_kx[p]

    # u_l(x, y) arrays
    XY = E[:, None, None] + x[None, :, None] + x[None, None, :]
    K = np.einsum("lk,k,km->lm", A, a1, inv_kx)       # (n, M) inner sums
    U = (K[:, :, None] + K[:, None, :]) / XY

    def p2(i, j):
        v = a1[i] * np.conj(a1[j]) * np.sum(g2 * inv_kx[i] * inv_kx[j])
        if i == 0:
            v += np.conj(psi20[j])
        if j == 0:
            v += psi20[i]
        return v

    def entry(i, j):
        w22 = 0.5 * np.einsum("a,b,ab,ab->", g2, g2, U[i], np.conj(U[j]))
        w31 = -np.sum(g2 * (t3[i] * np.conj(a1[j]) * inv_kx[j]
                            + a1[i] * np.conj(t3[j]) * inv_kx[i]))
        v = w22 + w31 + psi20[i] * np.conj(psi20[j])
        if normalized:
            v -= n2 * p2(i, j)
        if i == 0:
            psi40j = -(np.sum(g2 * (A[j] @ t3)) - e2 * psi20[j]) / E[j]
            v += np.conj(psi40j)
        return v

    out = np.zeros((n, n), dtype=complex)
    for i in range(n):
        for j in range(i + 1, n):
            out[i, j] = entry(i, j)
            out[j, i] = np.conj(out[i, j])
    return out


def main():
    rng = np.random.default_rng(7)
    n = 3
    energies = np.array([0.0, 1.3, 2.625])
    raw = rng.normal(size=(n, n))
    A = (raw + raw.T) / 2
    A /= np.linalg.norm(A)
    spec = BathSpec(0.1, 1.0, 1.5)
    sys = SystemSpec(energies=energies, couplings=(A,), baths=(spec,))

    import time
    for normalized in (False, True):
        t0 = time.time()
        cont = mfgs4_coherences(sys, normalized=normalized)
        t1 = time.time()
        print(f"continuum mfgs4 (normalized={normalized}): {t1-t0:.2f}s")
        for M, grow in ((24, 1.35), (32, 1.22)):
            x, g2 = modes(spec, nodes=M, grow=grow)
            disc = discrete_rho4(sys.energies - sys.energies[0],
                                 A.astype(complex), x, g2,
                                 normalized=normalized)
            diff = np.max(np.abs(cont - disc))
            print(f"  modes={len(x)}  max|cont - disc| = {diff:.3e}  "
                  f"rel = {diff/np.max(np.abs(cont)):.3e}")


if __name__ == "__main__":
    main()
