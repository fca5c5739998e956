"""Exact-rational discrete-bath RSPT oracle vs parsed formula skeletons.

Rescaled amplitudes a~[state] = amp/sqrt(prod occ!) keep everything in
Q: b+ acts with coefficient 1, b with coefficient occ_k, and bath
pairings carry weight prod occ_k!.
"""

from fractions import Fraction as F
from itertools import product

N = 3
E = [F(0), F(13, 10), F(21, 8)]          # e[0] = 0, increasing
XS = [F(7, 3), F(9, 5)]                  # mode frequencies
GS = [F(1, 2), F(2, 7)]                  # mode couplings
A = [[F(1, 3), F(1, 2), F(1, 5)],
     [F(1, 2), F(-1, 4), F(3, 7)],
     [F(1, 5), F(3, 7), F(1, 6)]]        # real symmetric, A[0][0] != 0
M = len(XS)
B = 4

GROUND = (0, (0,) * M)


def energy(state):
    n, occ = state
    return E[n] + sum(o * x for o, x in zip(occ, XS))


def apply_v(amp):
    out = {}
    for (n, occ), val in amp.items():
        if val == 0:
            continue
        for n2 in range(N):
            if A[n2][n] == 0:
                continue
            base = A[n2][n] * val
            for k in range(M):
                if sum(occ) < B:
                    up = list(occ)
                    up[k] += 1
                    key = (n2, tuple(up))
                    out[key] = out.get(key, F(0)) + GS[k] * base
                if occ[k] > 0:
                    dn = list(occ)
                    dn[k] -= 1
                    key = (n2, tuple(dn))
                    out[key] = out.get(key, F(0)) + GS[k] * occ[k] * base
    return out


def resolvent(amp):
    out = {}
    for state, val in amp.items():
        if state == GROUND or val == 0:
            continue
        out[state] = val / (F(0) - energy(state))
    return out


def weight(state):
    w = F(1)
    for o in state[1]:
        for j in range(2, o + 1):
            w *= j
    return w


def pair(pa, pb):
    """sum_state w(state) pa[state] pb[state] (all amplitudes real)."""
    tot = F(0)
    for state, va in pa.items():
        vb = pb.get(state)
        if vb:
            tot += weight(state) * va * vb
    return tot


def reduced(pa, pb):
    """Tr_B |pa><pb| as an N x N rational matrix (real case)."""
    out = [[F(0)] * N for _ in range(N)]
    by_bath = {}
    for (n, occ), v in pb.items():
        by_bath.setdefault(occ, []).append((n, v))
    for (n, occ), va in pa.items():
        for m, vb in by_bath.get(occ, ()):
            out[n][m] += weight((n, occ)) * va * vb
    return out


psi0 = {GROUND: F(1)}
v0 = apply_v(psi0)
psi1 = resolvent(v0)
v1 = apply_v(psi1)
e2 = v1.get(GROUND, F(0))
psi2 = resolvent(v1)
v2 = apply_v(psi2)
psi3 = resolvent({k: v2.get(k, F(0)) - e2 * psi1.get(k, F(0))
                  for k in set(v2) | set(psi1)})
v3 = apply_v(psi3)
psi4 = resolvent({k: v3.get(k, F(0)) - e2 * psi2.get(k, F(0))
                  for k in set(v3) | set(psi2)})

n2 = pair(psi1, psi1)
n4 = pair(psi2, psi2) + 2 * pair(psi1, psi3)


def madd(*mats):
    out = [[F(0)] * N for _ in range(N)]
    for mat, c in mats:
        for i in range(N):
            for j in range(N):
                out[i][j] += c * mat[i][j]
    return out


p2 = madd((reduced(psi1, psi1), F(1)), (reduced(psi2, psi0), F(1)),
          (reduced(psi0, psi2), F(1)))
p4 = madd((reduced(psi2, psi2), F(1)), (reduced(psi3, psi1), F(1)),
          (reduced(psi1, psi3), F(1)), (reduced(psi4, psi0), F(1)),
          (reduced(psi0, psi4), F(1)))
rho0 = [[F(1) if i == j == 0 else F(0) for j in range(N)] for i in range(N)]
rho2 = madd((p2, F(1)), (rho0, -n2))
rho4 = madd((p4, F(1)), (p2, -n2), (rho0, n2 * n2 - n4))

print("tr rho2:", sum(rho2[i][i] for i in range(N)))
print("tr rho4:", sum(rho4[i][i] for i in range(N)))
print("herm rho4 (12 vs 21):", rho4[1][2] - rho4[2][1])


# ---- discrete spectral sums ----
def Sd(w):
    return sum(g * g / (w - x) for g, x in zip(GS, XS))


def dSd(w):
    return -sum(g * g / (w - x) ** 2 for g, x in zip(GS, XS))


def bmap(f):
    return sum(g * g * f(x) for g, x in zip(GS, XS))


def om(a, b):
    return E[a] - E[b]


# ---- second order, main-text reading ----
def mfgs2_formula():
    out = [[F(0)] * N for _ in range(N)]
    for nn in range(1, N):
        out[nn][nn] = -A[0][nn] ** 2 * dSd(om(0, nn))
    out[0][0] = -sum(out[nn][nn] for nn in range(1, N))
    for i in range(N):
        for j in range(N):
            if i == j:
                continue
            val = A[i][0] * A[0][j] * (Sd(om(0, i)) - Sd(om(0, j)))
            for k in range(N):
                val += ((1 if i == 0 else 0) * A[0][k] * A[k][j]
                        - (1 if j == 0 else 0) * A[i][k] * A[k][0]) \
                    * Sd(om(0, k))
            out[i][j] = val / om(i, j)
    return out


f2 = mfgs2_formula()
print("\nsecond order, formula minus oracle:")
for i in range(N):
    print([f2[i][j] - rho2[i][j] for j in range(N)])


# ---- fourth order: main-text nm block (i, j >= 1 zero-indexed) ----
def L14(i, j):
    wij = om(i, j)
    tot = F(0)
    for a in range(N):
        for b in range(N):
            tot += (A[i][b] * A[b][0] * A[0][a] * A[a][j]
                    * Sd(om(0, a)) * Sd(om(0, b)) / (om(0, i) * om(0, j)))
    for a in range(N):
        tot -= A[0][a] * A[a][0] * A[i][0] * A[0][j] * (
            Sd(om(0, a)) * (dSd(om(0, i)) - dSd(om(0, j)))
            + dSd(om(0, a)) * (Sd(om(0, i)) - Sd(om(0, j)))) / wij
    for a in range(N):
        for b in range(1, N):
            fac = (A[i][0] * A[0][a] * A[a][b] * A[b][j]
                   + A[i][b] * A[b][a] * A[a][0] * A[0][j])
            tot += fac * Sd(om(0, a)) * (Sd(om(0, j)) - Sd(om(0, i))) \
                / (om(b, 0) * wij)
            val = bmap(lambda x, a=a, b=b: (
                1 / (om(a, b) - x)
                * (1 / (om(0, j) - x) - 1 / (om(0, i) - x))))
            tot += fac * Sd(om(0, a)) * val / wij
    for a in range(N):
        for b in range(N):
            fac = A[i][b] * A[b][0] * A[a][j] * A[0][a]
            val = bmap(lambda x, a=a, b=b: (
                1 / (om(0, b) - x)
                * (1 / (om(a, j) - x) - 1 / (om(a, i) - x))))
            tot += fac * Sd(om(0, a)) * val / wij
    return tot


def L5(i, j):
    wij = om(i, j)
    tot = F(0)
    for a in range(N):
        for b in range(N):
            fac = A[i][b] * A[b][0] * A[a][j] * A[0][a]
            val = bmap(lambda x, a=a, b=b: Sd(om(0, j) - x) * (
                1 / ((om(0, b) - x) * (om(0, a) - x))
                - 1 / ((om(0, b) - x) * (om(a, j) - x))))
            tot -= fac * val / wij
    return tot


def L6(i, j):
    wij = om(i, j)
    tot = F(0)
    for a in range(N):
        for b in range(N):
            fac = (A[i][0] * A[0][a] * A[a][b] * A[b][j]
                   + A[i][b] * A[b][a] * A[a][0] * A[0][j])
            val = bmap(lambda x, a=a, b=b: Sd(om(0, b) - x) * (
                1 / ((om(0, j) - x) * (om(a, b) - x))
                - 1 / ((om(0, j) + x) * (om(0, a) + x))))
            tot -= fac * val / wij
    return tot


target = rho4[1][2]
print("\noracle rho4[1][2]:", target)
base = L14(1, 2)
for name, v56 in [
        ("per-line hc (i<->j swap)",
         L5(1, 2) + L5(2, 1) + L6(1, 2) + L6(2, 1)),
        ("hc as plain doubling", 2 * L5(1, 2) + 2 * L6(1, 2)),
        ("no hc at all", L5(1, 2) + L6(1, 2))]:
    cand = base + v56
    print(f"{name}: diff = {cand - target}")
