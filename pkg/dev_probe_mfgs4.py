"""Fourth-order mfgs skeleton solver: exact-rational RSPT oracle vs
line-by-line basis evaluations, coefficients solved over many instances."""
from fractions import Fraction as F
import random

import sympy

N = 3
M = 2
B = 4


def build(E, XS, GS, A):
    GROUND = (0, (0,) * M)

    def energy(state):
        n, occ = state
        return E[n] + sum(o * x for o, x in zip(occ, XS))

    def apply_v(amp):
        out = {}
        for (n, occ), c in amp.items():
            for m in range(N):
                a = A[n][m]
                if a == 0:
                    continue
                for k in range(M):
                    if sum(occ) < B:
                        up = list(occ)
                        up[k] += 1
                        key = (m, tuple(up))
                        out[key] = out.get(key, F(0)) + c * a * GS[k]
                    if occ[k] > 0:
                        dn = list(occ)
                        dn[k] -= 1
                        key = (m, tuple(dn))
                        out[key] = out.get(key, F(0)) + c * a * GS[k] * occ[k]
        return out

    def resolvent(amp):
        out = {}
        for st, c in amp.items():
            if st == GROUND or c == 0:
                continue
            out[st] = c / (E[0] - energy(st))
        return out

    def weight(state):
        w = 1
        for o in state[1]:
            for q in range(2, o + 1):
                w *= q
        return F(w)

    def pair(pa, pb):
        tot = F(0)
        for st, c in pa.items():
            if st in pb:
                tot += weight(st) * c * pb[st]
        return tot

    def reduced(pa, pb):
        rho = [[F(0)] * N for _ in range(N)]
        by_occ = {}
        for (n, occ), c in pb.items():
            by_occ.setdefault(occ, []).append((n, c))
        for (n, occ), c in pa.items():
            if occ not in by_occ:
                continue
            w = weight((0, occ))
            for m, cb in by_occ[occ]:
                rho[n][m] += w * c * cb
        return rho

    def madd(*pairs):
        rho = [[F(0)] * N for _ in range(N)]
        for coef, mat in pairs:
            for i in range(N):
                for j in range(N):
                    rho[i][j] += coef * mat[i][j]
        return rho

    psi0 = {GROUND: F(1)}
    v0 = apply_v(psi0)
    psi1 = resolvent(v0)
    v1 = apply_v(psi1)
    e2 = v1.get(GROUND, F(0))
    psi2 = resolvent(v1)
    v2 = apply_v(psi2)
    psi3 = resolvent({s: v2.get(s, F(0)) - e2 * psi1.get(s, F(0))
                      for s in set(v2) | set(psi1)})
    v3 = apply_v(psi3)
    psi4 = resolvent({s: v3.get(s, F(0)) - e2 * psi2.get(s, F(0))
                      for s in set(v3) | set(psi2)})

    n2 = pair(psi1, psi1)
    n4 = pair(psi2, psi2) + 2 * pair(psi1, psi3)
    rho0 = [[F(0)] * N for _ in range(N)]
    rho0[0][0] = F(1)
    p2 = madd((F(1), reduced(psi1, psi1)), (F(1), reduced(psi2, psi0)),
              (F(1), reduced(psi0, psi2)))
    p4 = madd((F(1), reduced(psi2, psi2)), (F(1), reduced(psi3, psi1)),
              (F(1), reduced(psi1, psi3)), (F(1), reduced(psi4, psi0)),
              (F(1), reduced(psi0, psi4)))
    rho4 = madd((F(1), p4), (-n2, p2), (n2 * n2 - n4, rho0))

    def Sd(w):
        return sum(g * g / (w - x) for g, x in zip(GS, XS))

    def dSd(w):
        return -sum(g * g / (w - x) ** 2 for g, x in zip(GS, XS))

    def bmap(f):
        return sum(g * g * f(x) for g, x in zip(GS, XS))

    def om(a, b):
        return E[a] - E[b]

    return rho4, Sd, dSd, bmap, om


def basis(i, j, A, Sd, dSd, bmap, om):
    """Each candidate term group, displayed sign included."""
    wij = om(i, j)
    b1 = sum(A[i][b] * A[b][0] * A[0][a] * A[a][j]
             * Sd(om(0, a)) * Sd(om(0, b))
             for a in range(N) for b in range(N)) / (om(0, i) * om(0, j))
    b2 = -sum(A[0][a] * A[a][0] * A[i][0] * A[0][j]
              * (Sd(om(0, a)) * (dSd(om(0, i)) - dSd(om(0, j)))
                 + dSd(om(0, a)) * (Sd(om(0, i)) - Sd(om(0, j))))
              for a in range(N)) / wij

    def fac2(a, b):
        return (A[i][0] * A[0][a] * A[a][b] * A[b][j]
                + A[i][b] * A[b][a] * A[a][0] * A[0][j])

    b3 = sum(fac2(a, b) * Sd(om(0, a)) * (Sd(om(0, j)) - Sd(om(0, i)))
             / (om(b, 0) * wij)
             for a in range(N) for b in range(1, N))
    b4 = sum(fac2(a, b) * Sd(om(0, a))
             * bmap(lambda x, a=a, b=b: (1 / (om(a, b) - x))
                    * (1 / (om(0, j) - x) - 1 / (om(0, i) - x)))
             for a in range(N) for b in range(1, N)) / wij

    def line4(ii, jj):
        return sum(A[ii][b] * A[b][0] * A[a][jj] * A[0][a] * Sd(om(0, a))
                   * bmap(lambda x, a=a, b=b: (1 / (om(0, b) - x))
                          * (1 / (om(a, jj) - x) - 1 / (om(a, ii) - x)))
                   for a in range(N) for b in range(N)) / om(ii, jj)

    def line5(ii, jj):
        return -sum(A[ii][b] * A[b][0] * A[a][jj] * A[0][a]
                    * bmap(lambda x, a=a, b=b: Sd(om(0, jj) - x)
                           * (1 / ((om(0, b) - x) * (om(0, a) - x))
                              - 1 / ((om(0, b) - x) * (om(a, jj) - x))))
                    for a in range(N) for b in range(N)) / om(ii, jj)

    def line6(ii, jj):
        def fc(a, b):
            return (A[ii][0] * A[0][a] * A[a][b] * A[b][jj]
                    + A[ii][b] * A[b][a] * A[a][0] * A[0][jj])
        return -sum(fc(a, b)
                    * bmap(lambda x, a=a, b=b: Sd(om(0, b) - x)
                           * (1 / ((om(0, jj) - x) * (om(a, b) - x))
                              - 1 / ((om(0, jj) + x) * (om(0, a) + x))))
                    for a in range(N) for b in range(N)) / om(ii, jj)

    return [b1, b2, b3, b4,
            line4(i, j), line4(j, i),
            line5(i, j), line5(j, i),
            line6(i, j), line6(j, i)]


NAMES = ["L1a", "L1b", "L2", "L3", "L4", "L4^T", "L5", "L5^T", "L6", "L6^T"]


def rand_frac(rng, lo=-3, hi=3):
    num = rng.randint(lo, hi)
    den = rng.randint(1, 7)
    return F(num, den)


def instance(rng):
    while True:
        E = [F(0)]
        acc = F(0)
        for _ in range(N - 1):
            acc += F(rng.randint(1, 9), rng.randint(1, 5))
            E.append(acc)
        XS = [F(rng.randint(1, 9), rng.randint(1, 6)) for _ in range(M)]
        if len(set(XS)) < M:
            continue
        GS = [F(rng.randint(1, 5), rng.randint(1, 6)) for _ in range(M)]
        A = [[F(0)] * N for _ in range(N)]
        for i in range(N):
            for j in range(i, N):
                v = rand_frac(rng)
                if v == 0:
                    v = F(1, rng.randint(2, 9))
                A[i][j] = v
                A[j][i] = v
        try:
            rho4, Sd, dSd, bmap, om = build(E, XS, GS, A)
            row = basis(1, 2, A, Sd, dSd, bmap, om)
        except ZeroDivisionError:
            continue
        return row, rho4[1][2]


def main():
    rng = random.Random(20260816)
    rows, ys = [], []
    for _ in range(16):
        row, y = instance(rng)
        rows.append([sympy.Rational(v.numerator, v.denominator) for v in row])
        ys.append(sympy.Rational(y.numerator, y.denominator))
    Bm = sympy.Matrix(rows)
    yv = sympy.Matrix(ys)
    aug = Bm.row_join(yv)
    rB = Bm.rank()
    rA = aug.rank()
    print(f"rank(B) = {rB}, rank([B|y]) = {rA}, unknowns = {len(NAMES)}")
    if rA > rB:
        print("INCONSISTENT: no linear combination of these groups matches")
        return
    sol, params = Bm.gauss_jordan_solve(yv)
    if params.shape[0]:
        print(f"underdetermined with {params.shape[0]} free params; "
              "particular solution with params=0:")
        sol = sol.subs({p: 0 for p in params})
    for name, c in zip(NAMES, sol):
        print(f"  {name}: {c}")


if __name__ == "__main__":
    main()


def build_full(E, XS, GS, A):
    """Like build() but also returns n2 and the second-order reduced matrix."""
    GROUND = (0, (0,) * M)

    def energy(state):
        n, occ = state
        return E[n] + sum(o * x for o, x in zip(occ, XS))

    def apply_v(amp):
        out = {}
        for (n, occ), c in amp.items():
            for m in range(N):
                a = A[n][m]
                if a == 0:
                    continue
                for k in range(M):
                    if sum(occ) < B:
                        up = list(occ)
                        up[k] += 1
                        key = (m, tuple(up))
                        out[key] = out.get(key, F(0)) + c * a * GS[k]
                    if occ[k] > 0:
                        dn = list(occ)
                        dn[k] -= 1
                        key = (m, tuple(dn))
                        out[key] = out.get(key, F(0)) + c * a * GS[k] * occ[k]
        return out

    def resolvent(amp):
        out = {}
        for st, c in amp.items():
            if st == GROUND or c == 0:
                continue
            out[st] = c / (E[0] - energy(st))
        return out

    def weight(state):
        w = 1
        for o in state[1]:
            for q in range(2, o + 1):
                w *= q
        return F(w)

    def pair(pa, pb):
        return sum(weight(st) * c * pb[st]
                   for st, c in pa.items() if st in pb)

    def reduced(pa, pb):
        rho = [[F(0)] * N for _ in range(N)]
        by_occ = {}
        for (n, occ), c in pb.items():
            by_occ.setdefault(occ, []).append((n, c))
        for (n, occ), c in pa.items():
            if occ not in by_occ:
                continue
            w = weight((0, occ))
            for m, cb in by_occ[occ]:
                rho[n][m] += w * c * cb
        return rho

    def madd(*pairs):
        rho = [[F(0)] * N for _ in range(N)]
        for coef, mat in pairs:
            for i in range(N):
                for j in range(N):
                    rho[i][j] += coef * mat[i][j]
        return rho

    psi0 = {GROUND: F(1)}
    v0 = apply_v(psi0)
    psi1 = resolvent(v0)
    v1 = apply_v(psi1)
    e2 = v1.get(GROUND, F(0))
    psi2 = resolvent(v1)
    v2 = apply_v(psi2)
    psi3 = resolvent({s: v2.get(s, F(0)) - e2 * psi1.get(s, F(0))
                      for s in set(v2) | set(psi1)})
    v3 = apply_v(psi3)
    psi4 = resolvent({s: v3.get(s, F(0)) - e2 * psi2.get(s, F(0))
                      for s in set(v3) | set(psi2)})

    n2 = pair(psi1, psi1)
    n4 = pair(psi2, psi2) + 2 * pair(psi1, psi3)
    rho0 = [[F(0)] * N for _ in range(N)]
    rho0[0][0] = F(1)
    p2 = madd((F(1), reduced(psi1, psi1)), (F(1), reduced(psi2, psi0)),
              (F(1), reduced(psi0, psi2)))
    p4 = madd((F(1), reduced(psi2, psi2)), (F(1), reduced(psi3, psi1)),
              (F(1), reduced(psi1, psi3)), (F(1), reduced(psi4, psi0)),
              (F(1), reduced(psi0, psi4)))
    rho4 = madd((F(1), p4), (-n2, p2), (n2 * n2 - n4, rho0))
    return rho4, p2, n2


def appendix_nm_basis(n, m, E, XS, GS, A):
    """Discrete appendix groups for the excited-excited entry (n, m)."""
    def Em(k):
        return E[k] - E[0]

    def D(k, x):
        return Em(k) + x

    def omp(a, b):
        return E[a] - E[b]

    wnm = omp(n, m)
    modes = list(zip(GS, XS))

    def s1(f):
        return sum(g * g * f(x) for g, x in modes)

    def s2(f):
        return sum(ga * ga * gb * gb * f(xa, xb)
                   for ga, xa in modes for gb, xb in modes)

    g1 = sum(A[n][l] * A[l][0] * A[k][m] * A[0][k]
             * s1(lambda x, l=l: 1 / D(l, x)) * s1(lambda x, k=k: 1 / D(k, x))
             for k in range(N) for l in range(N)) / (Em(m) * Em(n))

    g2 = -sum(A[n][0] * A[0][m] * A[k][0] * A[0][k] * (
        s1(lambda x, k=k: 1 / D(k, x))
        * s1(lambda x: 1 / D(m, x) ** 2 - 1 / D(n, x) ** 2)
        + s1(lambda x, k=k: 1 / D(k, x) ** 2)
        * s1(lambda x: 1 / D(m, x) - 1 / D(n, x)))
        for k in range(N)) / wnm

    def fac3(k, l):
        return (A[n][l] * A[l][k] * A[0][m] * A[k][0]
                + A[n][0] * A[k][l] * A[l][m] * A[0][k])

    g3a = sum(fac3(k, l) * s1(lambda x, k=k: 1 / D(k, x))
              * s1(lambda x, k=k, l=l: (1 / (D(n, x)) - 1 / D(m, x))
                   / (omp(l, k) + x))
              for k in range(N) for l in range(N)) / wnm

    g3b = -sum(fac3(k, l) * s1(lambda x, k=k: 1 / D(k, x))
               * s1(lambda x: 1 / D(n, x) - 1 / D(m, x)) / Em(l)
               for k in range(N) for l in range(1, N)) / wnm

    g4 = sum(A[n][l] * A[l][0] * A[k][m] * A[0][k]
             * s1(lambda x, k=k: 1 / D(k, x))
             * s1(lambda x, k=k, l=l: (1 / (omp(m, k) + x)
                                       - 1 / (omp(n, k) + x)) / D(l, x))
             for k in range(N) for l in range(N)) / wnm

    g5 = sum(A[n][l] * A[l][0] * A[k][m] * A[0][k]
             * s2(lambda xa, xb, k=k, l=l: (
                 1 / (D(l, xa) * D(k, xa))
                 - 1 / (D(l, xa) * (omp(m, k) + xa))) / (Em(m) + xa + xb))
             for k in range(N) for l in range(N)) / wnm

    g6 = -sum(A[n][l] * A[l][0] * A[k][m] * A[0][k]
              * s2(lambda xa, xb, k=k, l=l: (
                  1 / (D(l, xa) * D(k, xa))
                  - 1 / (D(l, xa) * (omp(n, k) + xa))) / (Em(n) + xa + xb))
              for k in range(N) for l in range(N)) / wnm

    g7 = sum(fac3(k, l) * s2(lambda xa, xb, k=k, l=l: (
        1 / (D(n, xa) * D(k, xa))
        - 1 / (D(m, xa) * D(k, xa))) / (Em(l) + xa + xb))
        for k in range(N) for l in range(N)) / wnm

    g8 = -sum(fac3(k, l) * s2(lambda xa, xb, k=k, l=l: (
        1 / (D(n, xa) * (omp(l, k) + xa))
        - 1 / (D(m, xa) * (omp(l, k) + xa))) / (Em(l) + xa + xb))
        for k in range(N) for l in range(N)) / wnm

    return [g1, g2, g3a, g3b, g4, g5, g6, g7, g8]


APP_NAMES = ["G1", "G2", "G3a", "G3b", "G4", "G5", "G6", "G7", "G8", "n2*p2"]


def main_appendix():
    rng = random.Random(77714)
    rows, ys = [], []
    for _ in range(18):
        while True:
            E = [F(0)]
            acc = F(0)
            for _ in range(N - 1):
                acc += F(rng.randint(1, 9), rng.randint(1, 5))
                E.append(acc)
            XS = [F(rng.randint(1, 9), rng.randint(1, 6)) for _ in range(M)]
            if len(set(XS)) < M:
                continue
            GS = [F(rng.randint(1, 5), rng.randint(1, 6)) for _ in range(M)]
            A = [[F(0)] * N for _ in range(N)]
            for i in range(N):
                for j in range(i, N):
                    v = rand_frac(rng)
                    if v == 0:
                        v = F(1, rng.randint(2, 9))
                    A[i][j] = v
                    A[j][i] = v
            try:
                rho4, p2, n2 = build_full(E, XS, GS, A)
                row = appendix_nm_basis(1, 2, E, XS, GS, A)
            except ZeroDivisionError:
                continue
            row.append(n2 * p2[1][2])
            rows.append([sympy.Rational(v.numerator, v.denominator)
                         for v in row])
            ys.append(sympy.Rational(rho4[1][2].numerator,
                                     rho4[1][2].denominator))
            break
    Bm = sympy.Matrix(rows)
    yv = sympy.Matrix(ys)
    aug = Bm.row_join(yv)
    print(f"rank(B) = {Bm.rank()}, rank([B|y]) = {aug.rank()}, "
          f"unknowns = {len(APP_NAMES)}")
    if aug.rank() > Bm.rank():
        print("INCONSISTENT")
        return
    sol, params = Bm.gauss_jordan_solve(yv)
    if params.shape[0]:
        print(f"underdetermined, {params.shape[0]} free; params=0:")
        sol = sol.subs({p: 0 for p in params})
    for name, c in zip(APP_NAMES, sol):
        print(f"  {name}: {c}")


def appendix_1m_basis(m, E, XS, GS, A):
    """Discrete appendix groups for the ground-excited entry (0, m)."""
    def Em(k):
        return E[k] - E[0]

    def D(k, x):
        return Em(k) + x

    def omp(a, b):
        return E[a] - E[b]

    modes = list(zip(GS, XS))

    def s1(f):
        return sum(g * g * f(x) for g, x in modes)

    def s2(f):
        return sum(ga * ga * gb * gb * f(xa, xb)
                   for ga, xa in modes for gb, xb in modes)

    def fac4(k, l):
        return (A[0][l] * A[l][k] * A[0][m] * A[k][0]
                + A[0][0] * A[k][l] * A[l][m] * A[0][k])

    t = []
    # T1
    t.append(sum(A[0][l] * A[l][0] * A[k][m] * A[0][k] * (
        s1(lambda x, k=k, l=l: 1 / ((omp(0, k) + x) * D(l, x)))
        * s1(lambda x, k=k: 1 / D(k, x)) / Em(m)
        - s2(lambda xa, xb, k=k, l=l: 1 / ((omp(0, k) + xa) * D(l, xa)
                                           * (xa + xb))) / Em(m))
        for k in range(N) for l in range(N)))
    # T2
    t.append(-sum(A[0][l] * A[l][0] * A[k][m] * A[0][k] * (
        s1(lambda x, k=k, l=l: 1 / ((omp(m, k) + x) * D(l, x)))
        * s1(lambda x, k=k: 1 / D(k, x)) / Em(m)
        - s2(lambda xa, xb, k=k, l=l: 1 / ((omp(m, k) + xa) * D(l, xa)
                                           * (Em(m) + xa + xb))) / Em(m))
        for k in range(N) for l in range(N)))
    # T3
    t.append(-sum(A[p][m] * A[l][p] * A[k][l] * A[0][k] * (
        s1(lambda x, k=k, l=l, p=p: 1 / ((omp(l, k) + x) * D(p, x)))
        * s1(lambda x, k=k: 1 / D(k, x)) / Em(m)
        - s2(lambda xa, xb, k=k, l=l, p=p: 1 / ((omp(l, k) + xa) * D(p, xa)
                                                * (Em(l) + xa + xb))) / Em(m))
        for k in range(N) for l in range(N) for p in range(N)))
    # T4
    t.append(sum(fac4(k, l) * (
        s1(lambda x, k=k, l=l: 1 / ((omp(l, k) + x) * D(m, x)))
        * s1(lambda x, k=k: 1 / D(k, x)) / Em(m)
        - s2(lambda xa, xb, k=k, l=l: 1 / ((omp(l, k) + xa) * D(m, xa)
                                           * (Em(l) + xa + xb))) / Em(m))
        for k in range(N) for l in range(N)))
    # T5
    t.append(-sum(fac4(k, l) * (
        s1(lambda x, k=k, l=l: 1 / ((omp(l, k) + x) * x))
        * s1(lambda x, k=k: 1 / D(k, x)) / Em(m)
        - s2(lambda xa, xb, k=k, l=l: 1 / ((omp(l, k) + xa) * xa
                                           * (Em(l) + xa + xb))) / Em(m))
        for k in range(N) for l in range(N)))
    # T6
    t.append(sum(fac4(k, l)
                 * s2(lambda xa, xb, k=k, l=l: (
                     1 / (D(m, xa) * D(k, xa)) - 1 / (xa * D(k, xa)))
                     / (Em(l) + xa + xb))
                 for k in range(N) for l in range(N)) / Em(m))
    # T7
    t.append(sum(A[0][l] * A[l][0] * A[k][m] * A[0][k]
                 * s2(lambda xa, xb, k=k, l=l: (
                     1 / (xa + xb) - 1 / (Em(m) + xa + xb))
                     / (D(k, xa) * D(l, xa)))
                 for k in range(N) for l in range(N)) / Em(m))
    # T8
    t.append(-sum(A[p][m] * A[l][p] * A[k][l] * A[0][k]
                  * s2(lambda xa, xb, k=k, l=l, p=p: (
                      1 / (D(k, xa) * D(p, xa))) / (Em(l) + xa + xb))
                  for k in range(N) for l in range(N)
                  for p in range(N)) / Em(m))
    # T9
    t.append(-F(3, 2) * sum(A[0][l] * A[l][m] * A[k][0] * A[0][k]
                            * s1(lambda x, k=k: 1 / D(k, x) ** 2)
                            * s1(lambda x, l=l: 1 / D(l, x))
                            for k in range(N) for l in range(N)) / Em(m))
    # T10
    t.append(-sum(A[0][0] * A[0][m] * A[k][0] * A[0][k]
                  * s1(lambda x, k=k: 1 / D(k, x) ** 2)
                  * s1(lambda x: 1 / x - 1 / D(m, x))
                  for k in range(N)) / Em(m))
    # T11
    t.append(sum(A[m][l] * A[l][m] * A[k][0] * A[0][k]
                 * s1(lambda x, l=l: 1 / (omp(m, l) - x) ** 2)
                 * s1(lambda x, k=k: 1 / D(k, x))
                 for k in range(N) for l in range(N)) / Em(m))
    # T12
    t.append(-sum(A[0][0] * A[0][m] * A[k][0] * A[0][k]
                  * s1(lambda x: 1 / x ** 2)
                  * s1(lambda x, k=k: 1 / D(k, x))
                  for k in range(N)) / Em(m))
    # T13
    t.append(-sum((A[0][m] * A[m][k] * A[0][l] * A[k][0]
                   + A[0][0] * A[k][m] * A[m][l] * A[0][k])
                  * s1(lambda x, l=l: 1 / (x * D(l, x)))
                  * s1(lambda x, k=k: 1 / D(k, x))
                  for k in range(N) for l in range(N)) / Em(m))
    # T14 (p excludes ground where 1/E_p appears)
    t.append(-sum((sum(A[k][m] * A[p][k] * A[l][p] * A[0][l] / Em(p)
                       for p in range(1, N))
                   + A[0][l] * A[l][m] * A[k][0] * A[0][k] / Em(m))
                  * s1(lambda x, l=l: 1 / D(l, x))
                  * s1(lambda x, k=k: 1 / D(k, x))
                  for k in range(N) for l in range(N)) / Em(m))
    # T15
    t.append(sum(A[0][0] * A[0][m] * A[k][0] * A[0][k]
                 * s1(lambda x: 1 / D(m, x) ** 2)
                 * s1(lambda x, k=k: 1 / D(k, x))
                 for k in range(N)) / Em(m))
    return t


ONE_NAMES = [f"T{q}" for q in range(1, 16)] + ["n2*p2"]


def main_1m():
    rng = random.Random(995511)
    rows, ys = [], []
    for _ in range(24):
        while True:
            E = [F(0)]
            acc = F(0)
            for _ in range(N - 1):
                acc += F(rng.randint(1, 9), rng.randint(1, 5))
                E.append(acc)
            XS = [F(rng.randint(1, 9), rng.randint(1, 6)) for _ in range(M)]
            if len(set(XS)) < M:
                continue
            GS = [F(rng.randint(1, 5), rng.randint(1, 6)) for _ in range(M)]
            A = [[F(0)] * N for _ in range(N)]
            for i in range(N):
                for j in range(i, N):
                    v = rand_frac(rng)
                    if v == 0:
                        v = F(1, rng.randint(2, 9))
                    A[i][j] = v
                    A[j][i] = v
            try:
                rho4, p2, n2 = build_full(E, XS, GS, A)
                row = appendix_1m_basis(2, E, XS, GS, A)
            except ZeroDivisionError:
                continue
            row.append(n2 * p2[0][2])
            rows.append([sympy.Rational(v.numerator, v.denominator)
                         for v in row])
            ys.append(sympy.Rational(rho4[0][2].numerator,
                                     rho4[0][2].denominator))
            break
    Bm = sympy.Matrix(rows)
    yv = sympy.Matrix(ys)
    aug = Bm.row_join(yv)
    print(f"rank(B) = {Bm.rank()}, rank([B|y]) = {aug.rank()}, "
          f"unknowns = {len(ONE_NAMES)}")
    if aug.rank() > Bm.rank():
        print("INCONSISTENT")
        return
    sol, params = Bm.gauss_jordan_solve(yv)
    if params.shape[0]:
        print(f"underdetermined, {params.shape[0]} free; params=0:")
        sol = sol.subs({p: 0 for p in params})
    for name, c in zip(ONE_NAMES, sol):
        print(f"  {name}: {c}")
