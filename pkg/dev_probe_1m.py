"""Fine-grained coefficient solve for the ground-excited fourth-order block."""
from fractions import Fraction as F
import random

import numpy as np

from dev_probe_mfgs4 import build_full, rand_frac, N, M


def fine_basis(m, E, XS, GS, A):
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

    cols = {}
    rng_n = range(N)
    # T1 split: a-factor A_{1l}A_{l1}A_{km}A_{1k}, denominators (w_a-E_k)D_la
    cols["T1a"] = sum(
        A[0][l] * A[l][0] * A[k][m] * A[0][k]
        * s1(lambda x, k=k, l=l: 1 / ((x - Em(k)) * D(l, x)))
        * s1(lambda x, k=k: 1 / D(k, x))
        for k in rng_n for l in rng_n) / Em(m)
    cols["T1b"] = sum(
        A[0][l] * A[l][0] * A[k][m] * A[0][k]
        * s2(lambda xa, xb, k=k, l=l:
             1 / ((xa - Em(k)) * D(l, xa) * (xa + xb)))
        for k in rng_n for l in rng_n) / Em(m)
    cols["T2a"] = sum(
        A[0][l] * A[l][0] * A[k][m] * A[0][k]
        * s1(lambda x, k=k, l=l: 1 / ((omp(m, k) + x) * D(l, x)))
        * s1(lambda x, k=k: 1 / D(k, x))
        for k in rng_n for l in rng_n) / Em(m)
    cols["T2b"] = sum(
        A[0][l] * A[l][0] * A[k][m] * A[0][k]
        * s2(lambda xa, xb, k=k, l=l:
             1 / ((omp(m, k) + xa) * D(l, xa) * (Em(m) + xa + xb)))
        for k in rng_n for l in rng_n) / Em(m)
    cols["T3a"] = sum(
        A[p][m] * A[l][p] * A[k][l] * A[0][k]
        * s1(lambda x, k=k, l=l, p=p: 1 / ((omp(l, k) + x) * D(p, x)))
        * s1(lambda x, k=k: 1 / D(k, x))
        for k in rng_n for l in rng_n for p in rng_n) / Em(m)
    cols["T3b"] = sum(
        A[p][m] * A[l][p] * A[k][l] * A[0][k]
        * s2(lambda xa, xb, k=k, l=l, p=p:
             1 / ((omp(l, k) + xa) * D(p, xa) * (Em(l) + xa + xb)))
        for k in rng_n for l in rng_n for p in rng_n) / Em(m)
    cols["T4a"] = sum(
        fac4(k, l)
        * s1(lambda x, k=k, l=l: 1 / ((omp(l, k) + x) * D(m, x)))
        * s1(lambda x, k=k: 1 / D(k, x))
        for k in rng_n for l in rng_n) / Em(m)
    cols["T4b"] = sum(
        fac4(k, l)
        * s2(lambda xa, xb, k=k, l=l:
             1 / ((omp(l, k) + xa) * D(m, xa) * (Em(l) + xa + xb)))
        for k in rng_n for l in rng_n) / Em(m)
    cols["T5a"] = sum(
        fac4(k, l)
        * s1(lambda x, k=k, l=l: 1 / ((omp(l, k) + x) * x))
        * s1(lambda x, k=k: 1 / D(k, x))
        for k in rng_n for l in rng_n) / Em(m)
    cols["T5b"] = sum(
        fac4(k, l)
        * s2(lambda xa, xb, k=k, l=l:
             1 / ((omp(l, k) + xa) * xa * (Em(l) + xa + xb)))
        for k in rng_n for l in rng_n) / Em(m)
    cols["T6a"] = sum(
        fac4(k, l)
        * s2(lambda xa, xb, k=k, l=l:
             1 / (D(m, xa) * D(k, xa) * (Em(l) + xa + xb)))
        for k in rng_n for l in rng_n) / Em(m)
    cols["T6b"] = sum(
        fac4(k, l)
        * s2(lambda xa, xb, k=k, l=l:
             1 / (xa * D(k, xa) * (Em(l) + xa + xb)))
        for k in rng_n for l in rng_n) / Em(m)
    cols["T7a"] = sum(
        A[0][l] * A[l][0] * A[k][m] * A[0][k]
        * s2(lambda xa, xb, k=k, l=l:
             1 / (D(k, xa) * D(l, xa) * (xa + xb)))
        for k in rng_n for l in rng_n) / Em(m)
    cols["T7b"] = sum(
        A[0][l] * A[l][0] * A[k][m] * A[0][k]
        * s2(lambda xa, xb, k=k, l=l:
             1 / (D(k, xa) * D(l, xa) * (Em(m) + xa + xb)))
        for k in rng_n for l in rng_n) / Em(m)
    cols["T8"] = sum(
        A[p][m] * A[l][p] * A[k][l] * A[0][k]
        * s2(lambda xa, xb, k=k, l=l, p=p:
             1 / (D(k, xa) * D(p, xa) * (Em(l) + xa + xb)))
        for k in rng_n for l in rng_n for p in rng_n) / Em(m)
    cols["T9"] = sum(
        A[0][l] * A[l][m] * A[k][0] * A[0][k]
        * s1(lambda x, k=k: 1 / D(k, x) ** 2)
        * s1(lambda x, l=l: 1 / D(l, x))
        for k in rng_n for l in rng_n) / Em(m)
    cols["T10a"] = sum(
        A[0][0] * A[0][m] * A[k][0] * A[0][k]
        * s1(lambda x, k=k: 1 / D(k, x) ** 2) * s1(lambda x: 1 / x)
        for k in rng_n) / Em(m)
    cols["T10b"] = sum(
        A[0][0] * A[0][m] * A[k][0] * A[0][k]
        * s1(lambda x, k=k: 1 / D(k, x) ** 2) * s1(lambda x: 1 / D(m, x))
        for k in rng_n) / Em(m)
    cols["T11"] = sum(
        A[m][l] * A[l][m] * A[k][0] * A[0][k]
        * s1(lambda x, l=l: 1 / (omp(m, l) - x) ** 2)
        * s1(lambda x, k=k: 1 / D(k, x))
        for k in rng_n for l in rng_n) / Em(m)
    cols["T11p"] = sum(
        A[m][l] * A[l][m] * A[k][0] * A[0][k]
        * s1(lambda x, l=l: 1 / (omp(m, l) + x) ** 2)
        * s1(lambda x, k=k: 1 / D(k, x))
        for k in rng_n for l in rng_n) / Em(m)
    cols["T12"] = sum(
        A[0][0] * A[0][m] * A[k][0] * A[0][k]
        * s1(lambda x: 1 / x ** 2) * s1(lambda x, k=k: 1 / D(k, x))
        for k in rng_n) / Em(m)
    cols["T13"] = sum(
        (A[0][m] * A[m][k] * A[0][l] * A[k][0]
         + A[0][0] * A[k][m] * A[m][l] * A[0][k])
        * s1(lambda x, l=l: 1 / (x * D(l, x)))
        * s1(lambda x, k=k: 1 / D(k, x))
        for k in rng_n for l in rng_n) / Em(m)
    cols["T14a"] = sum(
        A[k][m] * A[p][k] * A[l][p] * A[0][l] / Em(p)
        * s1(lambda x, l=l: 1 / D(l, x)) * s1(lambda x, k=k: 1 / D(k, x))
        for k in rng_n for l in rng_n for p in range(1, N)) / Em(m)
    cols["T14b"] = sum(
        A[0][l] * A[l][m] * A[k][0] * A[0][k] / Em(m)
        * s1(lambda x, l=l: 1 / D(l, x)) * s1(lambda x, k=k: 1 / D(k, x))
        for k in rng_n for l in rng_n) / Em(m)
    cols["T15"] = sum(
        A[0][0] * A[0][m] * A[k][0] * A[0][k]
        * s1(lambda x: 1 / D(m, x) ** 2) * s1(lambda x, k=k: 1 / D(k, x))
        for k in rng_n) / Em(m)
    return cols


def make_instance(rng):
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
            cols = fine_basis(2, E, XS, GS, A)
        except ZeroDivisionError:
            continue
        cols["n2p2"] = n2 * p2[0][2]
        return cols, rho4[0][2], (E, XS, GS, A)


def main():
    rng = random.Random(424242)
    names = None
    rows, ys, insts = [], [], []
    for _ in range(48):
        cols, y, inst = make_instance(rng)
        if names is None:
            names = list(cols)
        rows.append([float(cols[n]) for n in names])
        ys.append(float(y))
        insts.append(inst)
    Bm = np.array(rows)
    yv = np.array(ys)
    sol, res, rank, sv = np.linalg.lstsq(Bm, yv, rcond=None)
    resid = np.abs(Bm @ sol - yv).max()
    print(f"cols={len(names)} rank={rank} max_resid={resid:.3e}")
    for n, c in zip(names, sol):
        print(f"  {n:5s}: {c:+.6f}")


if __name__ == "__main__":
    main()
