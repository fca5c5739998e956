"""Measure s -> 1+ scaling of fourth-order coherences.

Two variants per entry:
  normalized   = full entry (includes the -n2 * p2 wavefunction-norm term)
  unnormalized = entry with the norm term restored (entry + n2 * p2)

Fits d ln|rho4| / d ln(s-1) on the spec grid {1.5, 1.25, 1.125, 1.0625}.
Also checks mfgs2 against the asymptotic-state solver.
"""
import numpy as np

from tcl4.bath import BathSpec
from tcl4.systems import SystemSpec
from tcl4.mfgs import (mfgs2, mfgs4_coherences, _Route,
                       gs_divergence_prefactor, divergence_coefficient)
from tcl4.asymstate import asymptotic_state


def build(n, s, seed=7, biased=False):
    rng = np.random.default_rng(seed)
    if n == 3:
        energies = np.array([0.0, 1.3, 2.625])
    else:
        energies = np.sort(rng.uniform(0.3, 4.0, size=n))
        energies = np.concatenate([[0.0], energies])[:n]
        energies[0] = 0.0
    raw = rng.normal(size=(n, n))
    A = (raw + raw.T) / 2
    if biased:
        A[0, 0] = 0.9  # large ground diagonal drives the norm channel
    A /= np.linalg.norm(A)
    spec = BathSpec(0.1, 1.0, s)
    return SystemSpec(energies=energies, couplings=(A,), baths=(spec,))


def scan(biased=False):
    print(f"--- scan biased={biased} ---")
    grid = [1.5, 1.25, 1.125, 1.0625, 1.03125, 1.015625, 1.0078125]
    norm_v, unnorm_v = [], []
    for s in grid:
        sys = build(3, s, biased=biased)
        route = _Route(sys, None)
        n2 = -float(np.real(np.abs(route.a1) ** 2 @ route.dt()))
        raw = mfgs4_coherences(sys)
        rho = mfgs4_coherences(sys, normalized=True)
        norm_v.append(rho)
        unnorm_v.append(raw)
        print(f"s={s:<7} n2={n2:+.4e}  |rho01|={abs(rho[0,1]):.6e} "
              f"|rho12|={abs(rho[1,2]):.6e}  "
              f"|raw01|={abs(raw[0,1]):.6e} |raw12|={abs(raw[1,2]):.6e}")

    x = np.log(np.array(grid) - 1.0)
    for (i, j) in ((0, 1), (0, 2), (1, 2)):
        yn = np.log([abs(v[i, j]) for v in norm_v])
        yu = np.log([abs(v[i, j]) for v in unnorm_v])
        # slope from the last pair (closest to s = 1) plus global fit
        sn = np.polyfit(x, yn, 1)[0]
        su = np.polyfit(x, yu, 1)[0]
        snl = (yn[-1] - yn[-2]) / (x[-1] - x[-2])
        sul = (yu[-1] - yu[-2]) / (x[-1] - x[-2])
        print(f"entry ({i},{j}): slope norm fit={sn:+.4f} last={snl:+.4f}  "
              f"unnorm fit={su:+.4f} last={sul:+.4f}")

    # coefficient of 1/(s-1): Richardson from the two points closest to 1,
    # against the closed form
    sys1 = build(3, 1.0 + 1e-12, biased=biased)
    for (i, j) in ((0, 1), (0, 2), (1, 2)):
        cs = [(g - 1.0) * v[i, j] for g, v in zip(grid, unnorm_v)]
        rich = 2 * cs[-1] - cs[-2]
        cand = divergence_coefficient(sys1, i, j)
        print(f"({i},{j}): lim (s-1)rho4 ~ {rich:+.4e}  "
              f"closed form = {cand:+.4e}")


def mfgs2_check():
    for s in (0.9, 1.0, 1.1, 1.2):
        sys = build(4, s, seed=11)
        m = mfgs2(sys)
        p = asymptotic_state(sys)
        d = np.max(np.abs(m.rho2 - p.rho2))
        scale = np.max(np.abs(m.rho2))
        print(f"s={s}: max|mfgs2 - asymstate| = {d:.3e}  (scale {scale:.3e})")


if __name__ == "__main__":
    scan(biased=True)
    scan(biased=False)
