"""Sweep generic N=3 systems for a clean 1/(s-1) slope fit.

Fits log|rho4_ij| against log(s-1) on the four-point grid and reports
per-entry and dominant-entry slopes; the finite background shifts the
fit away from -1, so the sweep looks for a draw where the divergent
channel dominates already at s = 1.5.
"""
import numpy as np

from tcl4.bath import BathSpec
from tcl4.systems import SystemSpec
from tcl4.mfgs import mfgs4_coherences

GRID = (1.5, 1.25, 1.125, 1.0625)


def fit(vals):
    x = np.log(np.array(GRID) - 1.0)
    y = np.log(np.abs(vals))
    return np.polyfit(x, y, 1)[0]


def sweep(seed, wc):
    rng = np.random.default_rng(seed)
    energies = np.array([0.0, *np.sort(rng.uniform(0.5, 3.0, size=2))])
    raw = rng.normal(size=(3, 3))
    A = (raw + raw.T) / 2
    A /= np.linalg.norm(A)
    mats = []
    for s in GRID:
        sys = SystemSpec(energies=energies,
                         couplings=(A,),
                         baths=(BathSpec(0.1, wc, s),))
        mats.append(mfgs4_coherences(sys))
    out = {}
    for (i, j) in ((0, 1), (0, 2), (1, 2)):
        out[(i, j)] = fit([m[i, j] for m in mats])
    dom = max(((i, j) for (i, j) in out),
              key=lambda p: abs(mats[-1][p]))
    mx = fit([np.max(np.abs(m)) for m in mats])
    return out, dom, mx, abs(A[0, 0])


def main():
    for wc in (1.0, 4.0, 10.0):
        for seed in range(12):
            out, dom, mx, a00 = sweep(seed, wc)
            flat = "  ".join(f"({i},{j}) {v:+.3f}" for (i, j), v in out.items())
            hit = [p for p, v in out.items() if abs(v + 1.0) < 0.05]
            tag = f" <-- {hit}" if hit or abs(mx + 1.0) < 0.05 else ""
            print(f"wc={wc:<5} seed={seed:<3} |A00|={a00:.3f} "
                  f"{flat}  dom={dom} max-fit={mx:+.3f}{tag}")


if __name__ == "__main__":
    main()
