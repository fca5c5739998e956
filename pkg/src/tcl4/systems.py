"""System models: energies, coupling operators, and genericity checks.

A system is specified in the energy eigenbasis: a strictly increasing
energy vector, one Hermitian coupling matrix per bath (unit Frobenius
norm), and the bath parameters themselves.  The three stock models are
a GUE random system (generic by construction), the unbiased spin-boson
model, and pure dephasing; the latter two deliberately violate one
genericity condition each.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bath import BathSpec, asymp_sd
from .errors import DomainError

_TOL = 1e-12


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SystemSpec:
    """Energies + coupling operators + baths, validated on construction."""

    energies: np.ndarray
    couplings: tuple
    baths: tuple

    def __post_init__(self):
        e = _frozen(np.asarray(self.energies, dtype=float))
        if e.ndim != 1 or len(e) < 2:
            raise DomainError("need at least two energy levels")
        if np.any(np.diff(e) <= 0):
            raise DomainError("energies must be strictly increasing")
        n = len(e)
        cs = []
        for a in self.couplings:
            a = np.asarray(a, dtype=complex)
            if a.shape != (n, n):
                raise DomainError(f"coupling shape {a.shape} != ({n}, {n})")
            if np.max(np.abs(a - a.conj().T)) > 1e-14:
                raise DomainError("coupling matrix is not Hermitian")
            fro = np.linalg.norm(a)
            if abs(fro - 1.0) > _TOL:
                raise DomainError(
                    f"coupling Frobenius norm {fro} is not 1")
            cs.append(_frozen(a))
        if len(cs) != len(self.baths):
            raise DomainError("one coupling matrix per bath required")
        if not all(isinstance(b, BathSpec) for b in self.baths):
            raise DomainError("baths must be BathSpec instances")
        object.__setattr__(self, "energies", e)
        object.__setattr__(self, "couplings", tuple(cs))
        object.__setattr__(self, "baths", tuple(self.baths))

    @property
    def n_levels(self) -> int:
        return len(self.energies)

    @property
    def n_baths(self) -> int:
        return len(self.baths)

    def bohr(self) -> "BohrTable":
        return BohrTable.from_energies(self.energies)


@dataclass(frozen=True)
class BohrTable:
    """All Bohr frequencies w[n,m] = E_n - E_m with a distinct-value index.

    values holds the sorted distinct frequencies (grouped at relative
    quantum 1e-12 of the largest gap); index[n, m] points into values.
    """

    omega: np.ndarray
    values: np.ndarray
    index: np.ndarray

    @classmethod
    def from_energies(cls, energies) -> "BohrTable":
        e = np.asarray(energies, dtype=float)
        om = e[:, None] - e[None, :]
        scale = float(np.max(np.abs(om))) or 1.0
        q = np.round(om / (1e-12 * scale))
        _, first, idx = np.unique(q, return_index=True, return_inverse=True)
        reps = om.ravel()[first]  # representative per group
        return cls(omega=_frozen(om), values=_frozen(reps),
                   index=_frozen(idx.reshape(om.shape)))

    @property
    def distinct_count(self) -> int:
        return len(self.values)


def gue_system(n: int, seed: int, bath: BathSpec) -> SystemSpec:
    """Random system with GUE energies and a GUE coupling operator.

    Eigenvalues of a GUE draw, shifted so the ground energy is 0 and
    rescaled so the largest Bohr frequency is exactly 1.2 (deep inside
    the adiabatic regime for the stock omega_c = 10 bath).  The coupling
    is an independent Hermitized draw, Frobenius-normalized.
    Deterministic per seed.
    """
    if n < 2:
        raise DomainError("n must be >= 2")
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    h = (x + x.conj().T) / 2.0
    e = np.linalg.eigvalsh(h)
    e = e - e[0]
    e = e * (1.2 / e[-1])
    y = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    a = (y + y.conj().T) / 2.0
    a = a / np.linalg.norm(a)
    # re-symmetrize after scaling so the Hermiticity check is exact
    a = (a + a.conj().T) / 2.0
    return SystemSpec(energies=e, couplings=(a,), baths=(bath,))


def spin_boson_unbiased(bath: BathSpec) -> SystemSpec:
    """Two-level system, energy splitting 1, coupling purely off-diagonal.

    In the energy eigenbasis the coupling operator has zero diagonal
    (Frobenius-normalized), so the dephasing condition fails; the model
    is the stock counterexample with vanishing divergent generator part.
    """
    a = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex) / np.sqrt(2.0)
    return SystemSpec(energies=np.array([-0.5, 0.5]), couplings=(a,),
                      baths=(bath,))


def pure_dephasing(n: int, bath: BathSpec) -> SystemSpec:
    """Coupling diagonal in the energy basis: no transitions, FGR fails."""
    if n < 2:
        raise DomainError("n must be >= 2")
    gaps = 1.0 + 0.137 * np.arange(n - 1)  # nonuniform, nondegenerate
    e = np.concatenate([[0.0], np.cumsum(gaps)])
    d = np.arange(1, n + 1, dtype=float) - (n + 1) / 2.0
    if n % 2 == 1:
        d[n // 2] += 0.25  # keep all diagonal entries distinct
    a = np.diag(d).astype(complex)
    a = a / np.linalg.norm(a)
    return SystemSpec(energies=e, couplings=(a,), baths=(bath,))


def validate(sys: SystemSpec) -> dict:
    """Genericity report: FGR, dephasing, and nondegeneracy conditions.

    FGR: every level pair must be connected by at least one bath with
    nonzero coupling and nonzero spectral density at the (positive)
    transition frequency.  Dephasing: some coupling operator must have
    an inhomogeneous diagonal.  All thresholds 1e-12.
    """
    e = sys.energies
    n = sys.n_levels
    fgr = True
    for m in range(n):
        for k in range(m + 1, n):
            w = e[k] - e[m]
            total = 0.0
            for a, b in zip(sys.couplings, sys.baths):
                total += abs(a[k, m]) ** 2 * asymp_sd(b, w).J
            if total <= _TOL:
                fgr = False
    deph = 0.0
    for a in sys.couplings:
        d = np.real(np.diag(a))
        deph += np.sum(np.abs(d[:, None] - d[None, :]))
    return {
        "fgr": fgr,
        "dephasing": bool(deph > _TOL),
        "nondegenerate": bool(np.min(np.diff(e)) > _TOL),
    }


def to_dict(sys: SystemSpec) -> dict:
    """JSON-ready dict with explicit matrices (re/im pairs)."""
    return {
        "energies": [float(x) for x in sys.energies],
        "couplings": [
            [[[float(z.real), float(z.imag)] for z in row] for row in a]
            for a in sys.couplings
        ],
        "baths": [
            {"lam": b.lam, "omega_c": b.omega_c, "s": b.s,
             "beta": "inf" if np.isinf(b.beta) else b.beta}
            for b in sys.baths
        ],
    }


def system_from_dict(d: dict) -> SystemSpec:
    baths = tuple(
        BathSpec(lam=float(b["lam"]), omega_c=float(b["omega_c"]),
                 s=float(b["s"]), beta=float(b["beta"]))
        for b in d["baths"]
    )
    couplings = tuple(
        np.array([[complex(re, im) for re, im in row] for row in a])
        for a in d["couplings"]
    )
    return SystemSpec(energies=np.array(d["energies"], dtype=float),
                      couplings=couplings, baths=baths)
