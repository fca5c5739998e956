"""Optimized TCL4 master-equation generators for power-law bosonic baths.

Library layout:

    specfun     complex incomplete-gamma machinery
    quad        adaptive quadrature (oscillatory tails, principal values)
    bath        single-bath spectral closed forms and validators
    systems     system models (GUE draws, spin-boson, pure dephasing)
    generators  TCL2/TCL4 superoperator assembly + brute-force oracles
    asymstate   canonical perturbation theory on the asymptotic generator
    mfgs        mean-force ground state via Rayleigh-Schrodinger theory
    superop     Liouville-space linear algebra and propagation
    cli         config-driven experiment runner (`tcl4` entry point)
"""

__version__ = "0.1.0"
