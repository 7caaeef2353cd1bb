"""Ultrastrong-coupling circuit QED toolkit for building graph codes.

Subpackages and modules:

* :mod:`uscqec.fluxqubit` -- six-junction flux qubit spectra and coupling coefficients
* :mod:`uscqec.resonator` -- eigenmodes of a junction-interrupted coplanar resonator
* :mod:`uscqec.dynamics` -- multi-qubit, multi-mode Rabi Hamiltonian, propagators, CZ gate
* :mod:`uscqec.graphcode` -- stabilizer algebra, cluster states, five-qubit and Steane codes
* :mod:`uscqec.noise` -- Monte Carlo depolarizing-noise fidelity estimates
* :mod:`uscqec.cli` -- batch command line
"""

__version__ = "0.1.0"
