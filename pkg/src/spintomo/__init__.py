"""Flying-spin transmission through exchange-coupled static qubits.

Subpackages:
  qmat     density matrices, Pauli decompositions, entropy, Bloch vectors
  scatter  single- and two-impurity scattering blocks and transmission
  gates    static-register gate sequences and observable conjugation
  tomo     measurement plans and state reconstruction from transmission
  engine   repeated-collision polarization/depolarization cycles
  cli      command line entry point
"""

__version__ = "0.1.0"
