"""Numerical tolerances shared by every module."""

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    mass_symmetry: float = 1e-14
    stiffness_symmetry: float = 1e-12
    adjointness: float = 1e-10
    positivity: float = 1e-12
    # harmonic modes: generalized eigenvalues below kernel * lambda_max
    kernel: float = 1e-8
    # smallest kept eigenvalue must exceed gap_factor * largest discarded one
    gap_factor: float = 10.0
    orthonormality: float = 1e-10
    decomposition: float = 1e-9
    uniqueness: float = 1e-8
    green: float = 1e-8
    green_orthogonality: float = 1e-9
    eigen_residual: float = 1e-8
    multiplicity_gap: float = 1e-6
    cg_rtol: float = 1e-11
    cg_cap_factor: int = 10
    cholesky_pivot: float = 1e-14
    symmetric_input: float = 1e-12
    # dense factorizations are used up to this many unknowns
    dense_limit: int = 2000


DEFAULT = Tolerances()
