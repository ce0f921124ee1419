"""Discrete Hodge theory on simplicial cochain complexes."""

from .cochain import SCHEMES, Cochain, CochainSpace, OperatorSet, d, delta, inner, laplacian, mass_matrix
from .hodge import HarmonicBasis, HodgeSplit, betti, decompose, harmonic_basis, project_H
from .mesh import SimplicialComplex, boundary_matrix, parse_off, validate, write_off
from .spectral import (
    GreenSolve,
    Spectrum,
    check_commutation,
    coercivity_constant,
    expand,
    green,
    mu_variational,
    spectrum,
)

__all__ = [
    "SCHEMES", "Cochain", "CochainSpace", "OperatorSet", "d", "delta", "inner", "laplacian",
    "mass_matrix", "HarmonicBasis", "HodgeSplit", "betti", "decompose", "harmonic_basis",
    "project_H", "SimplicialComplex", "boundary_matrix", "parse_off", "validate", "write_off",
    "GreenSolve", "Spectrum", "check_commutation", "coercivity_constant", "expand", "green",
    "mu_variational", "spectrum",
]
