"""Forward and inverse scattering for the Zakharov-Shabat system.

Potentials may be meromorphic; Jost solutions are integrated along a
complex contour that avoids their poles.  Reflectionless pairs are rebuilt
from their discrete spectral data by a finite linear solve.
"""

__version__ = "0.1.0"

from .contour_ode import Contour, Jost, JostSolution, build_contour, continue_in_k, integrate_zs
from .discrete import DiscreteEigen, ReconstructionInput
from .potentials import PotentialPair, Symmetry, classify_symmetry, locate_real_poles, make_potential
from .reconstruct import (
    assemble_linear_system,
    recover_potentials,
    residue_terms,
    roundtrip,
    solve_jost,
)
from .scattering import (
    ScatteringData,
    check_symmetry_relations,
    reflectionless_test,
    riccati_formal_series,
    scatter_at,
    scatter_grid,
    schrodinger_form,
    stokes_matrices,
)
from .spectrum import count_zeros, extract_discrete_data, refine_zero

__all__ = [
    "Contour",
    "Jost",
    "JostSolution",
    "build_contour",
    "continue_in_k",
    "integrate_zs",
    "DiscreteEigen",
    "ReconstructionInput",
    "PotentialPair",
    "Symmetry",
    "classify_symmetry",
    "locate_real_poles",
    "make_potential",
    "assemble_linear_system",
    "recover_potentials",
    "residue_terms",
    "roundtrip",
    "solve_jost",
    "ScatteringData",
    "check_symmetry_relations",
    "reflectionless_test",
    "riccati_formal_series",
    "scatter_at",
    "scatter_grid",
    "schrodinger_form",
    "stokes_matrices",
    "count_zeros",
    "extract_discrete_data",
    "refine_zero",
]
