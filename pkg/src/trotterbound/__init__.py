"""Rigorous upper bounds on second-order Trotter error for
diagonal-Coulomb fermionic Hamiltonians, via exact sector-restricted
spectral norms and sign-problem-free projector Monte Carlo."""

__version__ = "0.1.0"

from .determinants import SectorSpec, half_filling_sector
from .hamiltonians import BUILDERS, DiagonalCoulombHamiltonian
from .commutators import VtvEngine, VttEngine, make_engine
from .exact_oracle import (
    SectorMatrix,
    TrotterErrorCalculator,
    build_sector_matrix,
    engine_norm,
    exact_trotter_error,
    spectral_norm,
)
from .fciqmc import RunConfig, RunReport, extrapolate_population_bias, run
from .trotter_bounds import (
    NormInputs,
    l1_bound,
    tighter_triangle_bound,
    trotter_error_norm,
    trotter_steps,
)
