"""Random invariant manifolds for the stochastic damped wave equation and its heat limit."""

from .spectral import GridConfig, Nonlinearity, QSpectrum
from .ou import NoisePath, OUPath, build_path
from .wave_operator import PhasePoint, gap_check
from .lyapunov_perron import LPConfig, LPConvergenceError, lp_solve_heat, lp_solve_wave
from .integrators import BlowUpError, CoupledParams, run_coupled

__all__ = [
    "GridConfig", "Nonlinearity", "QSpectrum", "NoisePath", "OUPath", "build_path", "PhasePoint",
    "gap_check", "LPConfig", "LPConvergenceError", "lp_solve_heat", "lp_solve_wave", "BlowUpError",
    "CoupledParams", "run_coupled",
]
__version__ = "0.1.0"
