"""Plane-wave TFW solvers for perfect crystals, local defects and the homogeneous host."""

__version__ = "0.1.0"

from .config import ExperimentConfig, parse_config
from .coulomb import build_kernel, coulomb_form_DR, coulomb_form_free, poisson_periodic
from .crystal import defect_diagnostics, jellium_state, run_thermo_scan, solve_perfect
from .field import GridFunction, periodic_convolve, restrict_to_cell, sobolev_norm, to_fourier
from .functional import PerfectCrystalState, TfwParams, convexity_gap, defect_energy, tfw_energy
from .jellium import JelliumParams, jellium_solve, kernel_g_hat, kernel_h_hat, kernel_realspace
from .lattice import Lattice, build_grid, wrap_to_cell
from .minimize import SolverConfig, minimize_constrained, minimize_defect_constrained, minimize_defect_free
from .nuclear import Gaussian, GaussianSum, NuclearModel
