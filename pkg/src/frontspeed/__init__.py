"""Minimal speeds of reaction-diffusion fronts in periodic media.

The speed is computed from the principal eigenvalue ``k(lambda)`` of the
conjugated linearised operator as ``c* = min_{lambda > 0} k(lambda)/lambda``.
"""
__version__ = "0.1.0"

from ._backend import COMPILED
from .assembly import (AssemblyError, Grid, OperatorMatrix, assemble_cell_operator,
                       assemble_cross_section_operator, assemble_line_operator)
from .eigen import (ConvergenceError, PrincipalPair, StructureError, growth_rate_oracle,
                    principal_eig_power, rayleigh_value)
from .frontsim import FrontMeasurement, SimState, measure_spreading_speed, step
from .medium import (CellMedium2D, CoefficientField, LineMedium, MediumError, ReactionProfile,
                     ShearMedium, builtin_media, cell_average, harmonic_mean, load_medium,
                     max_over_cell, medium_from_json, min_over_cell, validate)
from .regimes import (HypothesisError, SweepTable, check_monotone, homogenized_speed,
                      scaled_speed_by_period, sweep_diffusion_factor, sweep_large_diffusion,
                      sweep_period, sweep_reaction, sweep_reaction_factor, sweep_small_diffusion,
                      sweep_small_diffusion_shear)
from .speed import (CellProblem, LineProblem, ShearProblem, SpeedResult, analytic_speed_constant,
                    k_of_lambda, make_problem, minimal_speed, upper_bound)
