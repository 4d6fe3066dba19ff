"""Two-time-scale stochastic approximation toolkit.

Simulates the coupled fast/slow fixed-point iteration under the two
standard step-size regimes, evaluates the explicit mean-square bound
constants, and checks rates and auxiliary inequalities numerically.
"""

__version__ = "0.1.0"

from .core import (AffineMaps, DerivedConstants, NoiseModel, Problem, ValidationReport, banach,
                   fixed_point_of_f, spectral_norm, validate_problem)
from .exceptions import (AdmissibilityError, ConfigError, ConvergenceError, DomainError, EnsembleError,
                         NumericBlowupError, SideConditionWarning, StructuralError, TTSAError)
from .kernels import BACKEND
from .schedules import (BoundConstants, Regime, Schedule, alpha_at, beta_at, bound_curve, build_schedule,
                        compute_constants_regime1, compute_constants_regime2)
from .engine import State, Trajectory, record_indices, run_trajectory, step, z_update_check
from .problems import (LagrangianSpec, LinearTTSASpec, PolyakSpec, SaddleQuadraticSpec, generate_random_hurwitz,
                       make_affine_problem, make_lagrangian, make_linear_ttsa, make_polyak, make_saddle)
from .analysis import (EnsembleStats, RateFit, check_bound_domination, fit_rate, oracle_aux_lemma,
                       oracle_noise_variance, oracle_xstar_lipschitz, run_ensemble)

__all__ = [name for name in dir() if not name.startswith("_")]
