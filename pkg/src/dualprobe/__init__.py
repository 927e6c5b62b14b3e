"""Index reconstruction in acoustic media from far-field data of small
impedance probes deployed one at a time and in close pairs."""

__version__ = "0.1.0"

from .domain import (ConstantBall, FarFieldMatrix, GreenEstimate, IndexEstimate,
                     InclusionLayout, MediumSpec, SmoothBump, TotalFieldVector, WaveConfig,
                     constant_ball, evaluate_index, fibonacci_directions, grid_medium,
                     pair_layout, smooth_bump)
from .errors import (AmbiguousAlignmentError, ConfigError, DegenerateBackscatterError,
                     DualProbeError, IllConditionedProbeError, NearSingularSystemError,
                     SolverError)
from .foldy_lax import (ForwardModel, b_matrix, capacitance, inject_model_residual,
                        perturbed_far_field, solve_scattering_coefficients,
                        synthesize_measurements)
from .inversion import (ProbePairRecord, align_signs, extract_green, extract_index,
                        extract_total_field_vector, reconstruct_index_map)
from .solver import LippmannSchwingerSolver, green_function, solve_total_field
from .stability import (NoiseModel, RegimeSpec, ShiftModel, add_noise, convergence_rate,
                        noisy_reconstruct, regime_check, shift_layout)
