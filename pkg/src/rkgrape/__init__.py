"""Open-system GRAPE by direct Runge-Kutta integration of the master equation.

Forward states and backward costates are propagated as d x d matrices
(never as d^2-dimensional Liouville vectors), which turns the per-step cost
from d^6 matrix exponentials into d^3 matrix products.  Applied here to
active reset of a dispersively coupled readout resonator.
"""

from .bfgs import OptimizerConfig, OptimizerState
from .cqed import (
    CalibrationResult,
    DispersiveModel,
    MeasurementPulse,
    ResetReport,
    ResetScenario,
    build_branch_hamiltonians,
    calibrate_one_photon,
    clear_initial_guess,
    prepare_measurement_state,
    run_reset,
    speed_limit_sweep,
    steady_state_photon_analytic,
)
from .errors import (
    CalibrationError,
    ConfigError,
    DimensionTooSmallError,
    DivergenceError,
    GridMismatchError,
    IntegrationError,
    RkGrapeError,
)
from .filters import (
    ControlGrid,
    SubpixelGrid,
    TransferMatrix,
    apply_filter,
    backprop_gradient,
    build_gaussian_transfer,
)
from .grape import (
    GradientResult,
    OptimizationProblem,
    WeightedState,
    compute_gradient,
    evaluate_objective,
    optimize,
    photon_penalty,
    photon_penalty_gradient,
)
from .liouville import Superoperator, benchmark_scaling, build_superoperator, expm_propagator
from .operators import (
    DissipationChannel,
    LindbladAction,
    annihilation,
    coherent_state,
    expectation,
    fock_state,
    lindblad_adjoint_rhs,
    lindblad_rhs,
    number_operator,
    trace_distance,
    truncation_leak,
)
from .propagation import (
    IntegratorConfig,
    PiecewiseGenerator,
    Trajectory,
    propagate_backward,
    propagate_forward,
    rk_step_budget,
    trajectory_memory_bytes,
)

__version__ = "0.1.0"
