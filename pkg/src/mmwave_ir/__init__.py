"""Iterative-reweighted super-resolution channel estimation for hybrid mmWave MIMO."""

from .baselines import GridEstimate, nmse, omp_estimate, spectral_efficiency
from .channel import (
    ChannelParams,
    assemble_channel,
    circular_distance,
    sample_channel,
    steering_matrix,
    steering_vector,
    steering_vector_derivative,
    wrap_angle,
)
from .errors import DimensionError, ParameterError, SolverError
from .harness import ExperimentConfig, emit_csv, run_sweep, run_trial
from .ir_solver import (
    IrResult,
    IrState,
    SolverOptions,
    descend_angles,
    log_sum_objective,
    prune_paths,
    run_ir,
    solve_gains,
    surrogate_gradient,
    surrogate_value,
    update_lambda,
    weight_matrix,
)
from .pipeline import PipelineResult, estimate_channel
from .sounding import (
    MeasurementSet,
    SoundingSetup,
    effective_matrix,
    generate_combiners,
    generate_pilots,
    make_setup,
    measure,
    snr_to_noise_variance,
)
from .svd_init import CoarseEstimate, choose_n_init, dft_dictionary, precondition

__version__ = "0.1.0"
