from ._errors import LabError, ConfigurationError, DomainError, ShapeError, SingularityError, DegenerateInputError, \
    DivergenceError
from ._schedule import Schedule, make_schedule, half_log_snr, DEFAULT_BETA0, DEFAULT_BETA1, DEFAULT_EPSILON, \
    DEFAULT_T, DEFAULT_N
from ._prior import GmmPrior, make_prior, make_toy_prior, load_prior, prior_from_dict, marginal_log_density, score, \
    denoise, denoise_vjp, sample_prior, DenoiserInterface, GmmDenoiser, CountingDenoiser, DEFAULT_K, DEFAULT_DIM, \
    DEFAULT_TAU
from ._operators import ForwardOperator, IdentityOperator, MatrixOperator, MaskOperator, DownsampleOperator, \
    Kernel, CircConvOperator, CircConv2DOperator, NonlinearOperator, centered_offsets, gaussian_kernel, circ_conv, \
    circ_corr, circ_conv_kernel_vjp, mask_operator, downsample_operator, circ_conv_operator, gaussian_operator, \
    nonlinear_operator, add_noise, make_kernel, make_operator, TASK_KINDS, KIND_IDENTITY, KIND_INPAINT, \
    KIND_DOWNSAMPLE, KIND_DEBLUR, KIND_GAUSSIAN, KIND_NONLINEAR, KIND_BLIND_DEBLUR, KIND_MATRIX, KIND_DEBLUR_2D
from ._optim import AdamState, adam_step, soft_threshold, Mapping, IdentityMapping, LinearMapping, InnerProblem, \
    InnerResult, solve_inner, MODE_SUBGRADIENT, MODE_PROXIMAL, MODES, DEFAULT_L2_WEIGHT
from ._sampler import RetainedContextCounter, check_step_index, step_coefficients, ddim_step, ddim_step_vjp, \
    sample_compose, compose_vjp, write_trace_csv, StepMapping, ComposedMapping
from ._metrics import MetricSet, compute_metrics, structural_similarity_windows, LAYOUT_FLAT, LAYOUT_GRID, LAYOUTS, \
    PSNR_INF
from ._config import ExperimentConfig, config_from_dict, load_config, SOLVER_KINDS, BLIND_SOLVER_KINDS, \
    SOLVER_DMILO, SOLVER_DMILO_PGD, SOLVER_DMPLUG, SOLVER_DMILO_BID, SOLVER_DMILO_PGD_BID, PROJECTIONS, \
    PROJECTION_MEASUREMENT, PROJECTION_DISTANCE, SOURCES, SOURCE_PRIOR, SOURCE_RANGE
from ._solver import Solver, SolverState, BidState, RunReport, init_chain, measurement_residual, \
    DEFAULT_OUTER_ITERS
from ._writer import ResultWriter, TrialRecord, CSV_COLUMNS
