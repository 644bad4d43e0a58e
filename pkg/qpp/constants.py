# Numerical tolerances shared across modules
HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-12
POSITIVITY_SLACK = 1e-10
GROUP_TOL = 1e-9
COLLINEARITY_TOL = 1e-8
LOCUS_ZERO_TOL = 1e-12
RELAXATION_A_CAP = 0.5 - 1e-15
ENTROPY_PURE_GUARD = 1e-9
BLOCK_TOL = 1e-6
NEAR_BREAKDOWN_FACTOR = 10.0

# Integrator defaults
DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-12
DEFAULT_T_MAX = 50.0
DEFAULT_STABLE_TOL = 1e-8
H_MAX_RATE_FACTOR = 1e6

# Realizability sampling
REALIZABILITY_SAMPLES = 512

# Landscape grid cap (points)
MAX_GRID_POINTS = 1_000_000

# Environment variable names
NUM_THREADS_ENV = "QPP_NUM_THREADS"
LOGGING_LEVEL_ENV = "QPP_LOGGING_LEVEL"
