VERSION = '0.1.0'

# Alphabet
MAX_ALPHABET_SIZE = 64

DEFAULT_THETA = 0.5

# Measures
STOCHASTIC_ROW_TOL = 1e-12

STATIONARY_RESIDUAL_TOL = 1e-12

STATIONARY_MAX_ITERATIONS = 1_000_000

GIBBS_DEPTH_MAX = 16

# Observables
DEFAULT_DEPTH_CAP = 100

DEFAULT_DIGIT_CAP = 128

PARETO_MAX_ZERO_RUN = 100

# Snap tolerance for floor/ceil of logarithms that should land on integers
LOG_SNAP_TOL = 1e-9

# Trimming
B_MAX = 2 ** 16

RELATIVE_TOL = 1e-9

# Norming
CONJUGATE_TOL = 1e-10

CONJUGATE_MAX_ITERATIONS = 200

STPETE_W_EXPONENT = 0.55

# Spectral
TRANSFER_DEPTH_MAX = 12

SEMINORM_DEPTH_MAX = 12

SPECTRAL_DIMENSION_MAX = 4096

POWER_ITERATION_TOL = 1e-14

POWER_ITERATION_MAX = 1_000_000

GAP_VIOLATION_TOL = 1e-8

DEFAULT_EPS0 = 0.9

DEFAULT_K2_CEILING = 1 + 1e-9

# Experiments
MAX_CHECKPOINT = 10 ** 8

MAX_ENSEMBLE_SIZE = 10 ** 4

DEFAULT_CHECKPOINTS = [10 ** 3, 10 ** 4, 10 ** 5, 10 ** 6, 10 ** 7]

DEFAULT_V_HAT = 3.0

DEFAULT_EPS = 0.1

DEFAULT_BLOCK_SIZE = 2 ** 16

THREADS_ENV_VAR = 'TRIMSHIFT_THREADS'

SLOW_TESTS_ENV_VAR = 'TRIMSHIFT_SLOW_TESTS'

# Outputs
CSV_SCHEMA_VERSION = 1

REPORT_CSV_FILE = 'report.csv'

SUMMARY_JSON_FILE = 'summary.json'

MANIFEST_JSON_FILE = 'manifest.json'

CSV_COLUMNS = {
    'trim': ['n', 'path', 'S_n', 'b_n', 'S_trim', 'd_n', 'ratio'],
    'truncate': ['n', 'path', 'f_n', 'T_n', 'expected', 'ratio', 'plateau',
                 'count_above', 'count_equal', 'sandwich_ok'],
    'exceedance': ['n', 'path', 'f_n', 'count_above', 'count_equal', 'expected_above',
                   'expected_equal', 'gamma', 'gamma_prime', 'ratio', 'within_gamma',
                   'within_gamma_prime', 'sandwich_ok'],
}
