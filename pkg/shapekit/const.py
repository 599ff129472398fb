FORMAT_VERSION = "1.0"
CONFIG_SCHEMA_FILE = "resources/config_schema.json"
# kernel
KERNEL_FAMILY = "gaussian"
KERNEL_LENGTHSCALE = 1.0
S_MAX = 2
ORDER_S = 1
TOL_PSD = 1e-8
GRAM_JITTER = 1e-10
# linalg
RANK_TOL = 1e-10
MAX_RANK = 2000
NNLS_KKT_TOL = 1e-10
NNLS_ITER_FACTOR = 10
OMEGA_JITTER = 1e-10
SOLVE_JITTER = 1e-10
SOLVE_JITTER_TRIES = 4
# estimator
FO_TOL = 1e-7
DENSE_MAX_M = 500
SOLVER_PATH = "auto"
# inference
MC_REPS = 10000
MC_REPS_MIN = 100
MC_CHUNK = 256
TEST_LEVELS = (0.01, 0.05, 0.10)
TEST_DIRECTION = "nonneg"
TEST_SEED = 0
TEST_ALPHA_INDEX = None
THREADS = 1
NONNEG_TOL = 1e-12
# simulation
SIM_REPS = 500
SIM_LEVEL = 0.05
SIM_MC_REPS = 1000
SIM_SEED = 0
SIM_N_LIST = (10,)
SIM_SAMPLE_LIST = (500, 1000, 2000)
SIM_DESIGNS = ("identity", "decay", "spike")
SIM_VIOLATIONS = ("null", "mild", "moderate", "strong")
SIM_C_MILD = 1.0
SIM_C_MOD = 1.0
SIM_C_STRONG = 1.0
SIM_PLUGIN = "sample"
SIM_PLUGIN_RIDGE = 1e-8
SIM_DECAY_GAMMA = 1.0
SIM_SPIKE_VALUE = 10.0
SIM_SPIKE_MIN = 2
SIM_SPIKE_FRACTION = 0.1
SIM_BULK_LOW = 0.5
SIM_BULK_HIGH = 1.5
VIOLATION_FRACTIONS = {"mild": 0.05, "moderate": 0.10, "strong": 0.25}
# data files
WEIGHT_PRESET = "level"
WEIGHT_PREFIX = "w_"
CSV_FLOAT_FORMAT = "%.17g"
SIMULATION_CSV_COLUMNS = ("design", "n", "N", "violation", "reps", "rejection_rate", "mc_stderr")
# exit codes
EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_INPUT = 2
EXIT_SOLVER = 3
EXIT_DEGENERATE = 4
