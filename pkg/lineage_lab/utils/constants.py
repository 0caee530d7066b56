import os

from dotenv import load_dotenv

load_dotenv()

# Process-wide defaults, overridable from the environment or a .env file
WORKERS = int(os.getenv("LINEAGE_LAB_WORKERS", "1"))
POPULATION_CAP = int(os.getenv("LINEAGE_LAB_POPULATION_CAP", "1000000"))
ALPHA_MAX = float(os.getenv("LINEAGE_LAB_ALPHA_MAX", "20"))
NEWTON_TOL = float(os.getenv("LINEAGE_LAB_NEWTON_TOL", "1e-12"))
NEWTON_MAX_ITER = int(os.getenv("LINEAGE_LAB_NEWTON_MAX_ITER", "200"))
LOG_LEVEL = os.getenv("LINEAGE_LAB_LOG_LEVEL", "INFO").upper()

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

# Exponential moments above this are treated as overflow
SATURATION_LIMIT = 1e300

# Tabulated kernels: normalization tolerance and Simpson refinement limits
NORMALIZATION_TOL = 1e-10
TAIL_MASS_TOL = 1e-12
SIMPSON_INITIAL_NODES = 1025
SIMPSON_MAX_NODES = 262145

# Initial condition
INITIAL_CDF_NODES = 10_000
DEFAULT_TAIL_TOL = 1e-6
TRUNCATION_REFERENCE_K = 2

# Solver
DEFAULT_SMOOTHNESS_THRESHOLD = 50.0
DEFAULT_A_LEVELS = (0.0, 0.02, 0.05)

# Stream identifiers mixed into SeedSequence spawn keys
STREAM_SIMULATION = 0
STREAM_SPINES = 1
STREAM_INITIAL = 2

# Exit codes of the command line interface
EXIT_OK = 0
EXIT_STATISTICAL_FAILURE = 2
EXIT_CONFIG_ERROR = 3

# Kernel configuration mapping: maps kernel kinds to their class and parameters
KERNEL_CONFIG = {
    "gaussian": {
        "class_name": "GaussianKernel",
        "parameters": ["sigma"],
    },
    "two_sided_exponential": {
        "class_name": "TwoSidedExponentialKernel",
        "parameters": ["lam"],
    },
    "tabulated": {
        "class_name": "TabulatedKernel",
        "parameters": ["nodes"],
    },
}

# Aliases accepted in config files
KERNEL_ALIASES = {
    "normal": "gaussian",
    "laplace": "two_sided_exponential",
    "two-sided-exponential": "two_sided_exponential",
    "table": "tabulated",
}
