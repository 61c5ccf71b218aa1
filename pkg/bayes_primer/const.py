"""Constants for the bayes-primer toolkit."""

from typing import Final

# Package identity
DOMAIN: Final = "bayes_primer"
VERSION: Final = "1.0.0"
PROG_NAME: Final = "bayes-primer"

# Seeding
SEED_ENV_VAR: Final = "BAYES_PRIMER_SEED"
MAX_SEED: Final = 2**64 - 1
GENERATED_SEED_BITS: Final = 63

# Numerical tolerances
PROB_SUM_TOLERANCE: Final = 1e-10
POINT_EQUALITY_TOLERANCE: Final = 1e-12
BETA_SELECT_TOLERANCE: Final = 1e-4

# beta_select search box on log(a + b) (log-parameters in [-5, 12])
BETA_SELECT_LOG_SIZE_MIN: Final = -4.3
BETA_SELECT_LOG_SIZE_MAX: Final = 12.7
BETA_SELECT_LOGIT_MEAN_BOUND: Final = 25.0

# Sampler defaults
DEFAULT_ITERATIONS: Final = 10_000
DEFAULT_BURN_IN_FRACTION: Final = 0.1
DEFAULT_MAX_LAG: Final = 50
DEFAULT_SIM_SIZE: Final = 10_000
DEFAULT_LEVEL: Final = 0.9
DEFAULT_PROPOSAL_SCALE: Final = 1.0

# Pilot tuning (acceptance target window)
TUNE_TARGET_LOW: Final = 0.2
TUNE_TARGET_HIGH: Final = 0.5
TUNE_ROUNDS: Final = 20
TUNE_ITERATIONS: Final = 500

# Acceptance rates outside this window trigger a warning
ACCEPTANCE_WARN_LOW: Final = 0.1
ACCEPTANCE_WARN_HIGH: Final = 0.9

# Laplace approximation
LAPLACE_TOLERANCE: Final = 1e-8
LAPLACE_MAX_ITERATIONS: Final = 20_000
LAPLACE_MAX_SWEEPS: Final = 50
HESSIAN_RELATIVE_STEP: Final = 1e-4
HESSIAN_MIN_STEP: Final = 1e-4

# Hierarchical model hyperpriors
HIER_LOG_K_MIN: Final = 0.0  # log 1
HIER_LOG_K_MAX: Final = 9.210340371976184  # log 10^4
HIER_TAU_SD_MAX_FACTOR: Final = 100.0
DEFAULT_HIER_PROPORTION_SCALE: Final = (0.6, 1.2)  # (logit eta, log K)
DEFAULT_HIER_LOG_TAU_SCALE: Final = 1.0

# Logistic regression
DEFAULT_LOGISTIC_PRIOR_SD: Final = 10.0
OPTIMAL_RW_FACTOR: Final = 2.4

# Posterior predictive checks
DEFAULT_REPLICATES: Final = 1000
MIN_TAIL_REPLICATES: Final = 100
PPC_PARTITIONS: Final = 8

# Model language
MAX_SOURCE_BYTES: Final = 1_000_000
MODEL_FILE_SUFFIX: Final = ".bmodel"

# Output formats
FORMAT_CSV: Final = "csv"
FORMAT_JSON: Final = "json"
OUTPUT_FORMATS: Final = (FORMAT_CSV, FORMAT_JSON)
DRAW_INDEX_COLUMN: Final = "draw_index"
SEED_KEY: Final = "seed"

# JSON keys with a stable schema
KEY_T_OBSERVED: Final = "t_observed"
KEY_T_REPLICATES: Final = "t_replicates"
KEY_TAIL_PROB: Final = "tail_prob"
KEY_LABEL: Final = "label"
KEY_SUMMARY: Final = "summary"

# Exit codes
EXIT_OK: Final = 0
EXIT_USAGE: Final = 1
EXIT_DATA: Final = 2
EXIT_NUMERICAL: Final = 3

# Error messages
ERROR_IMPOSSIBLE_DATA: Final = "data impossible under every prior point"
ERROR_DEGENERATE_CHAIN: Final = "degenerate chain"
ERROR_ITERATIONS: Final = "iters must exceed burn_in"
ERROR_NO_UNKNOWNS: Final = "no unknowns"
ERROR_NO_DIAGONAL: Final = "diagonal mass requested but the grid has no points with p1 = p2"
ERROR_ZERO_EVIDENCE: Final = "marginal likelihood of the second model is zero"
