PROG_NAME = "specforge"
SETTINGS_PATH_ENV_VAR = "SPECFORGE_SETTINGS_PATH"
LOG_LEVEL_ENV_VAR = "SPECFORGE_LOG"
DEFAULT_SETTINGS_FN = "specforge_settings.yml"
DEFAULT_LOG_LEVEL = "WARNING"

INT_BITS = 64
INT_MIN = -(1 << (INT_BITS - 1))
INT_MAX = (1 << (INT_BITS - 1)) - 1
INT_MASK = (1 << INT_BITS) - 1

# ops_executed cost model, shared by the interpreter and the compiled backend
GUARD_OPS = 1
FOR_TEST_BASE_OPS = 2  # compare + loop variable, plus the cost of `hi`
FOR_INCREMENT_OPS = 4  # assign + add + loop variable + step
HISTOGRAM_RECORD_OPS = 1
FREQUENCY_RECORD_OPS = 8

DEFAULT_PROFILE_CAPACITY = 1024
HISTOGRAM_MAX_BUCKETS = 256

DEFAULT_UNROLL_MAX_FACTOR = 64
DEFAULT_MAX_GROWTH = 32

LPM_NO_MATCH = -1
LPM_KEY_BITS = 32

CSV_HEADER = (
    "time_ms",
    "handler",
    "config_id",
    "config",
    "phase",
    "event",
    "metric",
    "invocations",
    "ops_executed",
    "guard_failures",
)
