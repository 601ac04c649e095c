"""Default settings."""

DEFAULT_GRID_POINTS = 256
MIN_GRID_POINTS = 8

DEFAULT_MAX_DT = 1e-3
DEFAULT_DT_SPACING_FACTOR = 0.25
DEFAULT_CFL_SAFETY = 1.0

DEFAULT_FLOOR = 1e-12
DEFAULT_TOLERANCE = 0.1
DEFAULT_BURN_IN_HOLD = 1.0
MIN_FIT_SAMPLES = 10

DEFAULT_PLANNER_MARGIN = 0.05
FIXED_POINT_RTOL = 1e-10
FIXED_POINT_MAX_ITER = 200
FIXED_POINT_CEILING = 1e12

DEFAULT_BETA4 = 2.0**0.25
DEFAULT_BETA3 = 2.0
DEFAULT_C0 = 0.25

INEQUALITY_SLACK = 1e-8
DEFAULT_TAIL_COUNTS = (1, 2, 5, 10)

RANDOM_PRESET_MAX_MODE = 10

OUTPUT_ROOT_ENV_VAR = "BURGERS_STAB_OUT"
DEFAULT_OUTPUT_ROOT = "runs"
CSV_FLOAT_FORMAT = "%.17g"
