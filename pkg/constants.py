TII = 'tii'
YULE = 'yule'
LARGE_N = 'largeN'

DIFFUSION_1D = 'diffusion1d'
ESCAPE_3D = 'escape3d'
NETWORK = 'network'
TABULATED = 'tabulated'

GRID5X5 = 'grid5x5'
CONSTANT_RATE = 'constant'

POWER_LAW = 'power'
EXPONENTIAL_POWER = 'exponential'

STANDARD = 'standard'
LAMBERTW = 'lambertw'

EXACT_CURVE = 'exact-curve'
LIMIT_CURVE = 'limit-curve'
SIMULATE = 'simulate'
DENSITY_CONVERGENCE = 'density-convergence'
MEAN_ERROR = 'mean-error'
VERIFY_SUITE = 'verify-suite'
COMPARE_BRANCHING = 'compare-branching'

EXPERIMENTS = [EXACT_CURVE, LIMIT_CURVE, SIMULATE, DENSITY_CONVERGENCE, MEAN_ERROR, VERIFY_SUITE, COMPARE_BRANCHING]

SCHEMA_VERSION = 1
CSV_FLOAT_FORMAT = '%.17g'

EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_NUMERICAL_FAILURE = 3
EXIT_VERIFICATION_FAILURE = 4
