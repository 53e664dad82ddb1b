import torch

DTYPE = torch.float64
# torch.Generator on CPU is a Mersenne Twister (mt19937) seeded with a 64-bit integer.
RNG_ALGORITHM = "mt19937"

### Kernels
ZERO_FLUSH = 1e-300
LOG_DOMAIN_THRESHOLD = 700.0

### Manifold
MEMBERSHIP_TOL = 1e-10
RENORMALIZE_TOL = 1e-6
PROJECTIVE_INNER_TOL = 1e-14
PROJECTIVE_INNER_MAX_ITERS = 400
PROJECTIVE_OUTER_TOL = 1e-12
PROJECTIVE_OUTER_MAX_ITERS = 200
ORTHOGRAPHIC_MAX_ITERS = 200
ORTHOGRAPHIC_MIN_SLACK = 1e-13
ORTHOGRAPHIC_ROOT_MATCH = 1e-9
BRACKET_MAX_DOUBLINGS = 200

### Solver
GRAD_TOL = 1e-8
MAX_ITERS = 10000
WOLFE_C1 = 1e-4
WOLFE_C2 = 0.1
INITIAL_STEP = 1.0
LINESEARCH_MAX_EVALS = 60
# relative band on phi(0) inside which values count as rounding noise
APPROX_WOLFE_EPS = 1e-12
STAGNATION_PATIENCE = 50
POWELL_RESTART = 0.2
MAX_INITIAL_STEP = 1e8
FD_STEP = 1e-6

### Problems
NNPCA_P = 4.0
NNPCA_STARTS = 5
NNPCA_POSITIVE_SHIFT = 0.1
KKT_TOL = 1e-6
SPARSITY_THRESHOLD = 1e-6
SPD_SHIFT = 1e-3

LASSO_EPS = 1e-6
LASSO_M = 100
LASSO_N = 13
LASSO_C_LIST = [1.0, 5.0, 10.0, 20.0, 22.0, 25.0, 30.0, 50.0, 100.0]
LASSO_SUPPORT_THRESHOLD = 1e-2
LASSO_ORACLE_TOL = 1e-12
LASSO_ORACLE_MAX_ITER = 100000

BOXQP_N = 10
BOXQP_P_LIST = [5.0, 10.0, 50.0, 100.0, 500.0, 1000.0, 5000.0, 10000.0, 50000.0]
BOXQP_RETRIES = 20
BOXQP_REFERENCE_MAX_ITERS = 100000
BOXQP_REFERENCE_TOL = 1e-15

GRID_RESOLUTION = 400
GRID_GAP_TOL = 1e-3

### CLI
SCHEMA_VERSION = 1
EVENTS_LEVEL = "EVENTS"
EVENTS_LEVEL_NO = 38
EVENTS_FILE = "events.log"
EVENTS_RETENTION_SIZE = "200 MB"
GEOMCHECK_P_LIST = [1.5, 2.0, 3.0, 4.0, 10.0, 100.0, 1.000001, 50000.0]
GEOMCHECK_N_LIST = [2, 5, 50]
GEOMCHECK_TRIALS = 100
GEOMCHECK_DOMAIN_COVERAGE = 0.95
GEOMCHECK_STEP_RADIUS = 0.3
GEOMCHECK_CLOSED_FORM_RADIUS = 0.9
GEOMCHECK_RIGIDITY_TRIALS = 10
GEOMCHECK_RIGIDITY_STEPS = [1e-3, 1e-4, 1e-5]
GEOMCHECK_FD_MAX_P = 100.0
GEOMCHECK_EXIT_FAILED = 4
# float64 resolves ||x + eta||_p > 1 only while the curvature term clears rounding
GEOMCHECK_STRICT_MARGIN_MAX_P = 4.0

### Geometry tolerances
TOL_MEMBERSHIP = 1e-9
TOL_TANGENCY = 1e-10
TOL_IDEMPOTENCE = 1e-12
TOL_BALL_MARGIN = 1e-15
TOL_ROUND_TRIP = 1e-8
TOL_CLOSED_FORM = 1e-10
TOL_TRANSPORT_FD = 1e-5
TOL_LINEARITY = 1e-10
TOL_RIGIDITY_RATIO = 0.5
