"""Central table of numeric tolerances and size thresholds.

Every module pulls its tolerances from here so that geometric checks,
degeneracy cutoffs, and numerical floors stay consistent package-wide.
"""

# Geometric comparisons (unit norms, points-on-plane checks).
GEOM_ATOL = 1e-9

# Below this separation two points are treated as coincident.
COINCIDENT_TOL = 1e-12

# Smallest eigenvalue a belief covariance is allowed to reach; repairs
# below this are logged, never silent.
EIGEN_FLOOR = 1e-12

# top_direction quality: w'Sw must reach (1 - TOP_DIR_RTOL) * lambda_max.
TOP_DIR_RTOL = 1e-6

# Power-iteration settings for covariances too large for a dense solve.
DENSE_EIG_MAX_DIM = 32
POWER_MAX_ITER = 100
POWER_TOL = 1e-10

# Per-object positional variances must stay above this floor.
MIN_PSI = 1e-9

# Object counts up to this size use an exhaustive scan for per-object
# Mahalanobis lookups; larger sets use a shortlist + re-rank heuristic.
MAHA_EXHAUSTIVE_MAX = 2048

# Embedding training aborts when the objective falls below this.
ELBO_DIVERGENCE_FLOOR = -1e6
