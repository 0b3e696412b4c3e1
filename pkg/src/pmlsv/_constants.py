"""Numerical tolerances and default solver settings, kept in one place."""

# SVD contract checks (orthonormality, reconstruction).
SVD_RTOL = 1e-10

# Absolute slack for the flux-preserving check.
FLUX_ATOL = 1e-9

# Relative deviation of the entry sum from the target below which
# ``project_intensity`` returns its input unchanged (keeps it idempotent).
INTENSITY_FIXED_RTOL = 1e-12

# Rate floor as a fraction of the mean rate I / N.
RATE_FLOOR_FRACTION = 1e-12

# Solver defaults (L, gamma, NOI and lambda).
DEFAULT_LAMBDA = 0.002
DEFAULT_STEP_L = 1e-5
DEFAULT_GAMMA = 1.1
DEFAULT_NOI = 2500
DEFAULT_MAX_BACKTRACKS = 200

# Bernoulli zero probability of each mask entry.
DEFAULT_ZERO_PROB = 0.5

DEFAULT_PATCH = 8
