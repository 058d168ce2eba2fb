"""Thresholds shared by the diagnostics, the unit tests and the acceptance suite."""

# spectral / operator
ROOT_RTOL = 1e-12
KERNEL_IDENTITY_ATOL = 1e-10
GAMMA_INVARIANCE_RTOL = 1e-6  # times S_-inf

# solver
SOLVE_TOL = 1e-8
SOLVE_MAX_ITER_ACCEPT = 500
ODE_RESIDUAL_MAX = 1e-4  # scaled by beta S_-inf
GRID_CHANGE_RTOL = 1e-4

# wave diagnostics
SPRIME_FD_RTOL = 1e-4  # times max |S'|
S_NODAL_SLACK = 1e-10  # times S_-inf; far-tail roundoff below the solver's resolution there
IDENTITY_RTOL = 1e-3
MASS_SELF_RTOL = 1e-3
TAIL_SLOPE_RTOL = 0.02
TAIL_SHIFT_RTOL = 0.01
TAIL_WINDOW_MARGIN = 5.0  # length units kept clear of the truncation edge and xi3
ENVELOPE_RTOL = 1e-9
P_MONOTONE_RTOL = 1e-10  # times P(xi_max); roundoff allowance for nodal differences
P_LEFT_MAX = 1e-6  # times M
P_LIMIT_RTOL = 1e-3
P_PRIME_RTOL = 1e-4  # times max P'
S_INF_NODES = 5
S_INF_WINDOW_TOL = 1e-6  # times S_-inf, window 5 -> 20 nodes
DRIFT_NODES = 40
DRIFT_SLOPE_MAX = 1e-8  # times S_-inf per unit length

# simulation
SPEED_PLAIN_RTOL = 0.07
SPEED_LOG_RTOL = 0.03
SPEED_SCALING_RTOL = 0.07
THRESHOLD_I_MAX = 1e-6
CROSS_I_RTOL = 0.05  # times max I
CROSS_S_RTOL = 0.02  # times S_-inf
SNAPSHOT_RTOL = 0.01
MASS_CONSERVATION_RTOL = 1e-10
