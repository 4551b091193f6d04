"""
Centralized configuration constants for lsmrac.

This module defines default values used across the control library, the
simulator and the command line runner. Keeping them together makes the
implementer-chosen values easy to find.
"""

from math import pi

# Logging configuration defaults
DEFAULT_LOG_MAX_BYTES = 10485760  # Default 10MB
DEFAULT_LOG_BACKUP_COUNT = 5  # Default 5 backups
DEFAULT_LOG_FILENAME = "lsmrac.log"  # Default log filename

# Numerical tolerances
MATCHING_STRICT_TOL = 1e-9
SYMMETRY_TOL = 1e-12

# Robot plant (TurtleBot carrying extra load)
DEFAULT_MASS_KG = 18.0
DEFAULT_FRICTION_NS_PER_M = 4.0
DEFAULT_DT_S = 0.05

# Nominal gains giving an exactly matched reference model for the robot plant.
# A_m eigenvalues come out at 0.9869 / 0.7880 and B_m at (-0.0007, -0.0278).
DEFAULT_K1_POSITION = -1.0
DEFAULT_K1_VELOCITY = -77.0
DEFAULT_K2 = -10.0

# Adaptation
DEFAULT_KAPPA = 1e-5
DEFAULT_P0_SCALE = 1.0
DEFAULT_THETA0_FRACTION = 0.625
DEFAULT_GRADIENT_GAIN = 1.9
DEFAULT_K2_UPPER_FACTOR = 10.0

# Collision avoidance. gamma, rho_min and v_max are implementer defaults.
DEFAULT_BETA = 0.9
DEFAULT_ETA = 4.5
DEFAULT_RHO0_M = 0.36
DEFAULT_GAMMA_M = 0.15
DEFAULT_RHO_MIN_M = 0.30
DEFAULT_V_MAX_M_PER_S = 1.5

# Run
DEFAULT_STEPS = 8000
DEFAULT_OMEGA = pi / 2000.0  # rad per step
DEFAULT_CONVERGENCE_TOL = 0.05
DEFAULT_TAIL_FRACTION = 0.1
TRACE_FLOAT_FORMAT = "%.9g"
