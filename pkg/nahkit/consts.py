"""Constants for nahkit.

This module contains every tunable number used by the solvers, the
serialization layer and the command-line front end.
"""

from fractions import Fraction

# =============================================================================
# Solver Defaults
# =============================================================================

# Default prime place when neither a model file nor the command line names one.
DEFAULT_PLACE = 2

# Stopping tolerance for iterative solvers, as a distance. Sweeps compare the
# squared displacement against DEFAULT_TOL ** 2.
DEFAULT_TOL = Fraction(1, 10**12)

# Gauss-Seidel sweep cap for the harmonic map solvers.
DEFAULT_MAX_SWEEPS = 100_000

# Sweep cap for the cyclic barycenter iteration used when the points of a
# center-of-mass problem share no apartment.
COM_MAX_SWEEPS = 64

# Solver updates are rounded to multiples of 2 ** -GRID_BITS so that exact
# rationals keep bounded denominators across sweeps.
GRID_BITS = 80
GRID_BITS_MIN = 16
GRID_BITS_MAX = 256

# =============================================================================
# Number Fields
# =============================================================================

# Raw coefficient lists longer than this are refused before reduction.
MAX_UNREDUCED_DEGREE = 4096

# =============================================================================
# Monodromy
# =============================================================================

# Eigenvalue attached to a residue a is exp(RESIDUE_EXP_SIGN * 2 pi i a).
RESIDUE_EXP_SIGN = -1

# =============================================================================
# Serialization
# =============================================================================

SCHEMA_VERSION = 1

# Floating point values may only appear under keys with this suffix.
APPROX_SUFFIX = "_approx"

CONFIG_FILE = "nahkit.yaml"

# =============================================================================
# Exit Codes
# =============================================================================

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INVALID = 2
