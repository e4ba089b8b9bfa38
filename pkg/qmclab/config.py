"""Numeric defaults shared across the package."""

import os

from qmclab.errors import ConfigError

MAX_DIM_ENV = "QMCLAB_MAX_DIM"
DEFAULT_MAX_TOTAL_DIM = 4096

# Hermiticity tolerance, relative to the operator norm.
HERMITIAN_TOL = 1e-10
# Negative eigenvalues above -PSD_CLIP_TOL * ||p|| are rounding noise and get clipped.
PSD_CLIP_TOL = 1e-10
# Below -PSD_ERROR_TOL * ||p|| the input is rejected as not PSD.
PSD_ERROR_TOL = 1e-8
TRACE_TOL = 1e-10
# Minimum eigenvalue accepted by density validation (absolute).
DENSITY_EIG_TOL = 1e-10

REPORT_TOL = 1e-8
MARGINAL_CONSISTENCY_TOL = 1e-6
TP_TOL = 1e-8

PERTURB_REL_TOL = 1e-7
PERTURB_MAX_ITER = 200
PERTURB_MAX_BRACKETS = 16
# Oracle targets below this are treated as exact estimation.
ORACLE_RESOLUTION = 1e-10


def max_total_dim() -> int:
    """Returns the dimension cap, read from QMCLAB_MAX_DIM when set."""
    raw = os.environ.get(MAX_DIM_ENV)
    if raw is None or raw == "":
        return DEFAULT_MAX_TOTAL_DIM
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(MAX_DIM_ENV, f"expected a positive integer, got {raw!r}")
    if value < 1:
        raise ConfigError(MAX_DIM_ENV, f"expected a positive integer, got {value}")
    return value
