"""Cost/QoE trade-offs for streaming over a free and a costly Poisson server."""
import warnings

import numba

# the bundled TBB is too old; avoid the probe and its warning
numba.config.THREADING_LAYER = "workqueue"
warnings.filterwarnings("ignore", message="The TBB threading layer", category=numba.NumbaWarning)

from .analytic import (  # noqa: E402
    DecayExponents,
    QoeTarget,
    Region,
    RegionClass,
    ServerRates,
    classify,
    gamma,
    interruption_prob_bounds,
    interruption_prob_infinite,
    largest_root,
    truncation_horizon,
)
from .errors import DomainError, InfeasibleTarget, NumericError  # noqa: E402
from .policy import (  # noqa: E402
    BothAlways,
    CostReport,
    FreeOnly,
    Offline,
    Risky,
    Safe,
    design,
    offline_switch_time,
    risky_cost_bound,
    risky_threshold,
    safe_cost,
    safe_threshold,
)

__version__ = "0.1.0"

__all__ = [
    "BothAlways", "CostReport", "DecayExponents", "DomainError", "FreeOnly", "InfeasibleTarget", "NumericError",
    "Offline", "QoeTarget", "Region", "RegionClass", "Risky", "Safe", "ServerRates", "classify", "design", "gamma",
    "interruption_prob_bounds", "interruption_prob_infinite", "largest_root", "offline_switch_time",
    "risky_cost_bound", "risky_threshold", "safe_cost", "safe_threshold", "truncation_horizon",
]
