"""permitlab: profit-maximizing auction mechanisms with seller costs, checked exactly."""

from .rational import Q, rat, rat_str
from .model import (
    AuctionFeasibility,
    BasisMatroid,
    CostModel,
    DiscreteDist,
    ExplicitFamily,
    Instance,
    PartitionMatroid,
    Thresholds,
    UniformMatroid,
    UnitDemandPairs,
)
from .lp import DirectMechanism, LPSolution, solve_profit_lp
from .mechanisms import MechanismSpec, EvalResult, evaluate, monte_carlo_eval

__all__ = [
    "Q",
    "rat",
    "rat_str",
    "AuctionFeasibility",
    "BasisMatroid",
    "CostModel",
    "DiscreteDist",
    "DirectMechanism",
    "EvalResult",
    "ExplicitFamily",
    "Instance",
    "LPSolution",
    "MechanismSpec",
    "PartitionMatroid",
    "Thresholds",
    "UniformMatroid",
    "UnitDemandPairs",
    "evaluate",
    "monte_carlo_eval",
    "solve_profit_lp",
]
