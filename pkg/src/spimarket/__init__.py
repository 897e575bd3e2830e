"""Posted-price selling policies for stationary Poisson markets with
perishable inventory: LP benchmarks, birth-death availability analysis,
event simulation, and bound verification."""

from .model import (
    BuyerTypeSpec,
    GoodSpec,
    InstanceError,
    MarketInstance,
    SaleRateMatrix,
    canonicalize_buyers,
    dump_instance,
    instance_from_dict,
    instance_to_dict,
    load_instance,
    normalize_single_good,
)
from .queueing import (
    BirthDeathSpec,
    ChainError,
    StationaryDistribution,
    availability_bounds,
    availability_probability,
    availability_to_w_floor,
    bounded_capacity_ratio,
    half_competitive_floor,
    ratio_floor_large_w,
    ratio_floor_small_w,
    stationary_distribution,
)
from .lp import (
    Benchmark,
    GapReport,
    LpSolution,
    SimplexError,
    gap_report,
    solve,
    solve_single_good_greedy,
)
from .policy import (
    IncompatiblePairingError,
    NotPostedPriceError,
    PolicySpec,
    PostedPrice,
    WRule,
    analytic_sale_rates,
    build,
    compute_w,
    permit_all,
    policy_from_json_dict,
    round_deterministic,
    to_posted_price,
)
from .matching import MatchingResult, max_weight_offline_match, presence_components
from .sim import (
    CheckRow,
    OfflineReport,
    SimReport,
    Trajectory,
    conservation_check,
    dominance_check,
    generate_trajectory,
    pasta_check,
    simulate_offline_matching,
    simulate_policy,
)

__version__ = "0.1.0"
