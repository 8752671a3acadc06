"""Inter-operator millimeter-wave multi-hop backhaul simulator."""

__version__ = "0.1.0"

from .allocation import (
    AllocationResult,
    abs_subchannel_utility,
    dbs_subchannel_utility,
    end_to_end_rates,
    match_subchannels,
    verify_allocation_stability,
    wants_more_subchannels,
)
from .baselines import (
    InstanceTooLargeError,
    SearchLimits,
    exhaustive_optimal,
    non_cooperative,
    random_baseline,
)
from .channel import (
    AntennaPattern,
    ChannelModel,
    ChannelRealization,
    PathLossParams,
    RadioConfig,
    average_rate,
    expected_interference_w,
    path_loss_db,
    sample_realization,
    subchannel_rate,
)
from .formation import (
    FormationResult,
    PipelineResult,
    PricingConfig,
    Stage,
    build_next_stage,
    form_network,
    verify_stage_stability,
)
from .matching import (
    Matching,
    deferred_acceptance,
    enumerate_stable_matchings,
    find_blocking_pairs,
    is_pareto_improvement,
)
from .metrics import RunMetrics, aggregate, collect_metrics, mno_cost, overhead_check
from .topology import (
    MBS,
    Topology,
    comm_set,
    generate_topology,
    same_mno,
    topology_from_json,
    topology_to_json,
)

__all__ = [name for name in dir() if not name.startswith("_")]
