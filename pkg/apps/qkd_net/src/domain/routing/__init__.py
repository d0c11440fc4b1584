from src.domain.routing.balancing import (
    BalancerParams,
    BottleneckBalancer,
    PriorityList,
    SurplusBalancer,
    compute_priorities,
    get_balancer,
)
from src.domain.routing.paths import CandidatePath, attempt_swapping, shortest_path, validate_paths
from src.domain.routing.strategies import (
    DynamicRouting,
    StaticRouting,
    dynamic_route,
    get_strategy,
    static_route,
)
