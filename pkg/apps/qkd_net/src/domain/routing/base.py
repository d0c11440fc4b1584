from abc import ABC, abstractmethod
from typing import List

import numpy as np

from src.domain.entanglement import RoundLinkState
from src.domain.routing.balancing import PriorityList
from src.domain.routing.paths import CandidatePath
from src.domain.topology import Topology


class RoutingStrategy(ABC):
    """
    Abstract base class for Stage-2 routing policies.
    Policies decide which link-disjoint terminal paths are formed in a round.
    """
    name: str = ""
    uses_priorities: bool = False

    @abstractmethod
    def route(self, state: RoundLinkState, t: Topology, prio: PriorityList,
              rng: np.random.Generator) -> List[CandidatePath]:
        """
        Select paths over the links established this round.

        Args:
            state: links established this round, left unmodified
            t: network topology
            prio: terminal pairs to serve first (ignored by policies without priorities)
            rng: generator used for tie-breaking

        Returns:
            Pairwise link-disjoint paths in selection order
        """
        pass
