"""
Stage-1 link entanglement and the analytic path noise model.

Domain Context:
- Every round each linked pair of nodes tries to share one entangled pair
- A link succeeds with probability P = 10^(-alpha*L/10) and decoheres with probability D
- A path over k repeaters carries weight (1-D)^(k+1) on the Bell state,
  the rest is the completely mixed state

Business Rules:
- Decoherence is not sampled per link during routing; only success/failure is
- The mixed component gives an error with probability 1/2 in matched bases
- Bit sampling exists only to validate the analytic QBER
"""
from dataclasses import dataclass
from typing import List, Optional, Set, Tuple

import numpy as np

from src.domain.topology import Position, Topology


@dataclass(frozen=True)
class LinkModel:
    alpha: float = 0.15  # dB/km
    length_km: float = 1.0
    success_prob: Optional[float] = None  # bypasses alpha/L when set
    decoherence: float = 0.0

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if not 0.0 <= self.decoherence <= 1.0:
            raise ValueError(f"Decoherence must be in [0, 1], got {self.decoherence}")
        if self.success_prob is not None and not 0.0 <= self.success_prob <= 1.0:
            raise ValueError(f"Link success probability must be in [0, 1], got {self.success_prob}")

    @property
    def P(self) -> float:
        return self.probability_for(self.length_km)

    def probability_for(self, length_km: float) -> float:
        if self.success_prob is not None:
            return self.success_prob
        return link_success_prob(self.alpha, length_km)


class RoundLinkState:
    """Links established in the current round; routing consumes them"""

    def __init__(self, established: np.ndarray):
        self.alive = np.asarray(established, dtype=bool).copy()

    def __contains__(self, link_id: int) -> bool:
        return bool(self.alive[link_id])

    def __len__(self) -> int:
        return int(self.alive.sum())

    def established(self, t: Topology) -> Set[Tuple[Position, Position]]:
        return {t.links[i].key for i in np.flatnonzero(self.alive)}

    def consume(self, link_ids) -> None:
        self.alive[list(link_ids)] = False

    def copy(self) -> "RoundLinkState":
        return RoundLinkState(self.alive)

    @classmethod
    def from_links(cls, t: Topology, links) -> "RoundLinkState":
        alive = np.zeros(len(t.links), dtype=bool)
        for u, v in links:
            alive[t.link_between(u, v)] = True
        return cls(alive)

    @classmethod
    def all_established(cls, t: Topology) -> "RoundLinkState":
        return cls(np.ones(len(t.links), dtype=bool))


def link_success_prob(alpha: float, L: float) -> float:
    return 10 ** (-alpha * L / 10)


def link_probabilities(t: Topology, m: LinkModel) -> np.ndarray:
    return np.array([m.probability_for(link.length_km) for link in t.links])


def sample_links(t: Topology, m: LinkModel, rng: np.random.Generator,
                 probabilities: Optional[np.ndarray] = None) -> RoundLinkState:
    """Each link independently established with its success probability"""
    if probabilities is None:
        probabilities = link_probabilities(t, m)
    return RoundLinkState(rng.random(len(t.links)) < probabilities)


def path_fidelity(D: float, k: int) -> float:
    return (1.0 - D) ** (k + 1)


def path_qber(D: float, k: int) -> float:
    return (1.0 - path_fidelity(D, k)) / 2.0


def sample_bit_error(D: float, k: int, rng: np.random.Generator) -> bool:
    """
    Bit-level check of the analytic model: every one of the k+1 links
    decoheres independently; a decohered path errs with probability 1/2.
    """
    decohered = bool((rng.random(k + 1) < D).any())
    return decohered and rng.random() < 0.5


def sample_bit_errors(D: float, k: int, n: int, rng: np.random.Generator) -> List[bool]:
    decohered = (rng.random((n, k + 1)) < D).any(axis=1)
    flips = rng.random(n) < 0.5
    return list(decohered & flips)
