"""
Stage-3 sifting and raw key bookkeeping per terminal pair.

Domain Context:
- Every surviving path gives its two terminals one entangled pair; measuring in
  random matching bases keeps the bit with probability 1/2
- Bits are bucketed by the repeater count k of the path that produced them,
  which fixes their expected QBER

Business Rules:
- Pool counts only grow during a run
- Mid-run capacity estimates use per-class distillation without CAD
- The optional bit-sampling mode also counts sampled bit errors per class

Architecture:
- KeyLedger owns every pool of a run and keeps capacity estimates up to date
  incrementally, so the dynamic router reads them in constant time
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Union

import numpy as np

from src.domain.entanglement import path_qber, sample_bit_error
from src.domain.flow import FlowGraph
from src.domain.postprocess import base_rate, pooled_qber
from src.domain.topology import TerminalPair

logger = logging.getLogger(__name__)


@dataclass
class RawKeyPool:
    pair: TerminalPair
    counts: Dict[int, int] = field(default_factory=dict)
    errors: Dict[int, int] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def record(self, k: int, error: bool = False) -> None:
        self.counts[k] = self.counts.get(k, 0) + 1
        if error:
            self.errors[k] = self.errors.get(k, 0) + 1

    def histogram(self) -> Dict[int, int]:
        return {k: n for k, n in sorted(self.counts.items()) if n > 0}

    def empirical_qber(self) -> Dict[int, float]:
        return {k: self.errors.get(k, 0) / n for k, n in self.histogram().items()}


@dataclass(frozen=True)
class CapacityEstimate:
    pair: TerminalPair
    secret_bits: float

    def __post_init__(self):
        if self.secret_bits < 0:
            raise ValueError(f"Secret bits must be >= 0, got {self.secret_bits}")


def sift_and_record(pool: RawKeyPool, k: int, rng: np.random.Generator,
                    decoherence: Optional[float] = None) -> RawKeyPool:
    """
    Keep the bit when the bases match.

    With `decoherence` set, the kept bit also samples whether it is in error.
    """
    if rng.random() < 0.5:
        error = sample_bit_error(decoherence, k, rng) if decoherence is not None else False
        pool.record(k, error)
    return pool


def estimate_capacity(pool: RawKeyPool, D: float, segmented: bool = True) -> CapacityEstimate:
    if pool.total == 0:
        return CapacityEstimate(pool.pair, 0.0)
    if segmented:
        bits = sum(n * base_rate(path_qber(D, k)) for k, n in pool.counts.items())
    else:
        bits = pool.total * base_rate(pooled_qber(pool.counts, D))
    return CapacityEstimate(pool.pair, float(bits))


def build_flow_graph(values: Mapping[TerminalPair, Union[float, CapacityEstimate]],
                     n_terminals: int) -> FlowGraph:
    """Complete terminal graph; pairs without a value get capacity 0"""
    capacities = {}
    for i in range(n_terminals):
        for j in range(i + 1, n_terminals):
            value = values.get((i, j), 0.0)
            if isinstance(value, CapacityEstimate):
                value = value.secret_bits
            capacities[(i, j)] = float(value)
    return FlowGraph(n_terminals, capacities)


class KeyLedger:
    """Raw key pools of one run with running segmented capacity estimates"""

    def __init__(self, pairs: List[TerminalPair], n_terminals: int, D: float,
                 bit_sampling: bool = False):
        self.D = D
        self.n_terminals = n_terminals
        self.bit_sampling = bit_sampling
        self.pools: Dict[TerminalPair, RawKeyPool] = {pair: RawKeyPool(pair) for pair in pairs}
        self._estimates: Dict[TerminalPair, float] = {pair: 0.0 for pair in pairs}
        self._class_rate: Dict[int, float] = {}

    def _rate(self, k: int) -> float:
        rate = self._class_rate.get(k)
        if rate is None:
            rate = self._class_rate[k] = base_rate(path_qber(self.D, k))
        return rate

    def sift(self, pair: TerminalPair, k: int, rng: np.random.Generator) -> None:
        pool = self.pools[pair]
        before = pool.total
        sift_and_record(pool, k, rng, self.D if self.bit_sampling else None)
        if pool.total != before:
            self._estimates[pair] += self._rate(k)

    def capacity_graph(self) -> FlowGraph:
        return build_flow_graph(self._estimates, self.n_terminals)

    @property
    def total_sifted(self) -> int:
        return sum(pool.total for pool in self.pools.values())
