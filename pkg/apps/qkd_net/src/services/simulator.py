"""
Round loop of the network simulation and parameter sweeps.

Domain Context:
- Every round runs link generation, routing with swapping, and sifting
- Distillation and max-flow key extraction run once, after the last round

Business Rules:
- Dynamic routing recomputes priorities every `priority_cadence` rounds from
  the current capacity estimates
- The key rate is the Alice-Bob flow value divided by the number of rounds

System Constraints:
- One Simulator is single-threaded; sweeps run simulators in separate processes
- Randomness comes from one SeedSequence per run, split into one stream per
  component, so identical (config, seed) gives identical results
"""
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from src.config.settings import SimConfig
from src.domain.entanglement import link_probabilities, path_qber, sample_links
from src.domain.flow import final_key_rate, max_flow, wasted_key
from src.domain.keyaccount import KeyLedger, build_flow_graph
from src.domain.postprocess import distill
from src.domain.routing import PriorityList, attempt_swapping, get_balancer, get_strategy, validate_paths
from src.exceptions import SimulationError

logger = logging.getLogger(__name__)

DEFAULT_DECOHERENCE_GRID = (0.0, 0.005, 0.01, 0.015, 0.02, 0.025, 0.03, 0.035, 0.04)
RNG_STREAMS = ("links", "balancer", "routing", "swapping", "sifting")
PROGRESS_EVERY = 1000


@dataclass
class SimResult:
    preset: str
    policy: str
    decoherence: float
    seed: int
    rounds: int
    key_rate: float
    flow_value: float
    total_sifted: int
    pools: Dict[str, Dict[int, int]]
    secret_bits: Dict[str, float]
    flows: Dict[str, float]
    waste: Dict[str, float]
    total_waste: float
    class_qber: Dict[str, Dict[int, float]] = field(default_factory=dict)
    empirical_qber: Dict[str, Dict[int, float]] = field(default_factory=dict)
    config: Dict[str, Any] = field(default_factory=dict)
    runtime_s: float = 0.0


def spawn_streams(seed: int) -> Dict[str, np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(len(RNG_STREAMS))
    return {name: np.random.default_rng(child) for name, child in zip(RNG_STREAMS, children)}


class Simulator:
    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        self.topology = cfg.topology()
        self.link_model = cfg.link_model()
        self.strategy = get_strategy(cfg.policy)
        self.balancer = get_balancer(cfg.balancer, cfg.balancer_params())
        self.rng = spawn_streams(cfg.seed)
        self.ledger = KeyLedger(
            self.topology.terminal_pairs(),
            len(self.topology.terminals),
            cfg.decoherence,
            bit_sampling=cfg.bit_sampling,
        )
        self._probabilities = link_probabilities(self.topology, self.link_model)
        self.priorities = PriorityList()

    def step(self, round_index: int) -> None:
        t = self.topology
        state = sample_links(t, self.link_model, self.rng["links"], self._probabilities)
        if self.strategy.uses_priorities and round_index % self.cfg.priority_cadence == 0:
            self.priorities = self.balancer.compute(self.ledger.capacity_graph(), t, self.rng["balancer"])
        paths = self.strategy.route(state, t, self.priorities, self.rng["routing"])
        if self.cfg.check_paths:
            validate_paths(paths, state, t)
        for path in attempt_swapping(paths, self.cfg.bsm_success, self.rng["swapping"]):
            self.ledger.sift(path.endpoints, path.k, self.rng["sifting"])

    def run(self) -> SimResult:
        cfg = self.cfg
        t = self.topology
        logger.info(f"Running {cfg.preset.value} / {cfg.policy}, D={cfg.decoherence}, "
                    f"{cfg.rounds} rounds, seed {cfg.seed}")
        started = time.perf_counter()
        for r in range(cfg.rounds):
            self.step(r)
            if logger.isEnabledFor(logging.DEBUG) and (r + 1) % PROGRESS_EVERY == 0:
                logger.debug(f"round {r + 1}/{cfg.rounds}: {self.ledger.total_sifted} sifted bits, "
                             f"priorities {[t.pair_label(p) for p in self.priorities]}")

        opts = cfg.distillation_options()
        D = cfg.decoherence
        secret = {pair: distill(pool, D, opts) for pair, pool in self.ledger.pools.items()}
        graph = build_flow_graph(secret, len(t.terminals))
        flow = max_flow(graph)
        waste = wasted_key(graph, flow.flows)
        key_rate = final_key_rate(flow.value, cfg.rounds)
        runtime = time.perf_counter() - started
        logger.info(f"Finished {cfg.preset.value} / {cfg.policy}: key rate {key_rate:.4f} in {runtime:.1f}s")

        label = t.pair_label
        pools = self.ledger.pools
        return SimResult(
            preset=cfg.preset.value,
            policy=cfg.policy,
            decoherence=D,
            seed=cfg.seed,
            rounds=cfg.rounds,
            key_rate=key_rate,
            flow_value=flow.value,
            total_sifted=self.ledger.total_sifted,
            pools={label(p): pool.histogram() for p, pool in pools.items()},
            secret_bits={label(p): bits for p, bits in secret.items()},
            flows={label(p): value for p, value in flow.flows.items()},
            waste={label(p): value for p, value in waste.items()},
            total_waste=sum(waste.values()),
            class_qber={label(p): {k: path_qber(D, k) for k in pool.histogram()} for p, pool in pools.items()},
            empirical_qber={label(p): pool.empirical_qber() for p, pool in pools.items()} if cfg.bit_sampling else {},
            config=cfg.echo(),
            runtime_s=runtime,
        )


def run(cfg: SimConfig) -> SimResult:
    return Simulator(cfg).run()


def _run_one(cfg: SimConfig) -> SimResult:
    try:
        return run(cfg)
    except Exception as e:
        raise SimulationError(
            f"Run failed at preset={cfg.preset.value}, policy={cfg.policy}, "
            f"D={cfg.decoherence}, seed={cfg.seed}: {e}"
        ) from e


def sweep_configs(base: SimConfig, D_values: Sequence[float], policies: Sequence[str],
                  seeds: Sequence[int]) -> List[SimConfig]:
    if not D_values or not policies or not seeds:
        raise SimulationError("Sweep needs at least one decoherence value, policy and seed")
    return [
        base.with_overrides(decoherence=D, policy=policy, seed=seed)
        for D, policy, seed in product(D_values, policies, seeds)
    ]


def sweep(base: SimConfig, D_values: Sequence[float], policies: Sequence[str],
          seeds: Sequence[int], jobs: Optional[int] = None) -> List[SimResult]:
    """Cartesian product of runs ordered by (D, policy, seed)"""
    configs = sweep_configs(base, D_values, policies, seeds)
    logger.info(f"Sweep of {len(configs)} runs with {jobs or 'all available'} workers")
    if jobs == 1 or len(configs) == 1:
        return [_run_one(cfg) for cfg in configs]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_one, configs))


def summarize(results: Sequence[SimResult]) -> pd.DataFrame:
    """Mean and sample standard deviation of the key rate over seeds"""
    columns = ["preset", "policy", "decoherence", "runs", "mean_key_rate", "std_key_rate"]
    if not results:
        return pd.DataFrame(columns=columns)
    frame = pd.DataFrame(
        [{"preset": r.preset, "policy": r.policy, "decoherence": r.decoherence, "key_rate": r.key_rate}
         for r in results]
    )
    grouped = frame.groupby(["preset", "policy", "decoherence"], sort=False)["key_rate"]
    summary = grouped.agg(runs="count", mean_key_rate="mean", std_key_rate="std").reset_index()
    summary["std_key_rate"] = summary["std_key_rate"].fillna(0.0)
    return summary[columns]
