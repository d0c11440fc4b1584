import numpy as np
import pytest

from src.domain.entanglement import path_qber
from src.domain.keyaccount import (
    CapacityEstimate,
    KeyLedger,
    RawKeyPool,
    build_flow_graph,
    estimate_capacity,
    sift_and_record,
)


@pytest.fixture
def pool():
    return RawKeyPool((0, 1))


class TestSifting:
    def test_matching_bases_keep_the_bit(self, pool, mocker):
        rng = mocker.Mock()
        rng.random.return_value = 0.1
        sift_and_record(pool, 3, rng)
        assert pool.counts == {3: 1}
        assert pool.total == 1

    def test_mismatched_bases_drop_the_bit(self, pool, mocker):
        rng = mocker.Mock()
        rng.random.return_value = 0.9
        sift_and_record(pool, 3, rng)
        assert pool.total == 0
        assert pool.histogram() == {}

    def test_half_the_bits_survive(self, pool):
        rng = np.random.default_rng(17)
        trials = 100000
        for _ in range(trials):
            sift_and_record(pool, 0, rng)
        assert abs(pool.total / trials - 0.5) < 4 * np.sqrt(0.25 / trials)

    def test_counts_bucket_by_repeater_count(self, pool):
        for k in (0, 2, 2, 5):
            pool.record(k)
        assert pool.histogram() == {0: 1, 2: 2, 5: 1}
        assert pool.total == 4

    def test_sampled_errors_are_recorded(self, pool):
        rng = np.random.default_rng(4)
        for _ in range(20000):
            sift_and_record(pool, 4, rng, decoherence=0.05)
        n = pool.counts[4]
        q = path_qber(0.05, 4)
        assert abs(pool.empirical_qber()[4] - q) < 4 * np.sqrt(q * (1 - q) / n)


class TestEstimateCapacity:
    def test_reference_value(self, pool):
        pool.counts = {1: 1000}
        assert estimate_capacity(pool, 0.02).secret_bits == pytest.approx(719.37, abs=0.01)

    def test_empty_pool(self, pool):
        assert estimate_capacity(pool, 0.1) == CapacityEstimate((0, 1), 0.0)

    def test_noiseless_links_keep_every_bit(self, pool):
        pool.counts = {0: 10, 4: 30, 9: 60}
        assert estimate_capacity(pool, 0.0).secret_bits == pytest.approx(100.0)

    def test_segmented_never_below_pooled(self):
        rng = np.random.default_rng(6)
        for _ in range(50):
            p = RawKeyPool((0, 1), counts={int(k): int(rng.integers(1, 500)) for k in rng.choice(12, 3)})
            D = float(rng.uniform(0, 0.03))
            assert estimate_capacity(p, D).secret_bits >= estimate_capacity(p, D, segmented=False).secret_bits - 1e-9

    def test_negative_estimate_rejected(self):
        with pytest.raises(ValueError):
            CapacityEstimate((0, 1), -1.0)


class TestFlowGraphAssembly:
    @pytest.mark.parametrize("n, edges", [(2, 1), (3, 3), (4, 6)])
    def test_complete_terminal_graph(self, n, edges):
        g = build_flow_graph({}, n)
        assert len(g.pairs()) == edges
        assert len(g.capacities) == edges
        assert all(c == 0.0 for c in g.capacities.values())

    def test_estimates_become_capacities(self):
        g = build_flow_graph({(0, 1): CapacityEstimate((0, 1), 12.5), (1, 2): 4.0}, 3)
        assert g.capacity(0, 1) == 12.5
        assert g.capacity(2, 1) == 4.0
        assert g.capacity(0, 2) == 0.0


class TestKeyLedger:
    def test_running_estimates_match_recomputation(self):
        ledger = KeyLedger([(0, 1), (1, 2), (0, 2)], 3, D=0.02)
        rng = np.random.default_rng(12)
        for _ in range(3000):
            pair = [(0, 1), (1, 2), (0, 2)][int(rng.integers(3))]
            ledger.sift(pair, int(rng.integers(0, 8)), rng)
        for pair, p in ledger.pools.items():
            assert ledger.capacity_graph().capacity(*pair) == pytest.approx(estimate_capacity(p, 0.02).secret_bits)
        assert ledger.total_sifted == sum(p.total for p in ledger.pools.values())

    def test_capacity_graph(self):
        ledger = KeyLedger([(0, 1)], 2, D=0.0)
        ledger.pools[(0, 1)].record(0)
        assert ledger.capacity_graph().capacity(0, 1) == 0.0
        rng = np.random.default_rng(1)
        for _ in range(100):
            ledger.sift((0, 1), 0, rng)
        assert ledger.capacity_graph().capacity(0, 1) == pytest.approx(ledger.pools[(0, 1)].total - 1)

    def test_bit_sampling_collects_errors(self):
        ledger = KeyLedger([(0, 1)], 2, D=0.2, bit_sampling=True)
        rng = np.random.default_rng(3)
        for _ in range(2000):
            ledger.sift((0, 1), 5, rng)
        assert ledger.pools[(0, 1)].errors.get(5, 0) > 0
