import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gmmle.rng import CounterRng
from gmmle.simulate import SbmConfig, adjusted_rand_index, sample_sbm


def config_3x3(seed=0, diag=5.0, off=0.5, gene_size=20, cell_size=30):
    rates = np.full((3, 3), off)
    np.fill_diagonal(rates, diag)
    return SbmConfig(rates, (gene_size,) * 3, (cell_size,) * 3, seed=seed)


class TestSampler:
    def test_zero_rates_give_empty_matrix(self):
        cfg = SbmConfig(np.zeros((2, 2)), (5, 5), (4, 4), seed=1)
        sample = sample_sbm(cfg)
        assert sample.matrix.nnz == 0
        assert sample.matrix.shape == (10, 8)

    def test_same_seed_identical(self):
        a = sample_sbm(config_3x3(seed=7))
        b = sample_sbm(config_3x3(seed=7))
        assert a.matrix.entry_set() == b.matrix.entry_set()

    def test_different_seeds_differ(self):
        a = sample_sbm(config_3x3(seed=7))
        b = sample_sbm(config_3x3(seed=8))
        assert a.matrix.entry_set() != b.matrix.entry_set()

    @pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
    def test_constant_rate_mean_concentrates(self, seed):
        cfg = SbmConfig(np.array([[3.0]]), (100,), (100,), seed=seed)
        sample = sample_sbm(cfg)
        mean = sample.matrix.csr().sum() / (100 * 100)
        assert abs(mean - 3.0) < 0.2

    def test_per_block_means_within_3_sigma(self):
        cfg = config_3x3(seed=11, gene_size=50, cell_size=60)
        sample = sample_sbm(cfg)
        dense = sample.matrix.to_dense()
        for g in range(3):
            for c in range(3):
                block = dense[g * 50:(g + 1) * 50, c * 60:(c + 1) * 60]
                lam = cfg.rates[g, c]
                sigma = np.sqrt(lam / block.size)
                assert abs(block.mean() - lam) <= 3.0 * sigma + 1e-12

    def test_labels_match_block_layout(self):
        sample = sample_sbm(config_3x3())
        assert sample.cell_labels.labels.tolist() == [0] * 30 + [1] * 30 + [2] * 30
        assert sample.gene_labels.n_clusters == 3

    def test_multinomial_mode_fixed_totals(self):
        cfg = SbmConfig(
            np.array([[4.0, 1.0], [1.0, 4.0]]), (10, 10), (15, 15),
            seed=3, mode="multinomial", cell_total=200,
        )
        sample = sample_sbm(cfg)
        col_sums = np.asarray(sample.matrix.csr().sum(axis=0)).ravel()
        assert (col_sums == 200).all()

    def test_multinomial_block_proportions(self):
        cfg = SbmConfig(
            np.array([[9.0], [1.0]]), (50, 50), (40,),
            seed=5, mode="multinomial", cell_total=1000,
        )
        dense = sample_sbm(cfg).matrix.to_dense()
        top_share = dense[:50].sum() / dense.sum()
        assert abs(top_share - 0.9) < 0.02

    def test_config_validation(self):
        with pytest.raises(ValueError, match="shape"):
            SbmConfig(np.zeros((2, 3)), (1, 1), (1, 1))
        with pytest.raises(ValueError, match="non-negative"):
            SbmConfig(np.array([[-1.0]]), (1,), (1,))
        with pytest.raises(ValueError, match="cell_total"):
            SbmConfig(np.array([[1.0]]), (1,), (1,), mode="multinomial")


class TestAdjustedRandIndex:
    def test_identical_partitions_score_1(self):
        labels = np.array([0, 0, 1, 1, 2])
        assert adjusted_rand_index(labels, labels) == 1.0
        relabeled = np.array([5, 5, 3, 3, 9])
        assert adjusted_rand_index(labels, relabeled) == 1.0

    def test_crossed_pairs_score_minus_half(self):
        # hand evaluation: contingency all-ones 2x2, sum_cells = 0,
        # sum_rows = sum_cols = 2, total_pairs = 6, expected = 2/3,
        # max = 2 -> ARI = (0 - 2/3)/(2 - 2/3) = -0.5
        a = np.array([0, 0, 1, 1])
        b = np.array([0, 1, 0, 1])
        assert adjusted_rand_index(a, b) == pytest.approx(-0.5)

    def test_independent_labelings_near_zero(self):
        rng = CounterRng(13)
        a = rng.integers(4, 1000)
        b = rng.integers(4, 1000)
        assert abs(adjusted_rand_index(a, b)) < 0.05

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            adjusted_rand_index(np.array([0, 1]), np.array([0, 1, 2]))

    @settings(max_examples=50, deadline=None)
    @given(
        labels=st.lists(
            st.tuples(st.integers(0, 3), st.integers(0, 3)), min_size=2, max_size=40
        ),
        mapping=st.permutations([0, 1, 2, 3]),
    )
    def test_symmetry_and_alphabet_invariance(self, labels, mapping):
        a = np.array([x for x, _ in labels])
        b = np.array([y for _, y in labels])
        forward = adjusted_rand_index(a, b)
        assert forward == pytest.approx(adjusted_rand_index(b, a), abs=1e-12)
        remapped = np.array([mapping[v] for v in b])
        assert forward == pytest.approx(adjusted_rand_index(a, remapped), abs=1e-12)

    def test_single_cluster_each_side(self):
        assert adjusted_rand_index(np.zeros(5, int), np.zeros(5, int)) == 1.0
