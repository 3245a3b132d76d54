import numpy as np
import pytest

from gossipopt.datasets import (
    DataError,
    Dataset,
    parse_libsvm,
    partition_shuffled,
    partition_unshuffled,
    synth_binary,
    synth_quadratic,
    to_libsvm,
)
from gossipopt.oracles import QuadraticObjective, global_value


class TestParseLibsvm:
    def test_basic_line(self):
        ds = parse_libsvm("+1 1:0.5 3:2\n", d_hint=3)
        np.testing.assert_array_equal(ds.features, [[0.5, 0.0, 2.0]])
        np.testing.assert_array_equal(ds.labels, [1.0])

    def test_blank_lines_skipped(self):
        ds = parse_libsvm("\n-1 2:1\n\n", d_hint=3)
        np.testing.assert_array_equal(ds.features, [[0.0, 1.0, 0.0]])
        np.testing.assert_array_equal(ds.labels, [-1.0])

    def test_zero_label_folds_to_negative(self):
        ds = parse_libsvm("0 1:1\n")
        assert ds.labels[0] == -1.0

    def test_comments_stripped(self):
        ds = parse_libsvm("+1 1:2 # trailing note\n")
        np.testing.assert_array_equal(ds.features, [[2.0]])

    def test_d_grows_past_hint(self):
        ds = parse_libsvm("+1 5:1\n", d_hint=2)
        assert ds.d == 5

    def test_non_numeric_label_names_line(self):
        with pytest.raises(DataError, match="line 2"):
            parse_libsvm("+1 1:1\nspam 1:1\n")

    def test_out_of_range_label_names_line(self):
        with pytest.raises(DataError, match="line 1.*not one of"):
            parse_libsvm("3 1:1\n")

    def test_missing_colon_names_line(self):
        with pytest.raises(DataError, match="line 1.*index:value"):
            parse_libsvm("+1 17\n")

    def test_non_integer_index_names_line(self):
        with pytest.raises(DataError, match="line 3.*not an integer"):
            parse_libsvm("+1 1:1\n-1 1:1\n+1 a:1\n")

    def test_zero_index_rejected(self):
        with pytest.raises(DataError, match="line 1.*>= 1"):
            parse_libsvm("+1 0:1\n")

    def test_non_increasing_index_names_line(self):
        with pytest.raises(DataError, match="line 1.*strictly increasing"):
            parse_libsvm("+1 3:1 2:1\n")

    def test_non_numeric_value_names_line(self):
        with pytest.raises(DataError, match="line 2.*not numeric"):
            parse_libsvm("+1 1:1\n+1 1:x\n")

    def test_empty_input_rejected(self):
        with pytest.raises(DataError, match="no samples"):
            parse_libsvm("# only a comment\n")

    def test_round_trip(self):
        text = "+1 1:0.5 3:2.0\n-1 2:1.25\n+1 1:-3.0 2:0.125 3:7.0\n"
        ds = parse_libsvm(text, d_hint=3)
        again = parse_libsvm(to_libsvm(ds), d_hint=3)
        np.testing.assert_array_equal(again.features, ds.features)
        np.testing.assert_array_equal(again.labels, ds.labels)

    def test_serialization_is_stable(self):
        ds = parse_libsvm("+1 1:0.1 2:0.30000000000000004\n")
        assert to_libsvm(parse_libsvm(to_libsvm(ds))) == to_libsvm(ds)


class TestPartitions:
    def test_unshuffled_groups_by_label(self):
        ds = Dataset(np.arange(8, dtype=float).reshape(4, 2), np.array([1.0, -1.0, 1.0, -1.0]))
        shards = partition_unshuffled(ds, 2)
        np.testing.assert_array_equal(shards[0].labels, [-1.0, -1.0])
        np.testing.assert_array_equal(shards[1].labels, [1.0, 1.0])
        # stable sort keeps original order within a class
        np.testing.assert_array_equal(shards[0].features, [[2.0, 3.0], [6.0, 7.0]])

    def test_single_client_gets_sorted_dataset(self):
        ds = Dataset(np.eye(3), np.array([1.0, -1.0, 1.0]))
        (shard,) = partition_unshuffled(ds, 1)
        np.testing.assert_array_equal(shard.labels, [-1.0, 1.0, 1.0])

    def test_sizes_sum_and_balance(self):
        gen = np.random.default_rng(6)
        for _ in range(20):
            m = int(gen.integers(5, 60))
            n = int(gen.integers(1, min(m, 9) + 1))
            ds = Dataset(gen.normal(size=(m, 3)), np.sign(gen.normal(size=m)) + (gen.normal(size=m) == 0))
            shards = partition_unshuffled(ds, n)
            sizes = [s.m for s in shards]
            assert sum(sizes) == m
            assert max(sizes) - min(sizes) <= 1

    def test_shuffled_is_seeded(self):
        ds = Dataset(np.arange(20, dtype=float).reshape(10, 2), np.ones(10))
        a = partition_shuffled(ds, 3, seed=4)
        b = partition_shuffled(ds, 3, seed=4)
        c = partition_shuffled(ds, 3, seed=5)
        for s1, s2 in zip(a, b):
            np.testing.assert_array_equal(s1.features, s2.features)
        assert any(
            not np.array_equal(s1.features, s3.features) for s1, s3 in zip(a, c)
        )

    def test_too_many_clients_rejected(self):
        ds = Dataset(np.eye(2), np.ones(2))
        with pytest.raises(DataError, match="split"):
            partition_unshuffled(ds, 3)

    def test_owners_are_sequential(self):
        ds = Dataset(np.eye(6), np.ones(6))
        shards = partition_shuffled(ds, 3, seed=0)
        assert [s.owner for s in shards] == [0, 1, 2]


class TestSynthQuadratic:
    def test_trivial_conditioning(self):
        inst = synth_quadratic(n=1, d=4, seed=0, cond=1.0)
        np.testing.assert_allclose(inst.lipschitz, inst.strong_convexity)

    def test_condition_number_exact(self):
        inst = synth_quadratic(n=5, d=8, seed=1, cond=10.0)
        np.testing.assert_allclose(inst.lipschitz / inst.strong_convexity, 10.0, rtol=1e-8)

    def test_client_hessians_share_spectrum(self):
        """A_i^T A_i = D^2 exactly for every client, by construction."""
        inst = synth_quadratic(n=4, d=6, seed=2, cond=5.0)
        h0 = inst.shards[0].features.T @ inst.shards[0].features
        for s in inst.shards[1:]:
            np.testing.assert_allclose(s.features.T @ s.features, h0, atol=1e-10)

    def test_fstar_matches_direct_evaluation(self):
        """The closed-form f* equals the objective evaluated at the minimizer."""
        inst = synth_quadratic(n=6, d=5, seed=3, cond=4.0)
        obj = QuadraticObjective(d=5)
        direct = global_value(obj, inst.shards, inst.minimizer)
        np.testing.assert_allclose(direct, inst.fstar, atol=1e-10)

    def test_minimizer_solves_normal_equations(self):
        inst = synth_quadratic(n=6, d=5, seed=4, cond=4.0)
        lhs = sum(s.features.T @ s.features for s in inst.shards)
        rhs = sum(s.features.T @ s.labels for s in inst.shards)
        np.testing.assert_allclose(np.linalg.solve(lhs, rhs), inst.minimizer, atol=1e-10)

    def test_heterogeneity_floor(self):
        """Client minimizers stay at least unit distance apart."""
        inst = synth_quadratic(n=5, d=6, seed=5, cond=3.0)
        t = inst.client_minimizers
        for i in range(5):
            for j in range(i + 1, 5):
                assert np.linalg.norm(t[i] - t[j]) >= 1.0 - 1e-12

    def test_deterministic(self):
        a = synth_quadratic(n=3, d=4, seed=9, cond=2.0)
        b = synth_quadratic(n=3, d=4, seed=9, cond=2.0)
        for sa, sb in zip(a.shards, b.shards):
            np.testing.assert_array_equal(sa.features, sb.features)

    def test_rejects_bad_cond(self):
        with pytest.raises(DataError, match="condition number"):
            synth_quadratic(n=2, d=2, seed=0, cond=0.5)


class TestSynthBinary:
    def test_shape_and_labels(self):
        ds = synth_binary(m=300, d=40, seed=0)
        assert ds.features.shape == (300, 40)
        assert set(np.unique(ds.labels)) <= {-1.0, 1.0}

    def test_rows_are_sparse_binary(self):
        ds = synth_binary(m=100, d=40, seed=1)
        assert set(np.unique(ds.features)) <= {0.0, 1.0}
        row_weights = ds.features.sum(axis=1)
        assert np.all(row_weights <= 14)
        assert np.all(row_weights >= 1)

    def test_class_balance_near_requested(self):
        ds = synth_binary(m=4000, d=60, seed=2, positive_fraction=0.24)
        frac = float(np.mean(ds.labels == 1.0))
        assert 0.14 <= frac <= 0.34

    def test_deterministic(self):
        a = synth_binary(m=50, d=20, seed=3)
        b = synth_binary(m=50, d=20, seed=3)
        np.testing.assert_array_equal(a.features, b.features)
        np.testing.assert_array_equal(a.labels, b.labels)

    def test_rejects_bad_fraction(self):
        with pytest.raises(DataError, match="positive_fraction"):
            synth_binary(m=10, d=5, seed=0, positive_fraction=1.5)
