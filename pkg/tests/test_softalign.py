"""Soft alignment, mutual-pointing masks, batch partitions, and the ratio schedule."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from avdistill import (
    ConfigError,
    EmbeddingBatch,
    RangeError,
    RatioSchedule,
    ShapeError,
    alignment_masks,
    label_masks,
    partition_batch,
    soft_alignment,
)


class TestSoftAlignment:
    def test_single_pair_degenerates_to_certainty(self, rng):
        emb = EmbeddingBatch(rng.standard_normal((1, 4)), rng.standard_normal((1, 4)))
        align = soft_alignment(emb)
        np.testing.assert_array_equal(align.audio_align, [[1.0]])
        np.testing.assert_array_equal(align.visual_align, [[1.0]])
        np.testing.assert_array_equal(align.positive_mask, [[True]])

    def test_rows_are_stochastic(self, rng):
        emb = EmbeddingBatch(rng.standard_normal((7, 5)), rng.standard_normal((7, 5)))
        align = soft_alignment(emb, temperature=0.7)
        assert align.audio_align.shape == (7, 7)
        assert align.visual_align.shape == (7, 7)
        np.testing.assert_allclose(align.audio_align.sum(axis=1), 1.0, atol=1e-9)
        np.testing.assert_allclose(align.visual_align.sum(axis=1), 1.0, atol=1e-9)

    def test_orthonormal_embeddings_align_diagonally(self):
        emb = EmbeddingBatch(np.eye(3), np.eye(3))
        align = soft_alignment(emb, temperature=0.1)
        np.testing.assert_array_equal(align.audio_align.argmax(axis=1), [0, 1, 2])
        np.testing.assert_array_equal(align.positive_mask, np.eye(3, dtype=bool))
        np.testing.assert_array_equal(align.negative_mask, ~np.eye(3, dtype=bool))

    def test_lower_temperature_sharpens(self, rng):
        emb = EmbeddingBatch(rng.standard_normal((5, 4)), rng.standard_normal((5, 4)))
        soft = soft_alignment(emb, temperature=2.0).audio_align
        sharp = soft_alignment(emb, temperature=0.1).audio_align
        assert sharp.max(axis=1).min() > soft.max(axis=1).min()

    def test_validation(self, rng):
        emb = EmbeddingBatch(rng.standard_normal((3, 4)), rng.standard_normal((3, 4)))
        with pytest.raises(ConfigError):
            soft_alignment(emb, temperature=0.0)
        with pytest.raises(ConfigError):
            soft_alignment(emb, temperature=-1.0)
        empty = EmbeddingBatch(np.zeros((0, 4)), np.zeros((0, 4)))
        with pytest.raises(ShapeError):
            soft_alignment(empty)


class TestAlignmentMasks:
    def test_mutual_pointing_on_distinct_argmaxes(self):
        audio = np.array([[0.9, 0.1], [0.2, 0.8]])
        visual = np.array([[0.7, 0.3], [0.4, 0.6]])
        positive, negative = alignment_masks(audio, visual)
        np.testing.assert_array_equal(positive, [[True, False], [False, True]])
        np.testing.assert_array_equal(negative, [[False, True], [True, False]])

    def test_shared_argmax_collapses_to_all_positive(self):
        audio = np.array([[0.9, 0.1], [0.8, 0.2]])
        visual = np.array([[0.6, 0.4], [0.7, 0.3]])
        positive, negative = alignment_masks(audio, visual)
        assert positive.all()
        assert not negative.any()

    def test_argmax_ties_take_lowest_index(self):
        flat = np.full((2, 2), 0.5)
        positive, _ = alignment_masks(flat, flat)
        assert positive.all()

    def test_non_square_rejected(self):
        with pytest.raises(ShapeError):
            alignment_masks(np.zeros((2, 3)), np.zeros((2, 3)))
        with pytest.raises(ShapeError):
            alignment_masks(np.zeros((2, 2)), np.zeros((3, 3)))

    @given(st.integers(0, 2**32 - 1), st.integers(2, 8))
    @settings(max_examples=60, deadline=None)
    def test_masks_partition_the_grid(self, seed, n):
        rng = np.random.default_rng(seed)
        audio = rng.random((n, n))
        visual = rng.random((n, n))
        positive, negative = alignment_masks(audio, visual)
        assert (positive ^ negative).all()
        assert not (positive & negative).any()


class TestLabelMasks:
    def test_block_structure(self):
        positive, negative = label_masks(np.array([0, 0, 1]))
        np.testing.assert_array_equal(
            positive, [[True, True, False], [True, True, False], [False, False, True]]
        )
        np.testing.assert_array_equal(negative, ~positive)

    def test_all_same_class_has_no_negatives(self):
        _, negative = label_masks(np.zeros(4, dtype=np.int64))
        assert not negative.any()

    def test_all_distinct_is_identity(self):
        positive, _ = label_masks(np.arange(5))
        np.testing.assert_array_equal(positive, np.eye(5, dtype=bool))

    def test_requires_1d(self):
        with pytest.raises(ShapeError):
            label_masks(np.zeros((2, 2), dtype=np.int64))


class TestPartitionBatch:
    def test_full_labeled_fraction(self):
        plan = partition_batch(400, 1.0, seed=0)
        assert len(plan.labeled_idx) == 400
        assert len(plan.soft_idx) == 0
        assert plan.n == 400

    def test_quarter_fraction_floors(self):
        plan = partition_batch(10, 0.25, seed=0)
        assert len(plan.labeled_idx) == 2
        assert len(plan.soft_idx) == 8

    def test_zero_fraction(self):
        plan = partition_batch(5, 0.0, seed=3)
        assert len(plan.labeled_idx) == 0
        assert len(plan.soft_idx) == 5

    def test_deterministic_per_seed(self):
        a = partition_batch(20, 0.5, seed=7)
        b = partition_batch(20, 0.5, seed=7)
        np.testing.assert_array_equal(a.labeled_idx, b.labeled_idx)
        c = partition_batch(20, 0.5, seed=8)
        assert not np.array_equal(a.labeled_idx, c.labeled_idx)

    def test_validation(self):
        with pytest.raises(ShapeError):
            partition_batch(0, 0.5, seed=0)
        with pytest.raises(ConfigError):
            partition_batch(5, -0.1, seed=0)
        with pytest.raises(ConfigError):
            partition_batch(5, 1.1, seed=0)

    @given(st.integers(1, 64), st.floats(0.0, 1.0), st.integers(0, 1000))
    @settings(max_examples=80, deadline=None)
    def test_partition_invariants(self, n, fraction, seed):
        plan = partition_batch(n, fraction, seed)
        assert len(plan.labeled_idx) == int(np.floor(fraction * n))
        merged = np.concatenate([plan.labeled_idx, plan.soft_idx])
        np.testing.assert_array_equal(np.sort(merged), np.arange(n))
        # Both halves come back sorted so downstream masks are reproducible.
        assert (np.diff(plan.labeled_idx) > 0).all()
        assert (np.diff(plan.soft_idx) > 0).all()


class TestRatioSchedule:
    def test_step_plateaus_are_exact(self):
        sched = RatioSchedule(kind="step", start=1.0, end=0.2, total_epochs=1000, steps=5)
        assert sched.at(0) == 1.0
        assert sched.at(999) == 0.2
        assert sched.at(500) == 0.6
        values = {sched.at(e) for e in range(1000)}
        assert values == {1.0, 0.8, 0.6, 0.4, 0.2}

    def test_step_plateaus_have_equal_width(self):
        sched = RatioSchedule(kind="step", start=1.0, end=0.2, total_epochs=1000, steps=5)
        seq = [sched.at(e) for e in range(1000)]
        for value in (1.0, 0.8, 0.6, 0.4, 0.2):
            assert seq.count(value) == 200

    def test_linear_midpoint(self):
        sched = RatioSchedule(kind="linear", start=1.0, end=0.2, total_epochs=5)
        assert sched.at(0) == 1.0
        assert sched.at(4) == 0.2
        assert abs(sched.at(2) - 0.6) < 1e-12

    def test_cosine_midpoint(self):
        sched = RatioSchedule(kind="cosine", start=1.0, end=0.2, total_epochs=5)
        assert sched.at(0) == 1.0
        assert sched.at(4) == 0.2
        assert abs(sched.at(2) - 0.6) < 1e-12

    def test_single_epoch_schedule(self):
        assert RatioSchedule(kind="linear", start=0.9, end=0.3, total_epochs=1).at(0) == 0.9

    def test_range_errors(self):
        sched = RatioSchedule(kind="step", total_epochs=10, steps=5)
        with pytest.raises(RangeError):
            sched.at(-1)
        with pytest.raises(RangeError):
            sched.at(10)

    def test_validation(self):
        with pytest.raises(ConfigError):
            RatioSchedule(kind="exponential")
        with pytest.raises(ConfigError):
            RatioSchedule(start=0.2, end=0.8)
        with pytest.raises(ConfigError):
            RatioSchedule(start=1.2, end=0.2)
        with pytest.raises(ConfigError):
            RatioSchedule(total_epochs=0)
        with pytest.raises(ConfigError):
            RatioSchedule(kind="step", steps=0)
        with pytest.raises(ConfigError):
            RatioSchedule(kind="step", steps=1, start=1.0, end=0.2)

    def test_constant_schedule_allowed(self):
        sched = RatioSchedule(kind="step", start=1.0, end=1.0, total_epochs=50, steps=1)
        assert all(sched.at(e) == 1.0 for e in range(50))

    @given(
        kind=st.sampled_from(["step", "linear", "cosine"]),
        start=st.floats(0.2, 1.0),
        drop=st.floats(0.0, 0.2),
        total=st.integers(2, 200),
        steps=st.integers(2, 10),
    )
    @settings(max_examples=80, deadline=None)
    def test_schedule_is_monotone_and_bounded(self, kind, start, drop, total, steps):
        end = max(0.0, start - drop)
        sched = RatioSchedule(kind=kind, start=start, end=end, total_epochs=total, steps=steps)
        seq = [sched.at(e) for e in range(total)]
        assert seq[0] == start
        # A step schedule with more plateaus than epochs never reaches the
        # final plateau, so only the other cases must land on end exactly.
        if kind != "step" or steps <= total:
            assert seq[-1] == end
        assert all(end <= v <= start for v in seq)
        assert all(a >= b for a, b in zip(seq, seq[1:]))
