import numpy as np
import pytest

from arithbench.dataset import (
    ConfigError,
    DatasetSpec,
    Operation,
    RangeSpec,
    draw_offset,
    fixed_eval_set,
    sample_batch,
    subset_indices,
    targets_for,
)


def window_sets(spec, k):
    (a0, a1), (b0, b1) = subset_indices(spec, k)
    return set(range(a0, a1)), set(range(b0, b1))


class TestRangeSpec:
    def test_parse_single_and_union(self):
        r = RangeSpec.parse([1, 2])
        assert r.segments == ((1.0, 2.0),)
        u = RangeSpec.parse([[-6, -2], [2, 6]])
        assert u.segments == ((-6.0, -2.0), (2.0, 6.0))
        assert u.lower == -6 and u.upper == 6

    def test_sampling_stays_inside(self, rng):
        u = RangeSpec.parse([[-6, -2], [2, 6]])
        x = u.sample(rng, (1000,))
        assert np.all((x >= -6) & (x <= -2) | (x >= 2) & (x <= 6))

    def test_union_mixture_is_length_weighted(self, rng):
        # segment lengths 1 and 3: expect ~25% / ~75%
        u = RangeSpec.parse([[0, 1], [2, 5]])
        x = u.sample(rng, (40000,))
        frac = np.mean(x <= 1)
        assert abs(frac - 0.25) < 0.02

    def test_degenerate_segment_constant(self, rng):
        r = RangeSpec.single(1.0, 1.0)
        x = r.sample(rng, (50,))
        assert np.all(x == 1.0)

    def test_invalid_segment_rejected(self):
        with pytest.raises(ConfigError):
            RangeSpec.parse([2, 1])

    def test_empirical_mean_near_midpoint(self, rng):
        r = RangeSpec.single(1.0, 2.0)
        n = 100_000
        x = r.sample(rng, (n,))
        se = (1.0 / np.sqrt(12.0)) / np.sqrt(n)
        assert abs(x.mean() - 1.5) < 3 * se


class TestSpecValidation:
    def test_defaults(self):
        spec = DatasetSpec(op=Operation.ADD)
        assert spec.input_size == 100
        assert spec.subset_ratio == 0.25
        assert spec.overlap_ratio == 0.5
        assert spec.subset_size == 25
        assert spec.interp.segments == ((1.0, 2.0),)
        assert spec.extrap.segments == ((2.0, 6.0),)

    def test_subset_ratio_bounds(self):
        with pytest.raises(ConfigError):
            DatasetSpec(op=Operation.ADD, subset_ratio=0.6)
        with pytest.raises(ConfigError):
            DatasetSpec(op=Operation.ADD, subset_ratio=0.0)

    def test_overlap_ratio_bounds(self):
        with pytest.raises(ConfigError):
            DatasetSpec(op=Operation.ADD, overlap_ratio=1.5)
        DatasetSpec(op=Operation.ADD, overlap_ratio=0.0)
        DatasetSpec(op=Operation.ADD, overlap_ratio=1.0)

    def test_empty_subset_rejected(self):
        with pytest.raises(ConfigError):
            DatasetSpec(op=Operation.ADD, input_size=4, subset_ratio=0.1)

    def test_json_roundtrip(self):
        spec = DatasetSpec(
            op=Operation.DIV,
            interp=RangeSpec.parse([[-2, 2]]),
            extrap=RangeSpec.parse([[-6, -2], [2, 6]]),
            input_size=50,
            subset_ratio=0.2,
            overlap_ratio=0.25,
        )
        assert DatasetSpec.from_json(spec.to_json()) == spec


class TestSubsetIndices:
    def test_full_overlap_coincides(self):
        spec = DatasetSpec(op=Operation.ADD, overlap_ratio=1.0)
        a, b = subset_indices(spec, 0.0)
        assert a == b == (0, 25)

    def test_zero_overlap_disjoint(self):
        spec = DatasetSpec(op=Operation.ADD, overlap_ratio=0.0)
        a, b = subset_indices(spec, 0.0)
        assert a == (0, 25)
        assert b == (25, 50)

    def test_overlap_matches_set_intersection(self, rng):
        # randomized geometry against a brute-force index-set oracle
        for _ in range(200):
            d = int(rng.integers(8, 200))
            s = float(rng.uniform(0.05, 0.5))
            o = float(rng.uniform(0.0, 1.0))
            try:
                spec = DatasetSpec(op=Operation.ADD, input_size=d, subset_ratio=s, overlap_ratio=o)
            except ConfigError:
                continue
            k = float(rng.uniform(0.0, spec.offset_max))
            set_a, set_b = window_sets(spec, k)
            assert len(set_a) == len(set_b) == spec.subset_size == round(s * d)
            assert len(set_a & set_b) == spec.overlap_size
            assert max(set_a | set_b) < d
            assert min(set_a | set_b) >= 0

    def test_out_of_range_offset_rejected(self):
        spec = DatasetSpec(op=Operation.ADD)
        with pytest.raises(ValueError):
            subset_indices(spec, spec.offset_max + 0.01)

    def test_draw_offset_within_bounds(self, rng):
        spec = DatasetSpec(op=Operation.ADD)
        ks = [draw_offset(spec, rng) for _ in range(500)]
        assert all(0.0 <= k <= spec.offset_max for k in ks)


class TestTargets:
    def test_constant_input_mul(self, rng):
        # all-ones inputs: both sums are 25 regardless of offset and overlap
        spec = DatasetSpec(
            op=Operation.MUL,
            interp=RangeSpec.single(1.0, 1.0),
            extrap=RangeSpec.single(1.0, 1.0),
        )
        for k in (0.0, 0.3, spec.offset_max):
            b = sample_batch(spec, "interp", 16, rng, k=k)
            np.testing.assert_allclose(b.t, 625.0)

    def test_sub_cancels_shared_indices(self, rng):
        spec = DatasetSpec(op=Operation.SUB)
        k = 0.2
        set_a, set_b = window_sets(spec, k)
        b = sample_batch(spec, "interp", 8, rng, k=k)
        only_a = sorted(set_a - set_b)
        only_b = sorted(set_b - set_a)
        want = b.x[:, only_a].sum(axis=1) - b.x[:, only_b].sum(axis=1)
        np.testing.assert_allclose(b.t, want, rtol=1e-12)

    def test_add_with_full_overlap_doubles(self, rng):
        spec = DatasetSpec(op=Operation.ADD, overlap_ratio=1.0)
        b = sample_batch(spec, "interp", 8, rng, k=0.1)
        (a0, a1), _ = subset_indices(spec, 0.1)
        np.testing.assert_allclose(b.t, 2 * b.x[:, a0:a1].sum(axis=1), rtol=1e-12)

    def test_each_op_against_index_oracle(self, rng):
        for op in Operation:
            spec = DatasetSpec(op=op)
            k = float(rng.uniform(0, spec.offset_max))
            b = sample_batch(spec, "extrap", 16, rng, k=k)
            set_a, set_b = window_sets(spec, k)
            a = b.x[:, sorted(set_a)].sum(axis=1)
            bb = b.x[:, sorted(set_b)].sum(axis=1)
            if op is Operation.ADD:
                want = a + bb
            elif op is Operation.SUB:
                want = a - bb
            elif op is Operation.MUL:
                want = a * bb
            else:
                want = a / bb
            np.testing.assert_allclose(b.t, want, rtol=1e-12)

    def test_targets_for_matches_sample_batch(self, rng):
        spec = DatasetSpec(op=Operation.MUL)
        b = sample_batch(spec, "interp", 8, rng, k=0.25)
        np.testing.assert_array_equal(b.t, targets_for(spec, b.x, 0.25))


class TestSampleBatch:
    def test_shapes_and_range(self, rng):
        spec = DatasetSpec(op=Operation.ADD)
        b = sample_batch(spec, "interp", 32, rng, k=0.1)
        assert b.x.shape == (32, 100)
        assert b.t.shape == (32,)
        assert np.all((b.x >= 1) & (b.x <= 2))
        be = sample_batch(spec, "extrap", 32, rng, k=0.1)
        assert np.all((be.x >= 2) & (be.x <= 6))

    def test_deterministic_given_seed(self):
        spec = DatasetSpec(op=Operation.ADD)
        b1 = sample_batch(spec, "interp", 16, np.random.default_rng(9), k=0.2)
        b2 = sample_batch(spec, "interp", 16, np.random.default_rng(9), k=0.2)
        np.testing.assert_array_equal(b1.x, b2.x)
        np.testing.assert_array_equal(b1.t, b2.t)

    def test_per_row_offsets_cover_positions(self, rng):
        # without a pinned offset every row draws its own window position;
        # each target must match one of the admissible window geometries
        spec = DatasetSpec(op=Operation.ADD, input_size=20)
        b = sample_batch(spec, "interp", 400, rng)
        starts_seen = set()
        for i in range(400):
            matched = []
            for start in range(0, spec.input_size - spec.span + 1):
                a = b.x[i, start : start + spec.subset_size].sum()
                b2 = b.x[
                    i,
                    start
                    + spec.subset_size
                    - spec.overlap_size : start
                    + 2 * spec.subset_size
                    - spec.overlap_size,
                ].sum()
                if abs(b.t[i] - (a + b2)) < 1e-9:
                    matched.append(start)
            assert matched, f"row {i} target matches no window position"
            starts_seen.update(matched)
        assert len(starts_seen) > 1

    def test_batch_must_be_positive(self, rng):
        spec = DatasetSpec(op=Operation.ADD)
        with pytest.raises(ValueError):
            sample_batch(spec, "interp", 0, rng)

    def test_unknown_split_rejected(self, rng):
        spec = DatasetSpec(op=Operation.ADD)
        with pytest.raises(ValueError):
            sample_batch(spec, "test", 4, rng)


class TestFixedEvalSet:
    def test_identical_for_identical_args(self):
        spec = DatasetSpec(op=Operation.ADD)
        e1 = fixed_eval_set(spec, "extrap", 100, seed=77, k=0.3)
        e2 = fixed_eval_set(spec, "extrap", 100, seed=77, k=0.3)
        np.testing.assert_array_equal(e1.x, e2.x)
        np.testing.assert_array_equal(e1.t, e2.t)

    def test_different_seeds_differ(self):
        spec = DatasetSpec(op=Operation.ADD)
        e1 = fixed_eval_set(spec, "extrap", 100, seed=77, k=0.3)
        e2 = fixed_eval_set(spec, "extrap", 100, seed=78, k=0.3)
        assert not np.array_equal(e1.x, e2.x)
