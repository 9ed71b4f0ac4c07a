import numpy as np
import pytest

from fadkit.errors import FormatError, NumericalError, ValidationError
from fadkit.gaussian import (
    FadScore,
    GaussianStats,
    accumulate,
    fit_frames,
    frechet_distance,
    load_stats_cache,
    merge,
    merge_tree,
    save_stats_cache,
)

from oracles import diagonal_frechet, frechet_distance_mp, random_spd, two_pass_mean_cov


def accumulate_all(frames):
    stats = GaussianStats.empty(frames.shape[1])
    for frame in frames:
        stats = accumulate(stats, frame)
    return stats


def rel_err(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


class TestAccumulate:
    def test_two_point_fit(self):
        stats = accumulate_all(np.array([[0.0, 0.0], [2.0, 0.0]]))
        assert np.allclose(stats.mean, [1.0, 0.0], atol=0)
        assert np.allclose(stats.cov, [[2.0, 0.0], [0.0, 0.0]], atol=0)

    def test_cov_undefined_below_two(self):
        stats = accumulate(GaussianStats.empty(2), np.array([1.0, 2.0]))
        assert stats.count == 1
        with pytest.raises(ValidationError, match="count < 2"):
            _ = stats.cov

    def test_matches_two_pass(self):
        rng = np.random.default_rng(0)
        # large common mean exercises the shifted-origin update
        frames = rng.standard_normal((10_000, 8)) + 1e3
        stats = accumulate_all(frames)
        mean, cov = two_pass_mean_cov(frames)
        assert np.abs(stats.mean - mean).max() / np.abs(mean).max() < 1e-10
        assert np.abs(stats.cov - cov).max() / np.abs(cov).max() < 1e-10

    def test_batch_fit_matches_loop(self):
        rng = np.random.default_rng(1)
        frames = rng.standard_normal((500, 5)) * 3 + 7
        a = accumulate_all(frames)
        b = fit_frames(frames)
        assert a.count == b.count
        assert np.abs(a.mean - b.mean).max() < 1e-12
        assert np.abs(a.cov - b.cov).max() < 1e-12

    def test_dimension_mismatch(self):
        stats = GaussianStats.empty(3)
        with pytest.raises(ValidationError, match="frame length"):
            accumulate(stats, np.zeros(4))

    def test_non_finite_frame(self):
        stats = GaussianStats.empty(2)
        with pytest.raises(ValidationError, match="non-finite"):
            accumulate(stats, np.array([1.0, np.inf]))


class TestMerge:
    def test_identity_element(self):
        rng = np.random.default_rng(2)
        stats = fit_frames(rng.standard_normal((20, 3)))
        empty = GaussianStats.empty(3)
        for merged in (merge(stats, empty), merge(empty, stats)):
            assert merged.count == stats.count
            assert np.array_equal(merged.mean, stats.mean)
            assert np.array_equal(merged.cov, stats.cov)

    def test_commutes_within_tolerance(self):
        rng = np.random.default_rng(3)
        a = fit_frames(rng.standard_normal((40, 4)) + 5)
        b = fit_frames(rng.standard_normal((60, 4)) - 5)
        ab, ba = merge(a, b), merge(b, a)
        assert np.abs(ab.mean - ba.mean).max() < 1e-12
        assert np.abs(ab.cov - ba.cov).max() / np.abs(ab.cov).max() < 1e-12

    def test_three_way_partition_matches_single_pass(self):
        rng = np.random.default_rng(4)
        frames = rng.standard_normal((10_000, 6)) * 2 + 100
        cut1, cut2 = 2371, 6133
        parts = [
            fit_frames(frames[:cut1]),
            fit_frames(frames[cut1:cut2]),
            fit_frames(frames[cut2:]),
        ]
        merged = merge(merge(parts[0], parts[1]), parts[2])
        single = fit_frames(frames)
        assert merged.count == single.count
        assert np.abs(merged.mean - single.mean).max() / np.abs(single.mean).max() < 1e-10
        assert np.abs(merged.cov - single.cov).max() / np.abs(single.cov).max() < 1e-10

    def test_merge_tree_matches_sequential(self):
        rng = np.random.default_rng(5)
        parts = [fit_frames(rng.standard_normal((30, 3))) for _ in range(7)]
        tree = merge_tree(parts)
        seq = parts[0]
        for p in parts[1:]:
            seq = merge(seq, p)
        assert tree.count == seq.count
        assert np.abs(tree.mean - seq.mean).max() < 1e-12

    def test_dimension_mismatch(self):
        with pytest.raises(ValidationError, match="dimension mismatch"):
            merge(GaussianStats.empty(2), GaussianStats.empty(3))


class TestFrechetDistance:
    def test_identical_stats_zero(self):
        rng = np.random.default_rng(6)
        stats = fit_frames(rng.standard_normal((200, 5)))
        score = frechet_distance(stats, stats)
        assert score.value <= 1e-9
        assert score.mean_term == 0.0

    def test_mean_shift_only(self):
        for dim in (2, 5, 16):
            mu_r = np.zeros(dim)
            mu_t = np.eye(dim)[0]
            ref = GaussianStats.from_moments(100, mu_r, np.eye(dim))
            test = GaussianStats.from_moments(100, mu_t, np.eye(dim))
            score = frechet_distance(ref, test)
            assert rel_err(score.value, 1.0) < 1e-12
            assert abs(score.trace_term) < 1e-10

    def test_commuting_diagonal_case(self):
        ref = GaussianStats.from_moments(10, np.zeros(2), np.eye(2))
        test = GaussianStats.from_moments(10, np.zeros(2), np.diag([4.0, 9.0]))
        score = frechet_distance(ref, test)
        assert rel_err(score.value, 5.0) < 1e-12

    def test_commuting_closed_form_random(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            dim = int(rng.integers(2, 9))
            d1 = rng.uniform(0.1, 5.0, dim)
            d2 = rng.uniform(0.1, 5.0, dim)
            m1 = rng.standard_normal(dim)
            m2 = rng.standard_normal(dim)
            ref = GaussianStats.from_moments(50, m1, np.diag(d1))
            test = GaussianStats.from_moments(50, m2, np.diag(d2))
            expected = diagonal_frechet(m1, d1, m2, d2)
            assert rel_err(frechet_distance(ref, test).value, expected) < 1e-10

    def test_symmetry(self):
        rng = np.random.default_rng(8)
        a = fit_frames(rng.standard_normal((100, 6)) + 1)
        b = fit_frames(rng.standard_normal((120, 6)) * 2)
        ab = frechet_distance(a, b).value
        ba = frechet_distance(b, a).value
        assert rel_err(ab, ba) < 1e-8

    def test_translation_invariance(self):
        rng = np.random.default_rng(9)
        x = rng.standard_normal((150, 4))
        y = rng.standard_normal((180, 4)) * 1.5 + 0.3
        shift = np.full(4, 1000.0)
        base = frechet_distance(fit_frames(x), fit_frames(y)).value
        moved = frechet_distance(fit_frames(x + shift), fit_frames(y + shift)).value
        assert rel_err(moved, base) < 1e-9

    def test_matches_extended_precision_oracle(self):
        rng = np.random.default_rng(10)
        for dim in (2, 4, 8, 16):
            for _ in range(3):
                cov_r = random_spd(dim, condition=10 ** rng.uniform(1, 6), rng=rng)
                cov_t = random_spd(dim, condition=10 ** rng.uniform(1, 6), rng=rng)
                mu_r = rng.standard_normal(dim)
                mu_t = rng.standard_normal(dim)
                ref = GaussianStats.from_moments(1000, mu_r, cov_r)
                test = GaussianStats.from_moments(1000, mu_t, cov_t)
                got = frechet_distance(ref, test).value
                want = frechet_distance_mp(mu_r, cov_r, mu_t, cov_t)
                assert rel_err(got, want) < 1e-6

    def test_negative_eigenvalue_beyond_tolerance_errors(self):
        cov = np.diag([1.0, -0.1])
        ref = GaussianStats.from_moments(10, np.zeros(2), np.eye(2))
        bad = GaussianStats.from_moments(10, np.zeros(2), cov)
        with pytest.raises(NumericalError, match="negative eigenvalue"):
            frechet_distance(ref, bad)

    def test_small_negative_eigenvalue_clamped_with_flag(self):
        cov = np.diag([1.0, -1e-9])
        ref = GaussianStats.from_moments(10, np.zeros(2), np.eye(2))
        near = GaussianStats.from_moments(10, np.zeros(2), cov)
        score = frechet_distance(ref, near)
        assert "negative-eigs-clamped" in score.numerical_flags
        assert score.value >= 0.0

    def test_preclamp_total_nonnegative_on_well_conditioned_inputs(self):
        rng = np.random.default_rng(20)
        for _ in range(25):
            dim = int(rng.integers(2, 10))
            a = fit_frames(rng.standard_normal((200, dim)) @ random_spd(dim, 100, rng))
            b = fit_frames(rng.standard_normal((250, dim)) @ random_spd(dim, 100, rng))
            score = frechet_distance(a, b)
            total = score.mean_term + score.trace_term
            assert total >= -1e-8 * (score.mean_term + abs(score.trace_term))
            assert score.value >= 0.0

    def test_rank_deficient_song_covariance(self):
        rng = np.random.default_rng(11)
        ref = fit_frames(rng.standard_normal((500, 8)))
        song = fit_frames(rng.standard_normal((3, 8)))  # rank 2 covariance
        score = frechet_distance(ref, song)
        assert score.value >= 0.0
        assert np.isfinite(score.value)

    def test_count_below_two_rejected(self):
        ref = GaussianStats.from_moments(10, np.zeros(2), np.eye(2))
        single = accumulate(GaussianStats.empty(2), np.zeros(2))
        with pytest.raises(ValidationError, match="count >= 2"):
            frechet_distance(ref, single)

    def test_biased_covariance_knob(self):
        rng = np.random.default_rng(12)
        x = rng.standard_normal((50, 3))
        y = rng.standard_normal((60, 3)) + 1
        a, b = fit_frames(x), fit_frames(y)
        unbiased = frechet_distance(a, b, ddof=1).value
        biased = frechet_distance(a, b, ddof=0).value
        assert unbiased != biased
        _, cov0 = two_pass_mean_cov(x, ddof=0)
        assert np.abs(a.covariance(0) - cov0).max() < 1e-12


class TestStatsCache:
    def _stats(self, seed=13, dim=5, n=300):
        rng = np.random.default_rng(seed)
        return fit_frames(rng.standard_normal((n, dim)) * 2 + 3)

    def test_round_trip_bit_exact_fad(self, tmp_path):
        ref = self._stats(13)
        test = self._stats(14)
        before = frechet_distance(ref, test)
        path = tmp_path / "ref.fads"
        save_stats_cache(ref, path)
        loaded, fingerprint = load_stats_cache(path)
        assert fingerprint == b"\x00" * 32
        assert loaded.count == ref.count
        assert np.array_equal(loaded.mean, ref.mean)
        assert np.array_equal(loaded.cov, ref.cov)
        after = frechet_distance(loaded, test)
        assert after.value == before.value
        assert after.mean_term == before.mean_term
        assert after.trace_term == before.trace_term

    def test_save_load_save_identical_bytes(self, tmp_path):
        stats = self._stats(15)
        p1, p2 = tmp_path / "a.fads", tmp_path / "b.fads"
        save_stats_cache(stats, p1)
        loaded, _ = load_stats_cache(p1)
        save_stats_cache(loaded, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "x.fads"
        save_stats_cache(self._stats(), path)
        raw = bytearray(path.read_bytes())
        raw[:4] = b"XXXX"
        path.write_bytes(bytes(raw))
        with pytest.raises(FormatError, match="bad magic"):
            load_stats_cache(path)

    def test_truncation(self, tmp_path):
        path = tmp_path / "x.fads"
        save_stats_cache(self._stats(), path)
        raw = path.read_bytes()
        path.write_bytes(raw[:-5])
        with pytest.raises(FormatError, match="truncated"):
            load_stats_cache(path)

    def test_fingerprint_verification(self, tmp_path, small_set_dir):
        from fadkit.store import set_fingerprint

        stats = self._stats(dim=4)
        path = tmp_path / "x.fads"
        save_stats_cache(stats, path, fingerprint=set_fingerprint(small_set_dir))
        loaded, _ = load_stats_cache(path, source_dir=small_set_dir, verify=True)
        assert loaded.count == stats.count
        # stale cache: fingerprint mismatch
        save_stats_cache(stats, path, fingerprint=b"\x01" * 32)
        with pytest.raises(FormatError, match="does not match"):
            load_stats_cache(path, source_dir=small_set_dir, verify=True)
        loaded, _ = load_stats_cache(path, source_dir=small_set_dir, verify=False)
        assert loaded.count == stats.count
