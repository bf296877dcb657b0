import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sascorr.correlate import (
    CorrelationHistogram,
    PeakSeries,
    autocorrelate_hbt,
    cauchy_schwarz_factor,
    cross_correlate,
    extract_peaks,
    g2_from_peaks,
)
from sascorr.simulate import simulate_run
from tests.test_model import make_config


def brute_force_counts(a, b, bin_width, max_lag):
    """O(n^2) oracle: same symmetric bin rule, computed over every pair."""
    k_max = max_lag // bin_width
    counts = np.zeros(2 * k_max + 1, dtype=np.int64)
    half = bin_width // 2
    for ta in np.asarray(a, dtype=np.int64):
        for tb in np.asarray(b, dtype=np.int64):
            lag = int(tb) - int(ta)
            j = int(math.copysign((abs(lag) + half) // bin_width, lag))
            if abs(j) <= k_max:
                counts[j + k_max] += 1
    return counts


sorted_tags = st.lists(st.integers(0, 5000), min_size=0, max_size=60).map(
    lambda xs: np.array(sorted(xs), dtype=np.uint64)
)


class TestCrossCorrelate:
    def test_single_pair_at_zero_lag(self):
        a = np.array([1000], dtype=np.uint64)
        b = np.array([1000], dtype=np.uint64)
        hist = cross_correlate(a, b, 100, 1000)
        assert hist.count_at(0) == 1
        assert hist.counts.sum() == 1

    def test_empty_stream_gives_all_zero(self):
        a = np.array([], dtype=np.uint64)
        b = np.array([10, 20], dtype=np.uint64)
        hist = cross_correlate(a, b, 100, 1000)
        assert hist.counts.sum() == 0
        assert hist.n_a == 0 and hist.n_b == 2

    def test_lag_sign_convention(self):
        # b after a: positive lag; 250 ps lands in bin 3 = [250, 349]
        a = np.array([0], dtype=np.uint64)
        b = np.array([250], dtype=np.uint64)
        hist = cross_correlate(a, b, 100, 1000)
        assert hist.count_at(3) == 1
        rev = cross_correlate(b, a, 100, 1000)
        assert rev.count_at(-3) == 1

    def test_rejects_unsorted_input(self):
        a = np.array([5, 1], dtype=np.uint64)
        b = np.array([1], dtype=np.uint64)
        with pytest.raises(ValueError, match="sorted"):
            cross_correlate(a, b, 100, 1000)

    def test_rejects_bad_lag_arguments(self):
        a = np.array([1], dtype=np.uint64)
        with pytest.raises(ValueError):
            cross_correlate(a, a, 100, 1050)
        with pytest.raises(ValueError):
            cross_correlate(a, a, 0, 1000)

    @given(a=sorted_tags, b=sorted_tags)
    @settings(max_examples=80, deadline=None)
    def test_matches_brute_force(self, a, b):
        hist = cross_correlate(a, b, 100, 1000)
        assert np.array_equal(hist.counts, brute_force_counts(a, b, 100, 1000))

    @given(a=sorted_tags, b=sorted_tags)
    @settings(max_examples=40, deadline=None)
    def test_odd_bin_width_matches_brute_force(self, a, b):
        hist = cross_correlate(a, b, 87, 87 * 9)
        assert np.array_equal(hist.counts, brute_force_counts(a, b, 87, 87 * 9))

    @given(a=sorted_tags, b=sorted_tags, shift=st.integers(0, 10**9))
    @settings(max_examples=40, deadline=None)
    def test_invariant_under_global_time_shift(self, a, b, shift):
        base = cross_correlate(a, b, 100, 1000)
        shifted = cross_correlate(a + np.uint64(shift), b + np.uint64(shift), 100, 1000)
        assert np.array_equal(base.counts, shifted.counts)

    @given(a=sorted_tags, b=sorted_tags)
    @settings(max_examples=40, deadline=None)
    def test_swap_mirrors_histogram(self, a, b):
        fwd = cross_correlate(a, b, 100, 1000)
        rev = cross_correlate(b, a, 100, 1000)
        assert np.array_equal(fwd.counts, rev.counts[::-1])

    def test_counts_bounded_by_all_pairs(self):
        rng = np.random.default_rng(3)
        a = np.sort(rng.integers(0, 10000, 50)).astype(np.uint64)
        b = np.sort(rng.integers(0, 10000, 70)).astype(np.uint64)
        hist = cross_correlate(a, b, 100, 2000)
        assert hist.counts.sum() <= 50 * 70

    def test_chunked_path_matches_brute_force(self, monkeypatch):
        import sascorr.correlate as mod

        rng = np.random.default_rng(11)
        a = np.sort(rng.integers(0, 3000, 200)).astype(np.uint64)
        b = np.sort(rng.integers(0, 3000, 200)).astype(np.uint64)
        monkeypatch.setattr(mod, "_PAIR_CHUNK", 97)
        hist = mod.cross_correlate(a, b, 100, 1000)
        assert np.array_equal(hist.counts, brute_force_counts(a, b, 100, 1000))


class TestHbtSplit:
    def test_split_is_deterministic_per_seed(self):
        rng = np.random.default_rng(5)
        tags = np.sort(rng.integers(0, 10**7, 2000)).astype(np.uint64)
        h1 = autocorrelate_hbt(tags, 99, 100, 2000)
        h2 = autocorrelate_hbt(tags, 99, 100, 2000)
        h3 = autocorrelate_hbt(tags, 100, 100, 2000)
        assert np.array_equal(h1.counts, h2.counts)
        assert not np.array_equal(h1.counts, h3.counts)

    def test_splits_are_disjoint(self):
        tags = np.arange(100, dtype=np.uint64) * 13158
        hist = autocorrelate_hbt(tags, 1, 100, 26300)
        assert hist.n_a + hist.n_b == len(tags)

    def test_poissonian_stream_peak_ratio_near_one(self):
        cfg = make_config(k_s=0.5, k_r=0.0, k_th=0.0, detector_jitter_ps=0.0)
        stream, _ = simulate_run(cfg, 1.0, 400_000, seed=61)
        rep = cfg.rep_period_ps
        hist = autocorrelate_hbt(stream.stokes, 7, 86, (8 * (rep // 86) + 12) * 86)
        est = g2_from_peaks(extract_peaks(hist, rep, 1000))
        assert abs(est.g2 - 1.0) < 3 * est.sigma

    def test_thermal_stream_peak_ratio_near_two(self):
        cfg = make_config(
            k_s=0.3, k_r=0.0, k_th=0.0, statistics="thermal", detector_jitter_ps=0.0
        )
        stream, _ = simulate_run(cfg, 1.0, 2_000_000, seed=62)
        rep = cfg.rep_period_ps
        hist = autocorrelate_hbt(stream.stokes, 8, 86, (8 * (rep // 86) + 12) * 86)
        est = g2_from_peaks(extract_peaks(hist, rep, 1000))
        assert abs(est.g2 - 2.0) < 3 * est.sigma


class TestExtractPeaks:
    def test_exact_comb_captures_everything(self):
        rep = 13158
        tags_a = np.repeat(np.arange(1, 41, dtype=np.uint64) * rep, 2)
        tags_b = np.arange(1, 41, dtype=np.uint64) * rep
        hist = cross_correlate(tags_a, tags_b, 86, (6 * (rep // 86) + 12) * 86)
        peaks = extract_peaks(hist, rep, 1000)
        assert sum(peaks.peak_counts.values()) == hist.counts.sum()
        assert peaks.peak_counts[0] == 80

    def test_rejects_nondividing_bin_width(self):
        hist = cross_correlate(
            np.array([0], dtype=np.uint64), np.array([0], dtype=np.uint64), 100, 100 * 140
        )
        with pytest.raises(ValueError, match="divide"):
            extract_peaks(hist, 13158, 1000)

    def test_rejects_window_beyond_half_period(self):
        hist = cross_correlate(
            np.array([0], dtype=np.uint64), np.array([0], dtype=np.uint64), 86, 86 * 200
        )
        with pytest.raises(ValueError, match="half"):
            extract_peaks(hist, 13158, 7000)

    def test_narrow_window_undercounts_by_design(self):
        rep = 13158
        cfg = make_config(k_s=0.5, k_r=0.1, detector_jitter_ps=400.0)
        stream, _ = simulate_run(cfg, 1.0, 100_000, seed=9)
        hist = cross_correlate(
            stream.stokes, stream.antistokes, 86, (4 * (rep // 86) + 25) * 86
        )
        wide = extract_peaks(hist, rep, 2000).peak_counts[0]
        narrow = extract_peaks(hist, rep, 200).peak_counts[0]
        assert narrow < wide

    def test_peak_zero_always_present(self):
        with pytest.raises(ValueError, match="0"):
            PeakSeries(rep_period_ps=13158, window_ps=1000, peak_counts={1: 5})


class TestG2FromPeaks:
    def test_arithmetic(self):
        peaks = PeakSeries(
            rep_period_ps=13158,
            window_ps=1000,
            peak_counts={0: 400, -2: 20, -1: 20, 1: 20, 2: 20},
        )
        est = g2_from_peaks(peaks)
        assert est.g2 == 20.0
        assert est.center_count == 400
        assert est.side_mean == 20.0
        assert est.sigma == pytest.approx(20 * math.sqrt(1 / 400 + 1 / 80))

    def test_flat_comb_is_uncorrelated(self):
        peaks = PeakSeries(
            rep_period_ps=13158,
            window_ps=1000,
            peak_counts={k: 500 for k in range(-4, 5)},
        )
        assert g2_from_peaks(peaks).g2 == 1.0

    def test_zero_side_mean_flagged_infinite(self):
        peaks = PeakSeries(
            rep_period_ps=13158,
            window_ps=1000,
            peak_counts={0: 10, -1: 0, 1: 0},
        )
        est = g2_from_peaks(peaks)
        assert est.is_infinite
        assert math.isinf(est.sigma)

    def test_requires_two_side_peaks(self):
        peaks = PeakSeries(
            rep_period_ps=13158, window_ps=1000, peak_counts={0: 10, 1: 5}
        )
        with pytest.raises(ValueError, match="side"):
            g2_from_peaks(peaks)

    def test_simulated_defaults_match_closed_form_g2(self):
        from sascorr.model import g2_closed_form

        # same rate constants as the calibrated defaults; efficiencies raised
        # (g2 is thinning invariant) and jitter off so peaks capture all pairs
        cfg = make_config(
            k_s=0.8, k_r=1e-4, k_th=1e-5, eta_s=0.1, eta_as=1.0,
            detector_jitter_ps=0.0,
        )
        stream, _ = simulate_run(cfg, 10.0, 4_000_000, seed=77)
        rep = cfg.rep_period_ps
        hist = cross_correlate(
            stream.stokes, stream.antistokes, 86, (10 * (rep // 86) + 12) * 86
        )
        est = g2_from_peaks(extract_peaks(hist, rep, 1000))
        oracle = g2_closed_form(cfg, 10.0)
        assert oracle == pytest.approx(91 / 81, abs=1e-12)
        assert abs(est.g2 - oracle) < 3 * est.sigma


class TestCauchySchwarz:
    def test_classical_boundary(self):
        assert cauchy_schwarz_factor(2.0, 2.0, 2.0) == 1.0

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            cauchy_schwarz_factor(0.0, 1.0, 1.0)

    def test_super_classical_when_cross_dominates(self):
        assert cauchy_schwarz_factor(10.0, 1.0, 1.0) == 100.0
