import math

import numpy as np
import pytest

from sascorr.model import expected_rates, forecast, g2_closed_form
from sascorr.simulate import (
    BLOCK_PULSES,
    PulseOutcome,
    sample_pulse,
    simulate_counts,
    simulate_run,
    sweep,
)
from sascorr.tagstore import write_stream
from tests.test_model import make_config


def rng(seed=0):
    return np.random.Generator(np.random.PCG64(seed))


class TestSamplePulse:
    def test_zero_power_is_silent(self):
        out = sample_pulse(make_config(), 0.0, rng())
        assert out.n_stokes_generated == 0
        assert out.n_as_pair == 0
        assert out.n_as_thermal == 0
        assert out.n_stokes_detected == 0
        assert out.n_as_detected == 0

    def test_clamped_read_converts_every_phonon(self):
        cfg = make_config(k_r=2.0, eta_s=1.0, eta_as=1.0)
        g = rng(1)
        for _ in range(200):
            out = sample_pulse(cfg, 1.0, g)
            assert out.n_as_pair == out.n_stokes_generated
            assert out.n_stokes_detected == out.n_stokes_generated

    def test_four_phonons_per_pulse_at_5mw(self):
        cfg = make_config()
        g = rng(2)
        n = 200_000
        total = sum(sample_pulse(cfg, 5.0, g).n_stokes_generated for _ in range(n))
        mean = total / n
        sigma = math.sqrt(4.0 / n)
        assert abs(mean - 4.0) < 3 * sigma

    def test_outcome_invariants_enforced(self):
        with pytest.raises(ValueError):
            PulseOutcome(
                pulse_index=0,
                n_stokes_generated=1,
                n_as_pair=2,
                n_as_thermal=0,
                n_stokes_detected=0,
                n_as_detected=0,
            )


class TestBlockSampler:
    def test_means_match_oracle_poissonian(self):
        cfg = make_config(k_s=0.9, k_r=0.05, k_th=0.01, eta_s=0.6, eta_as=0.4)
        power = 3.0
        n = 400_000
        summary, tally = simulate_counts(cfg, power, n, seed=11)
        oracle = expected_rates(cfg, power)
        m, sem = tally.stokes_mean()
        assert abs(m - oracle.m_s) < 3 * sem
        m, sem = tally.as_mean()
        assert abs(m - oracle.m_as_total) < 3 * sem
        assert summary.total_as_pair / n == pytest.approx(
            oracle.m_as_pair, abs=3 * math.sqrt(oracle.m_as_pair / n)
        )

    def test_means_match_oracle_thermal(self):
        from sascorr.model import enumerated_forecast

        cfg = make_config(
            k_s=0.7, k_r=0.05, k_th=0.01, eta_s=1.0, eta_as=1.0, statistics="thermal"
        )
        power = 2.0
        n = 400_000
        _, tally = simulate_counts(cfg, power, n, seed=12)
        enum = enumerated_forecast(cfg, power)
        c, sem = tally.center_mean()
        assert abs(c - enum.p_center) < 3 * sem
        g2, g2_sigma = tally.g2()
        assert abs(g2 - enum.g2) < 3 * g2_sigma

    def test_center_side_match_forecast(self):
        cfg = make_config(k_s=0.4, k_r=0.2, k_th=1e-3)
        power = 1.0
        _, tally = simulate_counts(cfg, power, 600_000, seed=13)
        fc = forecast(cfg, power)
        c, c_sem = tally.center_mean()
        s, s_sem = tally.side_mean()
        assert abs(c - fc.p_center) < 3 * c_sem
        assert abs(s - fc.p_side) < 3 * s_sem
        g2, g2_sigma = tally.g2()
        assert abs(g2 - g2_closed_form(cfg, power)) < 3 * g2_sigma

    def test_empirical_stokes_autocorrelation(self):
        # normalized factorial moment: 1 for poissonian, 2 for thermal
        for statistics, expect in (("poissonian", 1.0), ("thermal", 2.0)):
            cfg = make_config(k_s=0.5, statistics=statistics)
            summary, tally = simulate_counts(cfg, 2.0, 500_000, seed=21)
            n = summary.n_pulses
            mean = tally.stokes_sum / n
            second = tally.stokes_sumsq / n
            fact = (second - mean) / mean**2
            # delta-method error bar, generous
            sigma = math.sqrt((second / mean**4) / n) * 3
            assert abs(fact - expect) < max(sigma, 0.02), statistics

    def test_thinning_invariance_of_g2(self):
        base = make_config(k_s=0.4, k_r=0.2, k_th=1e-3, eta_s=1.0, eta_as=1.0)
        halved = make_config(k_s=0.4, k_r=0.2, k_th=1e-3, eta_s=0.5, eta_as=0.5)
        _, t1 = simulate_counts(base, 1.0, 1_500_000, seed=31)
        _, t2 = simulate_counts(halved, 1.0, 1_500_000, seed=32)
        g1, s1 = t1.g2()
        g2, s2 = t2.g2()
        assert abs(g1 - g2) < 3 * math.hypot(s1, s2)

    def test_pooled_and_direct_paths_agree_statistically(self):
        # same physical config probed on both sides of the pooled thresholds
        cfg_small = make_config(k_s=0.8, k_r=0.015, eta_s=0.015, k_th=0.0)
        cfg_large = make_config(k_s=0.8, k_r=0.5, eta_s=0.5, k_th=0.0)
        n = 300_000
        _, t_small = simulate_counts(cfg_small, 2.0, n, seed=41)
        _, t_large = simulate_counts(cfg_large, 2.0, n, seed=42)
        for cfg, tally in ((cfg_small, t_small), (cfg_large, t_large)):
            m, sem = tally.as_mean()
            assert abs(m - expected_rates(cfg, 2.0).m_as_total) < 3 * sem


class TestSimulateRun:
    def test_same_seed_bit_identical(self):
        cfg = make_config(k_s=0.3, k_r=0.1)
        a, _ = simulate_run(cfg, 1.0, 200_000, seed=5)
        b, _ = simulate_run(cfg, 1.0, 200_000, seed=5)
        assert np.array_equal(a.stokes, b.stokes)
        assert np.array_equal(a.antistokes, b.antistokes)

    def test_worker_count_does_not_change_output(self, tmp_path):
        cfg = make_config(k_s=0.3, k_r=0.1, detector_jitter_ps=350.0)
        n = 3 * BLOCK_PULSES + 12345
        one, s1 = simulate_run(cfg, 0.8, n, seed=6, n_workers=1)
        four, s4 = simulate_run(cfg, 0.8, n, seed=6, n_workers=4)
        assert np.array_equal(one.stokes, four.stokes)
        assert np.array_equal(one.antistokes, four.antistokes)
        assert s1 == s4
        p1, p4 = tmp_path / "one.rtg", tmp_path / "four.rtg"
        write_stream(p1, one)
        write_stream(p4, four)
        assert p1.read_bytes() == p4.read_bytes()

    def test_different_seeds_differ(self):
        cfg = make_config(k_s=0.3)
        a, _ = simulate_run(cfg, 1.0, 100_000, seed=1)
        b, _ = simulate_run(cfg, 1.0, 100_000, seed=2)
        assert not np.array_equal(a.stokes, b.stokes)

    def test_no_jitter_tags_on_pulse_grid(self):
        cfg = make_config(detector_jitter_ps=0.0, k_s=0.5)
        stream, _ = simulate_run(cfg, 2.0, 50_000, seed=7)
        assert len(stream.stokes) > 0
        assert np.all(stream.stokes % np.uint64(cfg.rep_period_ps) == 0)

    def test_summary_totals_consistent_with_tags(self):
        cfg = make_config(k_s=0.5, k_r=0.1, detector_jitter_ps=350.0)
        stream, summary = simulate_run(cfg, 1.5, 100_000, seed=8)
        assert len(stream.stokes) == summary.total_stokes_detected
        assert len(stream.antistokes) == summary.total_as_detected
        assert summary.total_as_pair <= summary.total_stokes_generated
        assert summary.elapsed_s == pytest.approx(100_000 / 76e6)

    def test_streams_sorted(self):
        cfg = make_config(k_s=1.0, detector_jitter_ps=5000.0)
        stream, _ = simulate_run(cfg, 3.0, 50_000, seed=9)
        assert np.all(np.diff(stream.stokes.astype(np.int64)) >= 0)

    def test_dead_time_drops_same_pulse_multiples(self):
        cfg = make_config(k_s=2.0, detector_jitter_ps=0.0, dead_time_ps=100)
        stream, summary = simulate_run(cfg, 3.0, 20_000, seed=10)
        # at most one surviving tag per pulse
        assert len(np.unique(stream.stokes)) == len(stream.stokes)
        nodead = make_config(k_s=2.0, detector_jitter_ps=0.0, dead_time_ps=0)
        full, _ = simulate_run(nodead, 3.0, 20_000, seed=10)
        assert len(stream.stokes) < len(full.stokes)

    def test_timestamp_overflow_rejected(self):
        cfg = make_config()
        with pytest.raises(OverflowError):
            simulate_run(cfg, 1.0, 2**51, seed=1)

    def test_rejects_zero_pulses(self):
        with pytest.raises(ValueError):
            simulate_run(make_config(), 1.0, 0, seed=1)


class TestSweep:
    def test_single_power_equals_simulate_counts(self):
        cfg = make_config(k_s=0.5, k_r=0.1)
        rows = sweep(cfg, [2.0], 50_000, seed=3)
        assert len(rows) == 1
        from sascorr.simulate import _subseed

        direct, _ = simulate_counts(cfg, 2.0, 50_000, seed=_subseed(3, 0))
        assert rows[0].summary == direct

    def test_duplicate_powers_are_independent(self):
        cfg = make_config(k_s=0.5)
        rows = sweep(cfg, [2.0, 2.0], 50_000, seed=3)
        assert rows[0].summary.total_stokes_generated != rows[1].summary.total_stokes_generated

    def test_per_power_pulse_schedule(self):
        cfg = make_config()
        rows = sweep(cfg, [1.0, 2.0], [1000, 2000], seed=3)
        assert rows[0].summary.n_pulses == 1000
        assert rows[1].summary.n_pulses == 2000

    def test_rejects_empty_and_negative(self):
        with pytest.raises(ValueError):
            sweep(make_config(), [], 1000, seed=1)
        with pytest.raises(ValueError):
            sweep(make_config(), [-1.0], 1000, seed=1)

    def test_stokes_scaling_is_linear(self):
        from sascorr.powerfit import DataSeries, fit_exponent

        cfg = make_config(eta_s=0.05, eta_as=1.0)
        powers = [0.5, 1.0, 2.0, 4.0, 8.0, 16.0]
        rows = sweep(cfg, powers, 200_000, seed=44)
        values = [r.summary.mean_stokes_per_pulse for r in rows]
        series = DataSeries(
            power_mw=np.array(powers),
            value=np.array(values),
            sigma=np.ones(len(powers)),
        )
        expo = fit_exponent(series)
        assert expo.exponent == pytest.approx(1.0, abs=0.05)

    def test_g2_high_power_decade_slope_is_inverse_power(self):
        # Monte Carlo counterpart of the closed-form 1/P falloff
        from sascorr.powerfit import DataSeries, fit_exponent

        cfg = make_config()  # default rate constants at unit efficiency
        powers = np.geomspace(20.0, 200.0, 5)
        rows = sweep(cfg, powers, 2_000_000, seed=45)
        g2_minus_1 = np.array([r.tally.g2()[0] - 1.0 for r in rows])
        expo = fit_exponent(
            DataSeries(power_mw=powers, value=g2_minus_1, sigma=np.ones(5))
        )
        assert expo.exponent == pytest.approx(-1.0, abs=0.1)
