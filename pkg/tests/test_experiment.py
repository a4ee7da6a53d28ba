import math
from dataclasses import replace

import numpy as np
import pytest

from spdcherald.detectors import ClickDetectorSpec, DeadTimeSpec
from spdcherald.errors import EstimationError, ValidationError
from spdcherald.experiment import (
    HeraldedStats,
    SetupConfig,
    hbt_g2,
    heralded_photon_statistics,
    reference_setup,
    simulate_counts,
)

# frozen from the exact series sums of the reference configuration
REF_SIGNAL_SINGLES = 291888.034
REF_IDLER_SINGLES = 285.0195
REF_TRIGGER = 217997.207
REF_COINCIDENCES = 3058.640
REF_PER_TRIGGER = 0.01403064
REF_P0 = 0.8084417
REF_P1 = 0.1888711
REF_P2 = 2.667867e-3
REF_G2_HERALDED = 0.1444749

MC_PULSES = 10_000_000


def quiet_setup(**overrides):
    """Reference chain with dark counts and afterpulsing switched off."""
    base = dict(
        herald=ClickDetectorSpec(efficiency=0.547, mode="free_running", dark_rate_cps=0.0),
        idler_detector=ClickDetectorSpec(
            efficiency=0.10, mode="gated", dark_prob_per_gate=0.0, afterpulse_prob=0.0
        ),
    )
    base.update(overrides)
    return reference_setup(**base)


class TestConfigValidation:
    def test_defaults_are_valid(self):
        cfg = SetupConfig()
        assert cfg.mu == 0.0829
        assert cfg.trigger_dead_time.model == "paralyzable"

    def test_probability_ranges(self):
        with pytest.raises(ValidationError):
            reference_setup(alpha_signal=1.2)
        with pytest.raises(ValidationError):
            reference_setup(t_delay_fiber=-0.1)

    def test_detector_modes_enforced(self):
        gated = ClickDetectorSpec(efficiency=0.5, mode="gated", dark_prob_per_gate=1e-4)
        with pytest.raises(ValidationError):
            reference_setup(herald=gated)

    def test_bad_law_rejected(self):
        with pytest.raises(ValidationError):
            reference_setup(law="gaussian")


class TestAnalyticCounts:
    def test_reference_rates(self):
        counts = simulate_counts(reference_setup())
        assert counts.signal_singles == pytest.approx(REF_SIGNAL_SINGLES, rel=1e-6)
        assert counts.idler_singles == pytest.approx(REF_IDLER_SINGLES, rel=1e-6)
        assert counts.trigger_rate == pytest.approx(REF_TRIGGER, rel=1e-6)
        assert counts.coincidences == pytest.approx(REF_COINCIDENCES, rel=1e-6)
        assert counts.per_trigger_coincidence_prob == pytest.approx(REF_PER_TRIGGER, rel=1e-5)

    def test_per_trigger_consistency(self):
        counts = simulate_counts(reference_setup())
        assert counts.per_trigger_coincidence_prob == pytest.approx(
            counts.coincidences / counts.trigger_rate, rel=1e-12
        )

    def test_vacuum_gives_zero(self):
        counts = simulate_counts(quiet_setup(mu=0.0))
        assert counts.signal_singles == 0.0
        assert counts.idler_singles == 0.0
        assert counts.coincidences == 0.0
        assert counts.trigger_rate == 0.0

    def test_vacuum_with_dark_counts(self):
        counts = simulate_counts(reference_setup(mu=0.0))
        assert counts.signal_singles == pytest.approx(90.0, rel=1e-6)
        assert counts.idler_singles == pytest.approx(205000.0 * 2.5e-4 * 1.001, rel=1e-9)
        assert counts.per_trigger_coincidence_prob == pytest.approx(2.5e-4 * 1.001, rel=1e-6)

    def test_trigger_monotone_in_mu(self):
        triggers = [
            simulate_counts(reference_setup(mu=m)).trigger_rate
            for m in (0.01, 0.05, 0.0829, 0.15, 0.25)
        ]
        assert sorted(triggers) == triggers

    def test_physical_bound_on_coincidences(self):
        # per-trigger coincidence probability never beats delivering at least
        # one photon through the downstream path, plus dark counts
        for mu in (0.02, 0.0829, 0.2):
            for alpha_i in (0.1, 0.22, 0.6):
                cfg = reference_setup(mu=mu, alpha_idler=alpha_i)
                counts = simulate_counts(cfg)
                stats = heralded_photon_statistics(cfg)
                bound = (
                    (1.0 - stats.probability(0)) * cfg.t_delay_fiber * cfg.idler_detector.efficiency
                    + cfg.idler_detector.dark_prob_per_gate
                )
                assert counts.per_trigger_coincidence_prob <= bound + 1e-6

    def test_coincidence_window_adds_accidentals(self):
        one = simulate_counts(reference_setup())
        two = simulate_counts(reference_setup(coincidence_window=2))
        gain = two.per_trigger_coincidence_prob - one.per_trigger_coincidence_prob
        assert 0.0 < gain < 2.0 * 2.5e-4

    def test_thermal_law_raises_coincidences(self):
        po = simulate_counts(reference_setup())
        th = simulate_counts(reference_setup(law="thermal"))
        assert th.per_trigger_coincidence_prob > po.per_trigger_coincidence_prob


class TestHeraldedStats:
    def test_reference_values(self):
        stats = heralded_photon_statistics(reference_setup())
        assert stats.probability(0) == pytest.approx(REF_P0, rel=1e-6)
        assert stats.probability(1) == pytest.approx(REF_P1, rel=1e-6)
        assert stats.probability(2) == pytest.approx(REF_P2, rel=1e-6)

    def test_normalization(self):
        stats = heralded_photon_statistics(reference_setup())
        assert abs(stats.p.sum() - 1.0) < 1e-9

    def test_p2_monotone_in_mu(self):
        p2 = [
            heralded_photon_statistics(reference_setup(mu=m)).probability(2)
            for m in (0.01, 0.05, 0.0829, 0.15, 0.25)
        ]
        assert sorted(p2) == p2

    def test_lossless_low_gain_limit(self):
        cfg = quiet_setup(mu=1e-6, alpha_idler=1.0, t_idler_optics=1.0)
        stats = heralded_photon_statistics(cfg)
        assert stats.probability(1) > 0.999

    def test_cannot_condition_without_heralds(self):
        with pytest.raises(EstimationError):
            heralded_photon_statistics(quiet_setup(mu=0.0))

    def test_stats_validation(self):
        with pytest.raises(ValidationError):
            HeraldedStats(p=np.array([0.5, 0.4]))
        with pytest.raises(ValidationError):
            HeraldedStats(p=np.array([1.2, -0.2]))


class TestMonteCarlo:
    def test_requires_seed_and_pulses(self):
        cfg = reference_setup()
        with pytest.raises(ValidationError):
            simulate_counts(cfg, mode="monte_carlo", n_pulses=MC_PULSES)
        with pytest.raises(ValidationError):
            simulate_counts(cfg, mode="monte_carlo", n_pulses=1000, seed=1)
        with pytest.raises(ValidationError):
            simulate_counts(cfg, mode="other")

    def test_bit_identical_for_fixed_seed(self):
        cfg = reference_setup()
        a = simulate_counts(cfg, mode="monte_carlo", n_pulses=1_000_000, seed=9)
        b = simulate_counts(cfg, mode="monte_carlo", n_pulses=1_000_000, seed=9)
        assert a == b
        c = simulate_counts(cfg, mode="monte_carlo", n_pulses=1_000_000, seed=10)
        assert a != c

    def test_counts_agree_with_analytic_within_3_sigma(self):
        cfg = reference_setup()
        mc = simulate_counts(cfg, mode="monte_carlo", n_pulses=MC_PULSES, seed=42)
        an = simulate_counts(cfg)
        duration = MC_PULSES / cfg.rep_rate_hz
        for name in ("signal_singles", "trigger_rate", "coincidences"):
            expected = getattr(an, name)
            sigma = math.sqrt(expected * duration) / duration
            assert abs(getattr(mc, name) - expected) < 3.0 * sigma, name
        # idler singles are a per-gate probability scaled to the gate rate
        p = an.idler_singles / an.gate_rate
        sigma_idler = math.sqrt(p / MC_PULSES) * an.gate_rate
        assert abs(mc.idler_singles - an.idler_singles) < 3.0 * sigma_idler

    def test_stats_agree_with_analytic_within_3_sigma(self):
        cfg = reference_setup()
        mc = heralded_photon_statistics(cfg, mode="monte_carlo", n_pulses=MC_PULSES, seed=7)
        an = heralded_photon_statistics(cfg)
        n_heralds = MC_PULSES * simulate_counts(cfg).signal_singles / cfg.rep_rate_hz
        for k in range(3):
            p = an.probability(k)
            sigma = math.sqrt(p * (1.0 - p) / n_heralds)
            assert abs(mc.probability(k) - p) < 3.0 * sigma, k

    def test_block_boundaries_do_not_bias_dead_time(self):
        # trigger rate estimated across block joins matches the formula
        cfg = reference_setup()
        mc = simulate_counts(cfg, mode="monte_carlo", n_pulses=3 * (1 << 20), seed=13)
        an = simulate_counts(cfg)
        duration = 3 * (1 << 20) / cfg.rep_rate_hz
        sigma = math.sqrt(an.trigger_rate * duration) / duration
        assert abs(mc.trigger_rate - an.trigger_rate) < 3.0 * sigma

    def test_nonparalyzable_mode_runs(self):
        cfg = reference_setup(trigger_dead_time=DeadTimeSpec(1.0, "nonparalyzable"))
        mc = simulate_counts(cfg, mode="monte_carlo", n_pulses=2_000_000, seed=3)
        an = simulate_counts(cfg)
        duration = 2_000_000 / cfg.rep_rate_hz
        sigma = math.sqrt(an.trigger_rate * duration) / duration
        assert abs(mc.trigger_rate - an.trigger_rate) < 3.0 * sigma


class TestG2:
    def test_poissonian_signal_arm_is_exactly_one(self):
        result = hbt_g2(reference_setup())
        assert result.value == 1.0
        assert result.stderr == 0.0

    def test_thermal_signal_arm_is_two(self):
        result = hbt_g2(reference_setup(law="thermal"))
        assert result.value == pytest.approx(2.0, abs=1e-6)

    def test_multimode_signal_arm(self):
        result = hbt_g2(reference_setup(law="multimode_thermal", modes=4))
        assert result.value == pytest.approx(1.25, abs=1e-9)

    def test_heralded_idler_reference(self):
        result = hbt_g2(reference_setup(), arm="idler_heralded")
        assert result.value == pytest.approx(REF_G2_HERALDED, rel=1e-5)
        assert 0.104 <= result.value <= 0.156  # about 2 P2 / (P1 + 2 P2)^2
        assert result.value < 0.3

    def test_analytic_value_independent_of_splitter(self):
        a = hbt_g2(reference_setup(), splitter_ratio=0.3)
        b = hbt_g2(reference_setup(), splitter_ratio=0.5)
        assert a.value == b.value

    def test_mc_signal_arm_consistent_with_one(self):
        result = hbt_g2(
            reference_setup(), mode="monte_carlo", n_pulses=MC_PULSES, seed=3
        )
        assert abs(result.value - 1.0) < 3.0 * result.stderr
        assert result.stderr > 0.0

    def test_mc_heralded_idler_consistent_with_analytic(self):
        mc = hbt_g2(
            reference_setup(), arm="idler_heralded", mode="monte_carlo", n_pulses=MC_PULSES, seed=3
        )
        an = hbt_g2(reference_setup(), arm="idler_heralded")
        assert abs(mc.value - an.value) < 3.0 * mc.stderr

    def test_invalid_arguments(self):
        with pytest.raises(ValidationError):
            hbt_g2(reference_setup(), arm="idler")
        with pytest.raises(ValidationError):
            hbt_g2(reference_setup(), splitter_ratio=0.0)

    def test_zero_flux_rejected(self):
        with pytest.raises(EstimationError):
            hbt_g2(quiet_setup(mu=0.0))
