import math

import numpy as np
from django.test import SimpleTestCase

from core.arrays import (
    Angle, QuantizerConfig, UpaGeometry, WeightVector, array_response, combined_gain, quantized_response,
)
from core.channel import (
    ChannelSnapshot, GainEstimate, PathParams, TrainingSession, TrainingSignal, aligned_snr_gain, estimate_gain,
    simulate_training,
)
from core.exceptions import EstimationError

BS = UpaGeometry(16, 0.5)
MS = UpaGeometry(8, 0.5)
LOS_AOD = Angle(0.1244, -0.1235)
LOS_AOA = Angle(-0.7483, 0.1235)


def unit_channel(side=2, gain=1.0):
    """Single path with matched unquantized beams on both sides, so eta == gain."""
    geom = UpaGeometry(side, 0.5)
    aod, aoa = Angle(0.3, 0.1), Angle(-0.2, 0.4)
    chan = ChannelSnapshot((PathParams(gain, aod, aoa),), geom, geom)
    return chan, array_response(geom, aod), array_response(geom, aoa)


class TrainingSignalTests(SimpleTestCase):
    def test_evenly_spaced_layout(self):
        sig = TrainingSignal.evenly_spaced(2048, 341)
        self.assertEqual(sig.num_pilots, 341)
        self.assertEqual(sig.pilot_indices[:3], (0, 6, 12))
        self.assertLess(max(sig.pilot_indices), 2048)
        self.assertEqual(sig.noise_var, 1.0)

    def test_noise_var_sets_sigma(self):
        sig = TrainingSignal.evenly_spaced(64, 8, noise_var=4.0)
        self.assertEqual(sig.noise_std, 2.0)
        self.assertEqual(sig.noiseless().noise_std, 0.0)

    def test_invalid_layouts(self):
        with self.assertRaises(ValueError):
            TrainingSignal(8, (0, 0), np.ones(2))
        with self.assertRaises(ValueError):
            TrainingSignal(8, (0, 8), np.ones(2))
        with self.assertRaises(ValueError):
            TrainingSignal(8, (0, 1), np.array([1.0, 0.5]))
        with self.assertRaises(ValueError):
            TrainingSignal.evenly_spaced(8, 9)


class SimulateTrainingTests(SimpleTestCase):
    def test_noiseless_reception_is_scaled_pilots(self):
        chan, c, d = unit_channel(gain=0.5 + 0.2j)
        sig = TrainingSignal.evenly_spaced(64, 16).noiseless()
        received = simulate_training(chan, c, d, sig, np.random.default_rng(0))
        np.testing.assert_allclose(received, (0.5 + 0.2j) * sig.pilot_symbols, atol=1e-12)

    def test_noise_only_has_unit_variance(self):
        chan, c, d = unit_channel(gain=0.0)
        sig = TrainingSignal.evenly_spaced()
        rng = np.random.default_rng(5)
        received = np.concatenate([simulate_training(chan, c, d, sig, rng) for _ in range(50)])
        self.assertAlmostEqual(np.mean(np.abs(received) ** 2), 1.0, delta=0.05)

    def test_noise_scales_with_combiner_norm(self):
        chan, c, _ = unit_channel(gain=0.0)
        geom = chan.rx_geom
        doubled = WeightVector(2 * array_response(geom, Angle(0.0, 0.0)).entries, geom.side)
        sig = TrainingSignal.evenly_spaced()
        rng = np.random.default_rng(6)
        received = np.concatenate([simulate_training(chan, c, doubled, sig, rng) for _ in range(50)])
        self.assertAlmostEqual(np.mean(np.abs(received) ** 2), 4.0, delta=0.2)

    def test_same_seed_same_noise(self):
        chan, c, d = unit_channel()
        sig = TrainingSignal.evenly_spaced()
        first = simulate_training(chan, c, d, sig, np.random.default_rng(7))
        second = simulate_training(chan, c, d, sig, np.random.default_rng(7))
        np.testing.assert_array_equal(first, second)


class EstimateGainTests(SimpleTestCase):
    def test_noiseless_estimate_is_exact(self):
        sig = TrainingSignal.evenly_spaced(2048, 341)
        estimate = estimate_gain((0.5 + 0.2j) * sig.pilot_symbols, sig)
        self.assertAlmostEqual(estimate.value, 0.5 + 0.2j, places=12)
        self.assertEqual(estimate.num_pilots_used, 341)
        self.assertAlmostEqual(abs(estimate), abs(0.5 + 0.2j), places=12)

    def test_handles_arbitrary_unit_pilots(self):
        phases = np.linspace(0, 2 * math.pi, 12, endpoint=False)
        sig = TrainingSignal(48, tuple(range(0, 48, 4)), np.exp(1j * phases))
        estimate = estimate_gain((-0.3 + 0.9j) * sig.pilot_symbols, sig)
        self.assertAlmostEqual(estimate.value, -0.3 + 0.9j, places=12)

    def test_unbiased_with_known_variance(self):
        chan, c, d = unit_channel(gain=1.0)
        sig = TrainingSignal.evenly_spaced(2048, 341)
        rng = np.random.default_rng(8)
        estimates = np.array([estimate_gain(simulate_training(chan, c, d, sig, rng), sig).value
                              for _ in range(10_000)])
        self.assertLessEqual(abs(np.mean(estimates) - 1.0), 0.01)
        self.assertAlmostEqual(np.mean(np.abs(estimates - 1.0) ** 2) * 341, 1.0, delta=0.1)

    def test_empty_and_mismatched_inputs(self):
        sig = TrainingSignal.evenly_spaced(64, 8)
        with self.assertRaises(EstimationError):
            estimate_gain([], sig)
        with self.assertRaises(EstimationError):
            estimate_gain(np.ones(7), sig)


class LinkBudgetTests(SimpleTestCase):
    def test_aligned_snr_gain(self):
        g = aligned_snr_gain(5.0)
        self.assertAlmostEqual(10 * math.log10(g ** 2), 5.0, places=12)
        self.assertAlmostEqual(aligned_snr_gain(5.0, noise_var=2.0) ** 2, 2 * 10 ** 0.5, places=12)

    def test_nlos_path_is_rejected_by_los_beams(self):
        q = QuantizerConfig(4)
        nlos = PathParams(aligned_snr_gain(-8.0), Angle(0.9, -0.3), Angle(0.6, -0.5))
        chan = ChannelSnapshot((nlos,), BS, MS)
        eta = combined_gain(quantized_response(MS, LOS_AOA, q), quantized_response(BS, LOS_AOD, q), chan)
        self.assertLessEqual(abs(eta) ** 2, 1e-4)


class TrainingSessionTests(SimpleTestCase):
    def test_counts_every_measurement(self):
        chan, c, d = unit_channel(gain=0.7)
        session = TrainingSession(chan, c, TrainingSignal.evenly_spaced(64, 8).noiseless(), np.random.default_rng(0))
        for _ in range(3):
            estimate = session.measure(d)
        self.assertEqual(session.trainings, 3)
        self.assertIsInstance(estimate, GainEstimate)
        self.assertAlmostEqual(estimate.value, 0.7, places=12)
