import math
from unittest import mock

import numpy as np
from django.test import SimpleTestCase

from core import channel
from core.arrays import Angle, QuantizerConfig, UpaGeometry, quantized_response
from core.channel import ChannelSnapshot, GainEstimate, PathParams, TrainingSession, TrainingSignal, aligned_snr_gain
from core.exceptions import InvalidStateError, SolverError
from core.tracker import (
    RatioObservation, TrackerConfig, TrackerState, VANISHED_REFERENCE_RATIO, design_perturbations,
    estimate_virtual_offset, fit_pattern_offset, gain_ratio_equation, solve_offset, solver_interval, tracking_step,
)
from core.virtual import VirtualAngle, from_virtual, iota, is_feasible, to_virtual, virtual_response

BS = UpaGeometry(16, 0.5)
MS = UpaGeometry(8, 0.5)
LOS_AOD = Angle(0.1244, -0.1235)
LOS_AOA = Angle(-0.7483, 0.1235)
EDGE = 4 * math.pi


def session_for(arrival: VirtualAngle, q: QuantizerConfig, noisy=False, seed=0):
    chan = ChannelSnapshot((PathParams(aligned_snr_gain(5.0), LOS_AOD, from_virtual(MS, arrival)),), BS, MS)
    signal = TrainingSignal.evenly_spaced()
    return TrainingSession(
        chan, quantized_response(BS, LOS_AOD, q), signal if noisy else signal.noiseless(), np.random.default_rng(seed),
    )


def track_once(offset: VirtualAngle, bits: int, pattern_fit=True):
    """One noiseless alignment from a beam ``offset`` away from the arrival."""
    q = QuantizerConfig(bits)
    beam = to_virtual(MS, LOS_AOA)
    arrival = beam - offset
    state = TrackerState.from_virtual_angle(MS, beam, q)
    new = tracking_step(state, session_for(arrival, q), TrackerConfig(MS, q, pattern_fit=pattern_fit))
    return new, arrival


class DesignPerturbationsTests(SimpleTestCase):
    def test_probes_at_broadside(self):
        q = QuantizerConfig(4)
        state = TrackerState.aligned(MS, Angle(0.0, 0.0), q)
        pert = design_perturbations(state, 0.7, MS, q)
        expected = [VirtualAngle(0.7, 0.0), VirtualAngle(-0.7, 0.0), VirtualAngle(0.0, 0.7), VirtualAngle(0.0, -0.7)]
        self.assertEqual(list(pert.deltas), expected)
        self.assertEqual(list(pert.perturbed_virtual), expected)
        self.assertEqual([pert.step_of(n) for n in range(4)], [0.7, -0.7, 0.7, -0.7])
        self.assertTrue(all(w.quant_bits == 4 for w in pert.perturbed_weights))

    def test_probe_is_halved_near_the_edge(self):
        q = QuantizerConfig(4)
        state = TrackerState.from_virtual_angle(MS, VirtualAngle(EDGE - 0.5, 0.0), q)
        pert = design_perturbations(state, 0.7, MS, q)
        self.assertEqual(pert.step_of(0), 0.35)
        self.assertEqual([pert.step_of(n) for n in range(1, 4)], [-0.7, 0.7, -0.7])

    def test_probes_stay_feasible_on_the_edge(self):
        q = QuantizerConfig(4)
        state = TrackerState.from_virtual_angle(MS, VirtualAngle(EDGE, 0.0), q)
        pert = design_perturbations(state, 0.7, MS, q)
        self.assertTrue(all(is_feasible(MS, psi) for psi in pert.perturbed_virtual))
        # the +x probe is pulled back onto the beam, the y probes slide along the rim
        self.assertAlmostEqual(pert.step_of(0), 0.0, places=9)
        self.assertEqual(pert.step_of(1), -0.7)
        self.assertAlmostEqual(pert.step_of(2), 0.7 / 64, places=6)
        for delta, probe in zip(pert.deltas, pert.perturbed_virtual):
            self.assertAlmostEqual(state.beam_virtual.psi_x + delta.psi_x, probe.psi_x, places=12)
            self.assertAlmostEqual(state.beam_virtual.psi_y + delta.psi_y, probe.psi_y, places=12)

    def test_tracks_from_the_edge(self):
        q = QuantizerConfig(16)
        beam = VirtualAngle(EDGE, 0.0)
        arrival = beam - VirtualAngle(0.3, 0.0)
        state = TrackerState.from_virtual_angle(MS, beam, q)
        new = tracking_step(state, session_for(arrival, q), TrackerConfig(MS, q))
        self.assertAlmostEqual(new.beam_virtual.psi_x, arrival.psi_x, delta=1e-3)
        self.assertAlmostEqual(new.beam_virtual.psi_y, arrival.psi_y, delta=1e-3)
        # ratios alone: the y probes only slide 0.011 along the rim, so that axis is coarser
        new = tracking_step(state, session_for(arrival, q), TrackerConfig(MS, q, pattern_fit=False))
        self.assertAlmostEqual(new.beam_virtual.psi_x, arrival.psi_x, delta=1e-3)
        self.assertAlmostEqual(new.beam_virtual.psi_y, arrival.psi_y, delta=0.01)

    def test_invalid_step(self):
        q = QuantizerConfig(4)
        state = TrackerState.aligned(MS, Angle(0.0, 0.0), q)
        with self.assertRaises(ValueError):
            design_perturbations(state, 0.0, MS, q)
        with self.assertRaises(ValueError):
            TrackerConfig(MS, q, step=-0.1)

    def test_beam_outside_disc(self):
        q = QuantizerConfig(4)
        weights = quantized_response(MS, Angle(0.0, 0.0), q)
        state = TrackerState(Angle(0.0, 0.0), VirtualAngle(13.0, 0.0), weights)
        with self.assertRaises(InvalidStateError):
            design_perturbations(state, 0.7, MS, q)


class GainRatioTests(SimpleTestCase):
    def test_known_values(self):
        self.assertAlmostEqual(gain_ratio_equation(0.0, 0.7, 8), iota(0.7, 8), places=12)
        self.assertAlmostEqual(gain_ratio_equation(-0.35, 0.7, 8), 1.0, places=12)
        self.assertAlmostEqual(gain_ratio_equation(1.0, 0.7, 8), 0.6967, places=3)

    def test_monotone_on_solver_interval(self):
        for delta in (0.7, -0.7, 0.35):
            lower, upper = solver_interval(delta)
            gammas = np.linspace(lower + 1e-3, upper - 1e-3, 1000)
            values = np.array([gain_ratio_equation(g, delta, 8) for g in gammas])
            steps = np.diff(values)
            if delta > 0:
                self.assertTrue(np.all(steps < 0))
            else:
                self.assertTrue(np.all(steps > 0))


class SolveOffsetTests(SimpleTestCase):
    def test_known_values(self):
        self.assertAlmostEqual(solve_offset(iota(0.7, 8), 0.7, 8), 0.0, places=9)
        self.assertAlmostEqual(solve_offset(1.0, 0.7, 8), -0.35, places=9)
        self.assertAlmostEqual(solve_offset(gain_ratio_equation(1.0, 0.7, 8), 0.7, 8), 1.0, places=9)

    def test_inverts_the_ratio(self):
        rng = np.random.default_rng(9)
        for gamma in rng.uniform(-2.4, 2.4, 1000):
            for delta in (0.7, -0.7):
                ratio = gain_ratio_equation(gamma, delta, 8)
                self.assertAlmostEqual(solve_offset(ratio, delta, 8), gamma, delta=1e-6)

    def test_unreachable_ratio_is_clamped(self):
        lower, upper = solver_interval(0.7)
        self.assertEqual(solve_offset(10.0, 0.7, 8), lower)
        self.assertAlmostEqual(solve_offset(0.0, 0.7, 8), upper, places=9)
        for ratio in (10.0, 0.0):
            gamma = solve_offset(ratio, 0.7, 8)
            other = upper if abs(gamma - lower) < 1e-9 else lower
            self.assertLessEqual(
                abs(gain_ratio_equation(gamma, 0.7, 8) - ratio), abs(gain_ratio_equation(other, 0.7, 8) - ratio),
            )

    def test_invalid_inputs(self):
        for ratio in (math.nan, math.inf, -0.1):
            with self.assertRaises(SolverError):
                solve_offset(ratio, 0.7, 8)
        with self.assertRaises(SolverError):
            solve_offset(1.0, 0.0, 8)


class EstimateOffsetTests(SimpleTestCase):
    def setUp(self):
        q = QuantizerConfig(4)
        self.pert = design_perturbations(TrackerState.aligned(MS, Angle(0.0, 0.0), q), 0.7, MS, q)

    def test_ties_pick_the_positive_probe(self):
        gains = [GainEstimate(1.0, 341)] * 4
        obs = RatioObservation.from_gains(GainEstimate(1.0, 341), gains)
        offset = estimate_virtual_offset(obs, self.pert, 8)
        self.assertAlmostEqual(offset.psi_x, -0.35, places=9)
        self.assertAlmostEqual(offset.psi_y, -0.35, places=9)

    def test_probe_in_a_null_is_ignored(self):
        gains = [GainEstimate(g, 341) for g in (0.0, 0.5, 0.9, 0.3)]
        obs = RatioObservation.from_gains(GainEstimate(1.0, 341), gains)
        offset = estimate_virtual_offset(obs, self.pert, 8)
        self.assertEqual(offset.psi_x, solve_offset(0.5, -0.7, 8))
        self.assertEqual(offset.psi_y, solve_offset(0.9, 0.7, 8))

    def test_vanished_reference(self):
        gains = [GainEstimate(g, 341) for g in (0.0, 0.2, 0.0, 0.0)]
        obs = RatioObservation.from_gains(GainEstimate(0.0, 341), gains)
        self.assertEqual(obs.ratios, (1.0, VANISHED_REFERENCE_RATIO, 1.0, 1.0))
        offset = estimate_virtual_offset(obs, self.pert, 8)
        self.assertEqual(offset.psi_x, solver_interval(0.7)[1])

    def test_collapsed_probe_is_skipped(self):
        q = QuantizerConfig(4)
        pert = design_perturbations(TrackerState.from_virtual_angle(MS, VirtualAngle(EDGE, 0.0), q), 0.7, MS, q)
        gains = [GainEstimate(g, 341) for g in (1.0, 0.8, 0.9, 0.9)]
        obs = RatioObservation.from_gains(GainEstimate(1.0, 341), gains)
        offset = estimate_virtual_offset(obs, pert, 8)
        self.assertEqual(offset.psi_x, solve_offset(0.8, -0.7, 8))


class PatternFitTests(SimpleTestCase):
    def setUp(self):
        self.q = QuantizerConfig(4)
        self.beam = to_virtual(MS, LOS_AOA)
        self.state = TrackerState.from_virtual_angle(MS, self.beam, self.q)
        self.pert = design_perturbations(self.state, 0.7, MS, self.q)

    def observe(self, arrival, scale=1.0):
        a = virtual_response(MS, arrival).entries
        original = GainEstimate(complex(scale * np.vdot(self.state.weights.entries, a)), 341)
        perturbed = [GainEstimate(complex(scale * np.vdot(w.entries, a)), 341) for w in self.pert.perturbed_weights]
        return RatioObservation.from_gains(original, perturbed)

    def test_recovers_the_offset_from_quantized_patterns(self):
        truth = VirtualAngle(0.9, -0.6)
        obs = self.observe(self.beam - truth, scale=2.5j)
        rough = estimate_virtual_offset(obs, self.pert, 8)
        fitted = fit_pattern_offset(self.state, self.pert, obs, TrackerConfig(MS, self.q), rough)
        self.assertAlmostEqual(fitted.psi_x, truth.psi_x, delta=1e-6)
        self.assertAlmostEqual(fitted.psi_y, truth.psi_y, delta=1e-6)

    def test_keeps_the_estimate_without_a_reference(self):
        gains = [GainEstimate(g, 341) for g in (0.0, 0.2, 0.0, 0.0)]
        obs = RatioObservation.from_gains(GainEstimate(0.0, 341), gains)
        initial = VirtualAngle(0.3, -0.2)
        self.assertEqual(fit_pattern_offset(self.state, self.pert, obs, TrackerConfig(MS, self.q), initial), initial)


class TrackingStepTests(SimpleTestCase):
    def test_noiseless_step_lands_on_the_arrival(self):
        new, arrival = track_once(VirtualAngle(1.0, -0.5), bits=16)
        self.assertAlmostEqual(new.beam_virtual.psi_x, arrival.psi_x, delta=1e-3)
        self.assertAlmostEqual(new.beam_virtual.psi_y, arrival.psi_y, delta=1e-3)
        self.assertEqual(new.block_index, 1)

    def test_four_bit_step_lands_on_the_arrival(self):
        new, arrival = track_once(VirtualAngle(1.0, -0.5), bits=4)
        self.assertLessEqual(abs(new.beam_virtual.psi_x - arrival.psi_x), 0.05)
        self.assertLessEqual(abs(new.beam_virtual.psi_y - arrival.psi_y), 0.05)

    def test_random_offsets(self):
        rng = np.random.default_rng(10)
        offsets = [VirtualAngle(*xy) for xy in rng.uniform(-1.4, 1.4, size=(100, 2))]
        for bits, tolerance in ((16, 1e-3), (4, 0.05)):
            for offset in offsets:
                new, arrival = track_once(offset, bits=bits)
                self.assertLessEqual(abs(new.beam_virtual.psi_x - arrival.psi_x), tolerance)
                self.assertLessEqual(abs(new.beam_virtual.psi_y - arrival.psi_y), tolerance)

    def test_ratio_inversion_alone_is_quantization_limited(self):
        rng = np.random.default_rng(10)
        offsets = [VirtualAngle(*xy) for xy in rng.uniform(-1.4, 1.4, size=(100, 2))]
        errors = []
        for offset in offsets:
            new, arrival = track_once(offset, bits=16, pattern_fit=False)
            self.assertLessEqual((new.beam_virtual - arrival).radius, 1e-3)
            new, arrival = track_once(offset, bits=4, pattern_fit=False)
            diff = new.beam_virtual - arrival
            errors.append(max(abs(diff.psi_x), abs(diff.psi_y)))
        self.assertGreater(max(errors), 0.05)
        self.assertLess(max(errors), 0.2)

    def test_azimuth_offset_leaves_elevation_alone(self):
        beam = to_virtual(MS, LOS_AOA)
        for gamma in np.linspace(-1.4, 1.4, 15):
            new, _ = track_once(VirtualAngle(gamma, 0.0), bits=4)
            self.assertLessEqual(abs(new.beam_virtual.psi_y - beam.psi_y), 0.01)
            new, _ = track_once(VirtualAngle(gamma, 0.0), bits=4, pattern_fit=False)
            self.assertLessEqual(abs(new.beam_virtual.psi_y - beam.psi_y), 0.36)

    def test_slow_drift_converges(self):
        # 5 dB aligned SNR, the arrival drifts 0.25 to 0.35 virtual units per block
        q = QuantizerConfig(4)
        cfg = TrackerConfig(MS, q)
        rng = np.random.default_rng(12)
        improved = []
        for trial in range(20):
            arrival = VirtualAngle(0.0, 0.0)
            state = TrackerState.from_virtual_angle(MS, arrival, q)
            heading = rng.uniform(0.0, 2 * math.pi)
            for block in range(10):
                drift = rng.uniform(0.25, 0.35)
                arrival = arrival + VirtualAngle(drift * math.cos(heading), drift * math.sin(heading))
                before = (state.beam_virtual - arrival).radius
                state = tracking_step(state, session_for(arrival, q, noisy=True, seed=100 * trial + block), cfg)
                improved.append((state.beam_virtual - arrival).radius <= before)
        self.assertGreaterEqual(np.mean(improved), 0.95)

    def test_aligned_beam_stays(self):
        new, arrival = track_once(VirtualAngle(0.0, 0.0), bits=16)
        self.assertAlmostEqual((new.beam_virtual - arrival).radius, 0.0, delta=1e-3)

    def test_spends_five_trainings(self):
        q = QuantizerConfig(4)
        beam = to_virtual(MS, LOS_AOA)
        session = session_for(beam - VirtualAngle(0.4, 0.2), q, noisy=True)
        state = TrackerState.from_virtual_angle(MS, beam, q)
        with mock.patch('core.channel.estimate_gain', wraps=channel.estimate_gain) as estimator:
            tracking_step(state, session, TrackerConfig(MS, q))
        self.assertEqual(estimator.call_count, 5)
        self.assertEqual(session.trainings, 5)

    def test_noisy_step_moves_toward_the_arrival(self):
        q = QuantizerConfig(4)
        beam = to_virtual(MS, LOS_AOA)
        arrival = beam - VirtualAngle(1.0, 0.0)
        errors = []
        for seed in range(20):
            state = TrackerState.from_virtual_angle(MS, beam, q)
            new = tracking_step(state, session_for(arrival, q, noisy=True, seed=seed), TrackerConfig(MS, q))
            errors.append((new.beam_virtual - arrival).radius)
        self.assertLess(np.mean(errors), 0.5)
