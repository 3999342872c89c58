"""Beampattern-based AoA tracking at the mobile station.

Each alignment spends five trainings: the current beam plus four probes
shifted by +-step in virtual azimuth and elevation. The ratio of a probe's
gain to the current beam's gain depends only on the virtual offset between
beam and arrival, so inverting that ratio gives the offset directly. That
estimate is then refined by fitting all five gains to the quantized patterns
the MS actually trained with.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import bisect, least_squares

from core.arrays import Angle, QuantizerConfig, UpaGeometry, WeightVector, quantized_response
from core.channel import GainEstimate, TrainingSession
from core.exceptions import InvalidStateError, SingularRatioError, SolverError
from core.virtual import (
    VirtualAngle, from_virtual, iota, is_feasible, project_to_feasible, to_virtual, virtual_response,
    weights_from_virtual,
)

logger = logging.getLogger(__name__)

DEFAULT_STEP = 0.7
MAX_HALVINGS = 6
SOLVER_XTOL = 1e-12
SOLVER_MAXITER = 64
TRAININGS_PER_STEP = 5
VANISHED_REFERENCE_RATIO = 1e12
# Probes pushed onto the disc edge can end up (almost) on the beam; their ratio says nothing.
MIN_PROBE_STEP = 1e-6
FIT_TOLERANCE = 1e-12


@dataclass(frozen=True)
class TrackerConfig:
    ms_geom: UpaGeometry
    quant: QuantizerConfig = QuantizerConfig()
    step: float = DEFAULT_STEP
    pattern_fit: bool = True

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError(f"perturbation step must be positive, got {self.step!r}")


@dataclass(frozen=True)
class TrackerState:
    """Beam the MS currently uses, after ``block_index`` alignments."""
    beam_angle: Angle
    beam_virtual: VirtualAngle
    weights: WeightVector
    block_index: int = 0

    @classmethod
    def aligned(cls, geom: UpaGeometry, angle: Angle, q: QuantizerConfig, block_index: int = 0) -> TrackerState:
        return cls(angle, to_virtual(geom, angle), quantized_response(geom, angle, q), block_index)

    @classmethod
    def from_virtual_angle(cls, geom: UpaGeometry, psi: VirtualAngle, q: QuantizerConfig,
                           block_index: int = 0) -> TrackerState:
        angle = from_virtual(geom, psi)
        return cls(angle, psi, quantized_response(geom, angle, q), block_index)


@dataclass(frozen=True)
class PerturbationSet:
    """Four probes: +x, -x, +y, -y around the current beam.

    ``deltas`` hold the offset each probe really has from the beam, which
    differs from the nominal step when a probe had to be projected.
    """
    deltas: tuple[VirtualAngle, ...]
    perturbed_virtual: tuple[VirtualAngle, ...]
    perturbed_weights: tuple[WeightVector, ...]

    def step_of(self, n: int) -> float:
        """Signed offset of probe ``n`` along its own axis."""
        delta = self.deltas[n]
        return delta.psi_x if n < 2 else delta.psi_y


@dataclass(frozen=True)
class RatioObservation:
    original_gain: GainEstimate
    perturbed_gains: tuple[GainEstimate, ...]
    ratios: tuple[float, ...]

    @classmethod
    def from_gains(cls, original: GainEstimate, perturbed) -> RatioObservation:
        perturbed = tuple(perturbed)
        reference = abs(original.value)
        if reference == 0.0:
            # a vanished reference makes any live probe look arbitrarily better; the solver clamps
            ratios = tuple(VANISHED_REFERENCE_RATIO if abs(g.value) > 0 else 1.0 for g in perturbed)
        else:
            ratios = tuple(abs(g.value) / reference for g in perturbed)
        return cls(original, perturbed, ratios)


def _axis_delta(n: int, magnitude: float) -> VirtualAngle:
    sign = 1.0 if n % 2 == 0 else -1.0
    return VirtualAngle(sign * magnitude, 0.0) if n < 2 else VirtualAngle(0.0, sign * magnitude)


def design_perturbations(state: TrackerState, step: float, geom: UpaGeometry,
                         q: QuantizerConfig) -> PerturbationSet:
    """Build the four probes, halving any that would leave the virtual disc."""
    if not step > 0:
        raise ValueError(f"perturbation step must be positive, got {step!r}")
    if not is_feasible(geom, state.beam_virtual):
        raise InvalidStateError(f"current beam {state.beam_virtual!r} is outside the virtual disc")
    deltas, probes, weights = [], [], []
    for n in range(4):
        magnitude = step
        delta = _axis_delta(n, magnitude)
        for _ in range(MAX_HALVINGS):
            if is_feasible(geom, state.beam_virtual + delta):
                break
            magnitude /= 2
            delta = _axis_delta(n, magnitude)
        probe = project_to_feasible(geom, state.beam_virtual + delta)
        if probe != state.beam_virtual + delta:
            delta = probe - state.beam_virtual
        deltas.append(delta)
        probes.append(probe)
        weights.append(weights_from_virtual(geom, probe, q))
    return PerturbationSet(tuple(deltas), tuple(probes), tuple(weights))


def gain_ratio_equation(gamma: float, delta: float, n: int) -> float:
    """Noiseless probe-to-beam gain ratio iota(gamma + delta) / iota(gamma)."""
    reference = iota(gamma, n)
    if reference == 0.0:
        raise SingularRatioError(f"iota({gamma!r}, {n}) vanishes")
    return iota(gamma + delta, n) / reference


def solver_interval(delta: float) -> tuple[float, float]:
    return -math.pi + abs(delta), math.pi - abs(delta)


def solve_offset(ratio: float, delta: float, n: int) -> float:
    """Offset gamma whose noiseless ratio equals ``ratio``.

    The ratio is monotone in gamma on the solver interval, so bisection is
    exact up to SOLVER_XTOL. Ratios outside the attainable range return the
    endpoint with the smaller residual.
    """
    if not math.isfinite(ratio):
        raise SolverError(f"ratio must be a number, got {ratio!r}")
    if ratio < 0:
        raise SolverError(f"ratio must be nonnegative, got {ratio!r}")
    if delta == 0:
        raise SolverError("perturbation step must be nonzero")
    lower, upper = solver_interval(delta)

    def residual(gamma):
        return gain_ratio_equation(gamma, delta, n) - ratio

    at_lower, at_upper = residual(lower), residual(upper)
    if at_lower == 0.0:
        return lower
    if at_upper == 0.0:
        return upper
    if (at_lower > 0) == (at_upper > 0):
        return lower if abs(at_lower) < abs(at_upper) else upper
    return bisect(residual, lower, upper, xtol=SOLVER_XTOL, maxiter=SOLVER_MAXITER)


def estimate_virtual_offset(obs: RatioObservation, pert: PerturbationSet, n_side: int) -> VirtualAngle:
    """Per axis, invert the ratio of the stronger probe (ties go to the + probe)."""
    offsets = []
    for first in (0, 2):
        pair = [n for n in (first, first + 1) if abs(pert.step_of(n)) >= MIN_PROBE_STEP]
        if not pair:
            offsets.append(0.0)
            continue
        chosen = max(pair, key=lambda n: (abs(obs.perturbed_gains[n].value), n == first))
        offsets.append(solve_offset(obs.ratios[chosen], pert.step_of(chosen), n_side))
    return VirtualAngle(*offsets)


def fit_pattern_offset(state: TrackerState, pert: PerturbationSet, obs: RatioObservation,
                       cfg: TrackerConfig, initial: VirtualAngle) -> VirtualAngle:
    """Refine an offset estimate against the beams the MS actually trained with.

    The ratio equation assumes unquantized patterns, so with coarse phase
    shifters it is off by up to a tenth of a virtual unit. Here the five
    measured magnitudes are fitted to A * |w^H a(psi)| for the quantized beam
    and probes, over the arrival psi and the amplitude A, starting from
    ``initial``. A fit that fails, or ends more than two probe steps away
    from ``initial``, is discarded.
    """
    measured = np.array([abs(obs.original_gain.value)] + [abs(g.value) for g in obs.perturbed_gains])
    rows = np.array([state.weights.entries] + [w.entries for w in pert.perturbed_weights]).conj()

    def patterns(x):
        return np.abs(rows @ virtual_response(cfg.ms_geom, VirtualAngle(x[0], x[1])).entries)

    start = state.beam_virtual - initial
    reference = patterns((start.psi_x, start.psi_y))
    if measured[0] == 0.0 or reference[0] == 0.0:
        return initial
    x0 = np.array([start.psi_x, start.psi_y, measured[0] / reference[0]])
    fit = least_squares(lambda x: x[2] * patterns(x) - measured, x0, method='lm',
                        xtol=FIT_TOLERANCE, ftol=FIT_TOLERANCE)
    if not fit.success or not np.all(np.isfinite(fit.x)):
        logger.debug("block %d: pattern fit failed (%s)", state.block_index, fit.message)
        return initial
    offset = state.beam_virtual - VirtualAngle(float(fit.x[0]), float(fit.x[1]))
    if max(abs(offset.psi_x - initial.psi_x), abs(offset.psi_y - initial.psi_y)) > 2 * cfg.step:
        return initial
    return offset


def tracking_step(state: TrackerState, session: TrainingSession, cfg: TrackerConfig) -> TrackerState:
    """One MS beam alignment: five trainings, then re-steer toward the AoA estimate."""
    original = session.measure(state.weights)
    pert = design_perturbations(state, cfg.step, cfg.ms_geom, cfg.quant)
    perturbed = [session.measure(w) for w in pert.perturbed_weights]
    obs = RatioObservation.from_gains(original, perturbed)
    offset = estimate_virtual_offset(obs, pert, cfg.ms_geom.side)
    if cfg.pattern_fit:
        offset = fit_pattern_offset(state, pert, obs, cfg, offset)
    target = project_to_feasible(cfg.ms_geom, state.beam_virtual - offset)
    logger.debug(
        "block %d: ratios %s, offset (%.4f, %.4f), beam -> (%.4f, %.4f)",
        state.block_index, ', '.join(f'{r:.4f}' for r in obs.ratios),
        offset.psi_x, offset.psi_y, target.psi_x, target.psi_y,
    )
    return TrackerState.from_virtual_angle(cfg.ms_geom, target, cfg.quant, state.block_index + 1)
