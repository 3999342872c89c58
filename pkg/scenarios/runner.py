"""Rotating-handset scenarios: trajectory, block schedule and throughput traces.

Every channel block of length T opens with an MS beam alignment against the
channel frozen at the block start; the BS keeps its initial weights. The
throughput is then sampled on a finer grid while the AoA keeps rotating
under the frozen MS weights, which produces the sawtooth traces.
"""
from __future__ import annotations

import hashlib
import logging
import math
import multiprocessing
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from core.arrays import Angle, QuantizerConfig, UpaGeometry, WeightVector, combined_gain, quantized_response
from core.baselines import Codebook, NineBeamConfig, build_codebook, nine_beam_align, select_codeword
from core.channel import ChannelSnapshot, PathParams, TrainingSession, TrainingSignal, aligned_snr_gain
from core.exceptions import InvalidAngleError, ScenarioExhaustedError
from core.tracker import TrackerConfig, TrackerState, tracking_step
from core.virtual import VirtualAngle, to_virtual

logger = logging.getLogger(__name__)

METHODS = ('beampattern', 'codebook', 'perturbation')
TRAINING_BUDGETS = {'beampattern': 5, 'codebook': 128, 'perturbation': 9}
# Float slack when mapping sample times onto block indices.
TIME_EPSILON = 1e-9

LOS_AOD = Angle(0.1244, -0.1235)
LOS_AOA = Angle(-0.7483, 0.1235)
NLOS_AOD = Angle(0.9, -0.3)
NLOS_AOA = Angle(0.6, -0.5)


def default_paths(los_snr_db: float = 5.0, nlos_snr_db: float = -8.0, noise_var: float = 1.0,
                  include_nlos: bool = True, los_aod: Angle = LOS_AOD, los_aoa: Angle = LOS_AOA,
                  nlos_aod: Angle = NLOS_AOD, nlos_aoa: Angle = NLOS_AOA) -> tuple[PathParams, ...]:
    """LOS path (phase 0) and optional NLOS path, gains set by their aligned SNRs."""
    paths = [PathParams(complex(aligned_snr_gain(los_snr_db, noise_var)), los_aod, los_aoa)]
    if include_nlos:
        paths.append(PathParams(complex(aligned_snr_gain(nlos_snr_db, noise_var)), nlos_aod, nlos_aoa))
    return tuple(paths)


@dataclass(frozen=True)
class ScenarioConfig:
    bs_geom: UpaGeometry = UpaGeometry(16, 0.5)
    ms_geom: UpaGeometry = UpaGeometry(8, 0.5)
    quant: QuantizerConfig = QuantizerConfig(4)
    block_period_s: float = 0.01
    duration_s: float = 0.1
    angular_speed_deg_s: float = 100.0
    sample_interval_s: float = 0.001
    training: TrainingSignal = field(default_factory=TrainingSignal.evenly_spaced)
    paths: tuple[PathParams, ...] = field(default_factory=default_paths)
    method: str = 'beampattern'
    seed: int = 0
    estimation_noise: bool = True
    randomize_nlos_phase: bool = True
    perturbation_step: float = 0.7
    pattern_fit: bool = True
    nine_beam_step: float = 0.22
    codebook_az: int = 16
    codebook_el: int = 8
    carrier_hz: float = 73e9
    bandwidth_hz: float = 2.5e9

    def __post_init__(self):
        if not self.block_period_s > 0:
            raise ValueError("block_period_s must be positive")
        if not self.duration_s >= 0:
            raise ValueError("duration_s must be nonnegative")
        if not 0 < self.sample_interval_s <= self.block_period_s:
            raise ValueError("sample_interval_s must be positive and no longer than block_period_s")
        if self.angular_speed_deg_s < 0:
            raise ValueError("angular_speed_deg_s must be nonnegative")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {', '.join(METHODS)}, got {self.method!r}")
        if not self.paths:
            raise ValueError("a scenario needs at least the tracked path")
        object.__setattr__(self, 'paths', tuple(self.paths))

    @property
    def noise_var(self) -> float:
        return self.training.noise_var

    @property
    def angular_speed_rad_s(self) -> float:
        return math.radians(self.angular_speed_deg_s)

    @property
    def num_blocks(self) -> int:
        return max(1, math.ceil(self.duration_s / self.block_period_s - TIME_EPSILON))

    @property
    def num_samples(self) -> int:
        return int(math.floor(self.duration_s / self.sample_interval_s + TIME_EPSILON)) + 1

    @property
    def key(self) -> tuple[str, float, int]:
        return self.method, self.angular_speed_deg_s, self.seed


@dataclass(frozen=True)
class ThroughputSample:
    t_s: float
    throughput_bps_hz: float
    beam_virtual: VirtualAngle
    aoa_virtual: VirtualAngle
    block_index: int


@dataclass(frozen=True)
class ScenarioSummary:
    method: str
    speed_deg_s: float
    seed: int
    upper_bound: float
    mean_post_update_tput: float
    min_tput: float
    frac_above_90pct: float
    trainings_used: int
    block_errors: tuple[float, ...]


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    samples: list[ThroughputSample] = field(default_factory=list)
    summary: Optional[ScenarioSummary] = None
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None


def stream_seed(seed: int, method: str, speed: float) -> int:
    """Seed of a scenario's random stream: first 8 bytes of sha256("seed|method|speed")."""
    digest = hashlib.sha256(f'{int(seed)}|{method}|{float(speed)!r}'.encode()).digest()
    return int.from_bytes(digest[:8], 'big')


def rotate(angle: Angle, delta_azimuth: float) -> Angle:
    return Angle(angle.azimuth + delta_azimuth, angle.elevation)


def aoa_at(config: ScenarioConfig, t: float) -> Angle:
    """AoA of the tracked path at time t; azimuth turns at omega, elevation is fixed."""
    if t < -TIME_EPSILON or t > config.duration_s + TIME_EPSILON:
        raise ScenarioExhaustedError(f"t = {t!r} lies outside [0, {config.duration_s}]")
    try:
        return rotate(config.paths[0].aoa, config.angular_speed_rad_s * t)
    except InvalidAngleError as exc:
        raise ScenarioExhaustedError(f"the tracked AoA leaves the front hemisphere at t = {t!r}") from exc


def channel_at(config: ScenarioConfig, paths: tuple[PathParams, ...], t: float) -> ChannelSnapshot:
    """Snapshot at time t; untracked paths rotated behind the array drop out."""
    tracked = replace(paths[0], aoa=aoa_at(config, t))
    visible = [tracked]
    turn = config.angular_speed_rad_s * t
    for path in paths[1:]:
        try:
            visible.append(replace(path, aoa=rotate(path.aoa, turn)))
        except InvalidAngleError:
            continue
    return ChannelSnapshot(tuple(visible), config.bs_geom, config.ms_geom)


def throughput(chan: ChannelSnapshot, tx_w: WeightVector, rx_w: WeightVector, noise_var: float) -> float:
    """log2(1 + |d^H H c|^2 / sigma^2)."""
    if not noise_var > 0:
        raise ValueError("noise_var must be positive")
    return math.log2(1 + abs(combined_gain(rx_w, tx_w, chan)) ** 2 / noise_var)


def upper_bound(config: ScenarioConfig) -> float:
    """Throughput of perfect unquantized alignment on the tracked path."""
    return math.log2(1 + abs(config.paths[0].gain) ** 2 / config.noise_var)


class Aligner:
    """One alignment method's running beam and its per-block update."""
    budget = 0

    def __init__(self, config: ScenarioConfig):
        self.config = config
        self.tracker_cfg = TrackerConfig(config.ms_geom, config.quant, config.perturbation_step, config.pattern_fit)
        self.state = TrackerState.aligned(config.ms_geom, config.paths[0].aoa, config.quant)

    @property
    def weights(self) -> WeightVector:
        return self.state.weights

    @property
    def beam_virtual(self) -> VirtualAngle:
        return self.state.beam_virtual

    def align(self, session: TrainingSession):
        raise NotImplementedError


class BeampatternAligner(Aligner):
    budget = TRAINING_BUDGETS['beampattern']

    def align(self, session):
        self.state = tracking_step(self.state, session, self.tracker_cfg)


class PerturbationAligner(Aligner):
    budget = TRAINING_BUDGETS['perturbation']

    def __init__(self, config):
        super().__init__(config)
        self.nine_beam = NineBeamConfig(config.nine_beam_step)

    def align(self, session):
        self.state = nine_beam_align(self.nine_beam, self.state, session, self.tracker_cfg)


class CodebookAligner(Aligner):
    budget = TRAINING_BUDGETS['codebook']

    def __init__(self, config, codebook: Optional[Codebook] = None):
        super().__init__(config)
        self.codebook = codebook or build_codebook(config.ms_geom, config.quant, config.codebook_az,
                                                   config.codebook_el)
        self._weights = self.state.weights
        self._focus = self.state.beam_virtual

    @property
    def weights(self):
        return self._weights

    @property
    def beam_virtual(self):
        return self._focus

    def align(self, session):
        choice = select_codeword(self.codebook, session)
        self._weights, self._focus = choice.weights, choice.focus_virtual


ALIGNERS = {
    'beampattern': BeampatternAligner,
    'codebook': CodebookAligner,
    'perturbation': PerturbationAligner,
}


def block_of(config: ScenarioConfig, t: float) -> int:
    return min(int(math.floor(t / config.block_period_s + TIME_EPSILON)), config.num_blocks - 1)


def _randomized_paths(config: ScenarioConfig, rng: np.random.Generator) -> tuple[PathParams, ...]:
    paths = list(config.paths)
    if config.randomize_nlos_phase:
        for k in range(1, len(paths)):
            phase = rng.uniform(0.0, 2 * math.pi)
            paths[k] = replace(paths[k], gain=abs(paths[k].gain) * complex(math.cos(phase), math.sin(phase)))
    return tuple(paths)


def run_scenario(config: ScenarioConfig) -> ScenarioResult:
    """Simulate one scenario; identical configs give identical traces."""
    rng = np.random.default_rng(stream_seed(config.seed, config.method, config.angular_speed_deg_s))
    paths = _randomized_paths(config, rng)
    signal = config.training if config.estimation_noise else config.training.noiseless()
    tx_weights = quantized_response(config.bs_geom, paths[0].aod, config.quant)
    aligner = ALIGNERS[config.method](config)
    bound = upper_bound(config)
    logger.info("scenario %s at %g deg/s, seed %d: %d blocks",
                config.method, config.angular_speed_deg_s, config.seed, config.num_blocks)

    samples, post_update, block_errors = [], [], []
    trainings, current_block = 0, -1
    for k in range(config.num_samples):
        t = k * config.sample_interval_s
        block = block_of(config, t)
        if block != current_block:
            block_start = block * config.block_period_s
            session = TrainingSession(channel_at(config, paths, block_start), tx_weights, signal, rng)
            aligner.align(session)
            trainings += session.trainings
            current_block = block
        chan = channel_at(config, paths, t)
        aoa_virtual = to_virtual(config.ms_geom, chan.tracked.aoa)
        value = throughput(chan, tx_weights, aligner.weights, config.noise_var)
        if len(post_update) == block:
            post_update.append(value)
            block_errors.append((aligner.beam_virtual - aoa_virtual).radius)
        samples.append(ThroughputSample(t, value, aligner.beam_virtual, aoa_virtual, block))

    values = np.array([s.throughput_bps_hz for s in samples])
    summary = ScenarioSummary(
        method=config.method,
        speed_deg_s=config.angular_speed_deg_s,
        seed=config.seed,
        upper_bound=bound,
        mean_post_update_tput=float(np.mean(post_update)),
        min_tput=float(values.min()),
        frac_above_90pct=float(np.mean(values >= 0.9 * bound)),
        trainings_used=trainings,
        block_errors=tuple(block_errors),
    )
    logger.info("scenario %s at %g deg/s, seed %d done: mean post-update %.4f bits/s/Hz",
                config.method, config.angular_speed_deg_s, config.seed, summary.mean_post_update_tput)
    return ScenarioResult(config, samples, summary)


def _run_guarded(config: ScenarioConfig) -> ScenarioResult:
    try:
        return run_scenario(config)
    except Exception as exc:
        logger.exception("scenario %s failed", config.key)
        return ScenarioResult(config, error=f"{type(exc).__name__}: {exc}")


def run_batch(configs, workers: int = 1) -> list[ScenarioResult]:
    """Run every scenario, in a process pool when workers > 1; sorted by key."""
    configs = list(configs)
    if workers > 1 and len(configs) > 1:
        with multiprocessing.Pool(processes=min(workers, len(configs))) as pool:
            results = pool.map(_run_guarded, configs)
    else:
        results = [_run_guarded(c) for c in configs]
    return sorted(results, key=lambda r: r.config.key)


def average_traces(results) -> list[ThroughputSample]:
    """Seed-averaged trace of results that share method, speed and timeline."""
    results = [r for r in results if r.ok]
    if not results:
        return []
    lengths = {len(r.samples) for r in results}
    if len(lengths) != 1:
        raise ValueError("cannot average traces of different lengths")
    averaged = []
    for column in zip(*(r.samples for r in results)):
        first = column[0]
        averaged.append(ThroughputSample(
            first.t_s,
            float(np.mean([s.throughput_bps_hz for s in column])),
            VirtualAngle(float(np.mean([s.beam_virtual.psi_x for s in column])),
                         float(np.mean([s.beam_virtual.psi_y for s in column]))),
            first.aoa_virtual,
            first.block_index,
        ))
    return averaged
