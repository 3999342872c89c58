"""Geometric channel, pilot reception and maximum-likelihood gain estimation."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from core.arrays import Angle, UpaGeometry, WeightVector, array_response, combined_gain
from core.exceptions import EstimationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PathParams:
    """One propagation path: complex gain g, departure and arrival angles."""
    gain: complex
    aod: Angle
    aoa: Angle


@dataclass(frozen=True)
class ChannelSnapshot:
    """H = sum_k g_k a_R(aoa_k) a_T(aod_k)^H, frozen for one training burst.

    Path 0 is the tracked path.
    """
    paths: tuple[PathParams, ...]
    tx_geom: UpaGeometry
    rx_geom: UpaGeometry

    def __post_init__(self):
        object.__setattr__(self, 'paths', tuple(self.paths))
        if not self.paths:
            raise ValueError("a channel snapshot needs at least one path")

    @property
    def tracked(self) -> PathParams:
        return self.paths[0]

    def dense_matrix(self) -> np.ndarray:
        """Explicit rx x tx channel matrix; only the reference checks need it."""
        matrix = np.zeros((self.rx_geom.num_elements, self.tx_geom.num_elements), dtype=complex)
        for path in self.paths:
            a_r = array_response(self.rx_geom, path.aoa).entries
            a_t = array_response(self.tx_geom, path.aod).entries
            matrix += path.gain * np.outer(a_r, a_t.conj())
        return matrix


@dataclass(frozen=True, eq=False)
class TrainingSignal:
    """Pilot layout of one OFDM training symbol and the receiver noise level.

    ``noise_std`` is sigma for circular complex noise of total variance sigma^2.
    """
    num_subcarriers: int
    pilot_indices: tuple[int, ...]
    pilot_symbols: np.ndarray
    noise_std: float = 1.0

    def __post_init__(self):
        indices = tuple(int(i) for i in self.pilot_indices)
        symbols = np.asarray(self.pilot_symbols, dtype=complex)
        if self.num_subcarriers < 1:
            raise ValueError("num_subcarriers must be positive")
        if len(set(indices)) != len(indices):
            raise ValueError("pilot indices must be distinct")
        if any(i < 0 or i >= self.num_subcarriers for i in indices):
            raise ValueError(f"pilot indices must lie in [0, {self.num_subcarriers})")
        if symbols.shape != (len(indices),):
            raise ValueError("need exactly one pilot symbol per pilot index")
        if not np.allclose(np.abs(symbols), 1.0):
            raise ValueError("pilot symbols must have unit magnitude")
        if self.noise_std < 0:
            raise ValueError("noise_std must be nonnegative")
        symbols.setflags(write=False)
        object.__setattr__(self, 'pilot_indices', indices)
        object.__setattr__(self, 'pilot_symbols', symbols)

    @classmethod
    def evenly_spaced(cls, num_subcarriers: int = 2048, num_pilots: int = 341,
                      noise_var: float = 1.0) -> TrainingSignal:
        """All-ones pilots on every (F // P)-th subcarrier, starting at 0."""
        if not 1 <= num_pilots <= num_subcarriers:
            raise ValueError(f"num_pilots must lie in [1, {num_subcarriers}], got {num_pilots}")
        spacing = num_subcarriers // num_pilots
        indices = tuple(range(0, spacing * num_pilots, spacing))
        return cls(num_subcarriers, indices, np.ones(num_pilots, dtype=complex), math.sqrt(noise_var))

    @property
    def num_pilots(self) -> int:
        return len(self.pilot_indices)

    @property
    def noise_var(self) -> float:
        return self.noise_std ** 2

    def noiseless(self) -> TrainingSignal:
        return TrainingSignal(self.num_subcarriers, self.pilot_indices, self.pilot_symbols, 0.0)


@dataclass(frozen=True)
class GainEstimate:
    value: complex
    num_pilots_used: int

    def __abs__(self):
        return abs(self.value)


def aligned_snr_gain(snr_db: float, noise_var: float = 1.0) -> float:
    """|g| for which perfectly aligned unquantized beams reach ``snr_db``."""
    return math.sqrt(noise_var * 10 ** (snr_db / 10))


def simulate_training(chan: ChannelSnapshot, tx_w: WeightVector, rx_w: WeightVector,
                      sig: TrainingSignal, rng: np.random.Generator) -> np.ndarray:
    """Received pilots r(f) = eta * s(f) + z(f) after analog combining."""
    eta = combined_gain(rx_w, tx_w, chan)
    received = eta * sig.pilot_symbols
    if sig.noise_std > 0:
        # d^H z has variance sigma^2 * ||d||^2, split evenly over I and Q
        scale = sig.noise_std * rx_w.norm / math.sqrt(2)
        noise = rng.standard_normal(sig.num_pilots) + 1j * rng.standard_normal(sig.num_pilots)
        received = received + scale * noise
    return received


def estimate_gain(received, sig: TrainingSignal) -> GainEstimate:
    """ML estimate sum(s* r) / sum(|s|^2) of the flat gain eta."""
    received = np.asarray(received, dtype=complex)
    if received.size == 0 or sig.num_pilots == 0:
        raise EstimationError("cannot estimate a gain from an empty pilot list")
    if received.shape != sig.pilot_symbols.shape:
        raise EstimationError(f"received {received.size} pilots, signal defines {sig.num_pilots}")
    symbols = sig.pilot_symbols
    value = np.vdot(symbols, received) / np.sum(np.abs(symbols) ** 2)
    return GainEstimate(complex(value), received.size)


@dataclass
class TrainingSession:
    """Everything one alignment trains against, plus a training counter.

    Bundles the frozen channel, the fixed transmit weights, the pilot layout
    and the random stream. Each ``measure`` is one training symbol.
    """
    channel: ChannelSnapshot
    tx_weights: WeightVector
    signal: TrainingSignal
    rng: np.random.Generator
    trainings: int = field(default=0)

    def measure(self, rx_w: WeightVector) -> GainEstimate:
        received = simulate_training(self.channel, self.tx_weights, rx_w, self.signal, self.rng)
        self.trainings += 1
        return estimate_gain(received, self.signal)
