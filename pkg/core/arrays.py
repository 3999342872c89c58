"""Uniform planar arrays: geometry, steering vectors, phase quantization and gain.

Element (m, n) of a side x side array sits at horizontal index m and vertical
index n. Vectors are linearized m-major, i.e. entry ``m * side + n``, which is
exactly the order ``np.kron(horizontal, vertical)`` produces.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional

import numpy as np

from core.exceptions import DimensionMismatchError, InvalidAngleError, InvalidGeometryError

if TYPE_CHECKING:
    from core.channel import ChannelSnapshot

logger = logging.getLogger(__name__)

HALF_PI = math.pi / 2
# Slack on the hemisphere bounds so values produced by arcsin round trips pass.
ANGLE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class UpaGeometry:
    """Square planar array with ``side`` elements per edge."""
    side: int
    spacing_wl: float = 0.5

    def __post_init__(self):
        if int(self.side) != self.side or self.side < 1:
            raise InvalidGeometryError(f"side must be a positive integer, got {self.side!r}")
        if not self.spacing_wl > 0:
            raise InvalidGeometryError(f"spacing_wl must be positive, got {self.spacing_wl!r}")

    @property
    def num_elements(self) -> int:
        return self.side * self.side

    @property
    def phase_constant(self) -> float:
        """p = 2*pi*d/lambda."""
        return 2 * math.pi * self.spacing_wl

    @property
    def virtual_radius(self) -> float:
        """Radius pi*d*side/lambda of the feasible virtual-angle disc."""
        return math.pi * self.spacing_wl * self.side


@dataclass(frozen=True)
class Angle:
    """Physical direction (radians) in the front hemisphere."""
    azimuth: float
    elevation: float

    def __post_init__(self):
        for name in ('azimuth', 'elevation'):
            value = getattr(self, name)
            if not math.isfinite(value) or abs(value) > HALF_PI + ANGLE_TOLERANCE:
                raise InvalidAngleError(f"{name} must lie in [-pi/2, pi/2], got {value!r}")

    def as_tuple(self) -> tuple[float, float]:
        return self.azimuth, self.elevation


@dataclass(frozen=True)
class QuantizerConfig:
    """Phase shifter resolution in bits."""
    bits: int = 4

    def __post_init__(self):
        if int(self.bits) != self.bits or self.bits < 1:
            raise ValueError(f"bits must be a positive integer, got {self.bits!r}")

    @property
    def levels(self) -> int:
        return 2 ** self.bits

    @property
    def step(self) -> float:
        return 2 * math.pi / self.levels


@dataclass(frozen=True, eq=False)
class WeightVector:
    """Analog beamforming weights; every entry has magnitude 1/side.

    ``quant_bits`` is None for unquantized vectors.
    """
    entries: np.ndarray
    side: int
    quant_bits: Optional[int] = None

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=complex)
        if entries.shape != (self.side * self.side,):
            raise DimensionMismatchError(
                f"expected {self.side * self.side} entries for side {self.side}, got shape {entries.shape}"
            )
        entries.setflags(write=False)
        object.__setattr__(self, 'entries', entries)

    def __len__(self):
        return self.entries.size

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.entries))


def array_response(geom: UpaGeometry, angle: Angle) -> WeightVector:
    """Normalized steering vector a(angle) of the array."""
    p = geom.phase_constant
    index = np.arange(geom.side)
    horizontal = np.exp(1j * p * index * math.cos(angle.elevation) * math.sin(angle.azimuth))
    vertical = np.exp(1j * p * index * math.sin(angle.elevation))
    return WeightVector(np.kron(horizontal, vertical) / geom.side, geom.side)


def quantize_weights(w: WeightVector, q: QuantizerConfig) -> WeightVector:
    """Snap every phase to the nearest point of the Q-bit grid.

    Phases are wrapped to [0, 2*pi) first and the distance is circular. An
    exact tie between two levels goes to the smaller index.
    """
    phase = np.mod(np.angle(w.entries), 2 * math.pi)
    k = np.ceil(phase / q.step - 0.5).astype(int) % q.levels
    return WeightVector(np.exp(1j * k * q.step) / w.side, w.side, q.bits)


def quantized_response(geom: UpaGeometry, angle: Angle, q: QuantizerConfig) -> WeightVector:
    """wQ(angle): the phase-shifter setting that steers toward ``angle``."""
    return quantize_weights(array_response(geom, angle), q)


def quantization_loss(geom: UpaGeometry, angle: Angle, q: QuantizerConfig) -> float:
    """Gain lost to phase quantization when steering at ``angle``: 1 - |wQ^H a|."""
    a = array_response(geom, angle)
    return 1.0 - abs(np.vdot(quantize_weights(a, q).entries, a.entries))


def combined_gain(rx_w: WeightVector, tx_w: WeightVector, channel: ChannelSnapshot) -> complex:
    """eta(c, d) = d^H H c, summed path by path without forming H."""
    if len(rx_w) != channel.rx_geom.num_elements:
        raise DimensionMismatchError(
            f"receive weights have {len(rx_w)} entries, array has {channel.rx_geom.num_elements}"
        )
    if len(tx_w) != channel.tx_geom.num_elements:
        raise DimensionMismatchError(
            f"transmit weights have {len(tx_w)} entries, array has {channel.tx_geom.num_elements}"
        )
    eta = 0j
    for path in channel.paths:
        if path.gain == 0:
            continue
        receive = np.vdot(rx_w.entries, array_response(channel.rx_geom, path.aoa).entries)
        transmit = np.vdot(array_response(channel.tx_geom, path.aod).entries, tx_w.entries)
        eta += path.gain * receive * transmit
    return complex(eta)
