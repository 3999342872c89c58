"""Virtual-angle coordinates of a UPA and the separable beampattern kernel.

In virtual coordinates psi = (pi*d*side/lambda) * (cos(el) sin(az), sin(el))
the array gain between two directions factors into one kernel per axis,
``iota(offset, side)``, independent of where the beam points.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from core.arrays import Angle, QuantizerConfig, UpaGeometry, WeightVector, array_response, quantize_weights
from core.exceptions import InfeasibleAngleError

# arcsin arguments this close beyond +-1 are clamped instead of rejected.
ARCSIN_TOLERANCE = 1e-9
FEASIBILITY_TOLERANCE = 1e-9
# Below this |gamma| iota falls back to its Taylor expansion.
SERIES_THRESHOLD = 1e-6
HALF_POWER = 1 / math.sqrt(2)


@dataclass(frozen=True)
class VirtualAngle:
    psi_x: float
    psi_y: float

    def __add__(self, other: VirtualAngle) -> VirtualAngle:
        return VirtualAngle(self.psi_x + other.psi_x, self.psi_y + other.psi_y)

    def __sub__(self, other: VirtualAngle) -> VirtualAngle:
        return VirtualAngle(self.psi_x - other.psi_x, self.psi_y - other.psi_y)

    @property
    def radius(self) -> float:
        return math.hypot(self.psi_x, self.psi_y)


def to_virtual(geom: UpaGeometry, angle: Angle) -> VirtualAngle:
    scale = geom.virtual_radius
    return VirtualAngle(
        scale * math.cos(angle.elevation) * math.sin(angle.azimuth),
        scale * math.sin(angle.elevation),
    )


def _arcsin(value: float, what: str) -> float:
    if abs(value) > 1 + ARCSIN_TOLERANCE or math.isnan(value):
        raise InfeasibleAngleError(f"{what} arcsin argument {value!r} is outside [-1, 1]")
    return math.asin(max(-1.0, min(1.0, value)))


def from_virtual(geom: UpaGeometry, psi: VirtualAngle) -> Angle:
    """Inverse of to_virtual on the feasible disc."""
    scale = geom.virtual_radius
    elevation = _arcsin(psi.psi_y / scale, 'elevation')
    cos_el = math.cos(elevation)
    # points accepted by is_feasible always invert, even when rounding pushes the azimuth past +-1
    feasible = is_feasible(geom, psi)
    if cos_el == 0.0:
        if not feasible and abs(psi.psi_x) > ARCSIN_TOLERANCE:
            raise InfeasibleAngleError(f"{psi!r} has azimuth content at the zenith")
        return Angle(0.0, elevation)
    argument = psi.psi_x / (scale * cos_el)
    if feasible:
        argument = max(-1.0, min(1.0, argument))
    return Angle(_arcsin(argument, 'azimuth'), elevation)


def is_feasible(geom: UpaGeometry, psi: VirtualAngle) -> bool:
    """Closed-disc check psi_x^2 + psi_y^2 <= (pi*d*side/lambda)^2."""
    radius = geom.virtual_radius
    return psi.psi_x ** 2 + psi.psi_y ** 2 <= radius ** 2 * (1 + FEASIBILITY_TOLERANCE)


def project_to_feasible(geom: UpaGeometry, psi: VirtualAngle) -> VirtualAngle:
    """Radially pull an out-of-disc virtual angle back onto the boundary."""
    if is_feasible(geom, psi):
        return psi
    shrink = geom.virtual_radius / psi.radius
    return VirtualAngle(psi.psi_x * shrink, psi.psi_y * shrink)


def iota(gamma: float, n: int) -> float:
    """sin(gamma) / (n sin(gamma/n)), equal to 1 at gamma = 0."""
    if n == 1:
        return 1.0
    if abs(gamma) < SERIES_THRESHOLD:
        return 1.0 - gamma * gamma * (1.0 - 1.0 / (n * n)) / 6.0
    denominator = n * math.sin(gamma / n)
    if denominator == 0.0:
        # grating lobe at gamma = k*n*pi
        return math.cos(gamma) / math.cos(gamma / n)
    return math.sin(gamma) / denominator


def iota_asymptotic(gamma: float) -> float:
    """Large-array limit sin(gamma)/gamma of iota."""
    if abs(gamma) < SERIES_THRESHOLD:
        return 1.0 - gamma * gamma / 6.0
    return math.sin(gamma) / gamma


def virtual_beamwidth(n: int, level: float = HALF_POWER) -> float:
    """Full virtual width of the main lobe above ``level`` (amplitude)."""
    half = brentq(lambda g: iota(g, n) - level, SERIES_THRESHOLD, math.pi - SERIES_THRESHOLD, xtol=1e-12)
    return 2.0 * half


def physical_beamwidth(geom: UpaGeometry, level: float = HALF_POWER) -> float:
    """Broadside beamwidth in radians, from the virtual width."""
    half = virtual_beamwidth(geom.side, level) / 2.0
    return 2.0 * math.asin(min(1.0, half / geom.virtual_radius))


def pattern_gain(psi_beam: VirtualAngle, psi_arrival: VirtualAngle, geom: UpaGeometry) -> float:
    """Magnitude of the gain of a beam focused at psi_beam toward psi_arrival."""
    return abs(
        iota(psi_beam.psi_x - psi_arrival.psi_x, geom.side)
        * iota(psi_beam.psi_y - psi_arrival.psi_y, geom.side)
    )


def weights_from_virtual(geom: UpaGeometry, psi: VirtualAngle, q: QuantizerConfig) -> WeightVector:
    """wV(psi) = wQ(G^-1(psi))."""
    if not is_feasible(geom, psi):
        raise InfeasibleAngleError(f"{psi!r} lies outside the virtual disc of radius {geom.virtual_radius:.6g}")
    return quantize_weights(array_response(geom, from_virtual(geom, psi)), q)


def virtual_response(geom: UpaGeometry, psi: VirtualAngle) -> WeightVector:
    """Unquantized steering vector toward ``psi``, built directly in virtual coordinates.

    Equals array_response(geom, from_virtual(geom, psi)) on the disc and stays
    defined outside it, which the pattern fit in the tracker relies on.
    """
    index = np.arange(geom.side)
    horizontal = np.exp(2j * psi.psi_x * index / geom.side)
    vertical = np.exp(2j * psi.psi_y * index / geom.side)
    return WeightVector(np.kron(horizontal, vertical) / geom.side, geom.side)
