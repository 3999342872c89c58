"""Reference beam alignment methods: exhaustive codebook search and nine-beam probing."""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np

from core.arrays import QuantizerConfig, UpaGeometry, WeightVector, quantize_weights
from core.channel import TrainingSession
from core.tracker import TrackerConfig, TrackerState
from core.virtual import VirtualAngle, project_to_feasible, weights_from_virtual

logger = logging.getLogger(__name__)

DEFAULT_AZIMUTH_CODEWORDS = 16
DEFAULT_ELEVATION_CODEWORDS = 8
DEFAULT_GRID_STEP = 0.22
NINE_BEAM_TRAININGS = 9


@dataclass(frozen=True)
class Codebook:
    """Kronecker codebook; codeword k steers at ``focus_virtuals[k]``."""
    codewords: tuple[WeightVector, ...]
    focus_virtuals: tuple[VirtualAngle, ...]

    def __post_init__(self):
        if len(self.codewords) != len(self.focus_virtuals):
            raise ValueError("every codeword needs exactly one focus angle")

    def __len__(self):
        return len(self.codewords)


@dataclass(frozen=True)
class CodebookSelection:
    index: int
    weights: WeightVector
    focus_virtual: VirtualAngle


@dataclass(frozen=True)
class NineBeamConfig:
    grid_step: float = DEFAULT_GRID_STEP

    def __post_init__(self):
        if not self.grid_step > 0:
            raise ValueError(f"grid_step must be positive, got {self.grid_step!r}")


def dft_directions(size: int) -> np.ndarray:
    """Direction sines (2k - K + 1)/K, k = 0..K-1, of a generalized DFT book."""
    k = np.arange(size)
    return (2 * k - size + 1) / size


def ula_codebook(n: int, size: int, spacing_wl: float) -> np.ndarray:
    """``size`` x ``n`` generalized DFT steering vectors of an n-element ULA."""
    m = np.arange(n)
    phases = 2 * math.pi * spacing_wl * np.outer(dft_directions(size), m)
    return np.exp(1j * phases)


def build_codebook(geom: UpaGeometry, q: QuantizerConfig, num_azimuth: int = DEFAULT_AZIMUTH_CODEWORDS,
                   num_elevation: int = DEFAULT_ELEVATION_CODEWORDS) -> Codebook:
    """All num_azimuth x num_elevation Kronecker pairs of two ULA books, quantized."""
    azimuth_book = ula_codebook(geom.side, num_azimuth, geom.spacing_wl)
    elevation_book = ula_codebook(geom.side, num_elevation, geom.spacing_wl)
    # a phase ramp 2*pi*d*u per element is virtual angle pi*d*side*u
    psi_x = geom.virtual_radius * dft_directions(num_azimuth)
    psi_y = geom.virtual_radius * dft_directions(num_elevation)
    codewords, focus = [], []
    for (i, horizontal), (j, vertical) in itertools.product(enumerate(azimuth_book), enumerate(elevation_book)):
        raw = WeightVector(np.kron(horizontal, vertical) / geom.side, geom.side)
        codewords.append(quantize_weights(raw, q))
        focus.append(VirtualAngle(float(psi_x[i]), float(psi_y[j])))
    return Codebook(tuple(codewords), tuple(focus))


def select_codeword(book: Codebook, session: TrainingSession) -> CodebookSelection:
    """Train every codeword once and keep the strongest; ties go to the lower index."""
    magnitudes = [abs(session.measure(w).value) for w in book.codewords]
    best = int(np.argmax(magnitudes))
    logger.debug("codebook picked %d of %d (|eta| = %.4f)", best, len(book), magnitudes[best])
    return CodebookSelection(best, book.codewords[best], book.focus_virtuals[best])


def codebook_align(book: Codebook, session: TrainingSession) -> WeightVector:
    return select_codeword(book, session).weights


def nine_beam_probes(cfg: NineBeamConfig, state: TrackerState, geom: UpaGeometry) -> list[VirtualAngle]:
    """3 x 3 grid around the beam, center first so that ties keep the beam."""
    offsets = [(0.0, 0.0)] + [
        (dx * cfg.grid_step, dy * cfg.grid_step)
        for dx, dy in itertools.product((-1, 0, 1), repeat=2)
        if (dx, dy) != (0, 0)
    ]
    return [project_to_feasible(geom, state.beam_virtual + VirtualAngle(dx, dy)) for dx, dy in offsets]


def nine_beam_align(cfg: NineBeamConfig, state: TrackerState, session: TrainingSession,
                    tracker_cfg: TrackerConfig) -> TrackerState:
    """Move the beam to whichever of the nine probes trains strongest."""
    geom, q = tracker_cfg.ms_geom, tracker_cfg.quant
    probes = nine_beam_probes(cfg, state, geom)
    magnitudes = [abs(session.measure(weights_from_virtual(geom, psi, q)).value) for psi in probes]
    best = int(np.argmax(magnitudes))
    logger.debug("nine-beam block %d: probe %d wins", state.block_index, best)
    return TrackerState.from_virtual_angle(geom, probes[best], q, state.block_index + 1)
