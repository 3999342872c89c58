"""Run manifests: a TOML file expanded into the list of scenarios to simulate."""
from __future__ import annotations

import logging
import tomllib
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from django.conf import settings

from core.arrays import Angle, QuantizerConfig, UpaGeometry
from core.channel import TrainingSignal
from scenarios.runner import METHODS, ScenarioConfig, default_paths
from scenarios.serializers import ManifestSerializer

logger = logging.getLogger(__name__)


class ManifestError(Exception):
    """Unreadable or invalid manifest; ``field`` names the offending key when known."""

    def __init__(self, message, field: Optional[str] = None):
        super().__init__(message)
        self.field = field


@dataclass(frozen=True)
class RunManifest:
    scenarios: tuple[ScenarioConfig, ...]
    output_dir: Path
    emit_per_seed: bool = True

    def __post_init__(self):
        if not self.scenarios:
            raise ManifestError("a manifest must describe at least one scenario")


def _first_error(errors):
    """Flatten DRF's nested error detail into (field, message)."""
    for name, detail in errors.items():
        while isinstance(detail, (list, dict)):
            detail = next(iter(detail.values())) if isinstance(detail, dict) else detail[0]
        return name, str(detail)
    return None, 'invalid manifest'


def validate_manifest(data: dict) -> dict:
    serializer = ManifestSerializer(data=data)
    if not serializer.is_valid():
        name, message = _first_error(serializer.errors)
        raise ManifestError(f"{name}: {message}", field=name)
    return serializer.validated_data


def build_scenarios(values: dict) -> list[ScenarioConfig]:
    """Expand method "all", the speed list and the seed range into scenarios."""
    methods = METHODS if values['method'] == 'all' else (values['method'],)
    seeds = range(values['seed'], values['seed'] + values['num_seeds'])
    paths = default_paths(
        los_snr_db=values['los_snr_db'],
        nlos_snr_db=values['nlos_snr_db'],
        noise_var=values['noise_var'],
        include_nlos=values['include_nlos'],
        los_aod=Angle(*values['los_aod']),
        los_aoa=Angle(*values['los_aoa']),
        nlos_aod=Angle(*values['nlos_aod']),
        nlos_aoa=Angle(*values['nlos_aoa']),
    )
    training = TrainingSignal.evenly_spaced(values['num_subcarriers'], values['num_pilots'], values['noise_var'])
    common = dict(
        bs_geom=UpaGeometry(values['bs_side'], values['spacing_wl']),
        ms_geom=UpaGeometry(values['ms_side'], values['spacing_wl']),
        quant=QuantizerConfig(values['quant_bits']),
        block_period_s=values['block_period_s'],
        duration_s=values['duration_s'],
        sample_interval_s=values['sample_interval_s'],
        training=training,
        paths=paths,
        estimation_noise=values['estimation_noise'],
        perturbation_step=values['perturbation_step'],
        pattern_fit=values['pattern_fit'],
        nine_beam_step=values['nine_beam_step'],
        codebook_az=values['codebook_az'],
        codebook_el=values['codebook_el'],
        carrier_hz=values['carrier_hz'],
        bandwidth_hz=values['bandwidth_hz'],
    )
    return [
        ScenarioConfig(method=method, angular_speed_deg_s=speed, seed=seed, **common)
        for method in methods
        for speed in values['angular_speed_deg_s']
        for seed in seeds
    ]


def load_manifest_data(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"config file not found: {path}")
    try:
        return tomllib.loads(path.read_text(encoding='utf-8'))
    except tomllib.TOMLDecodeError as exc:
        raise ManifestError(f"{path}: {exc}") from exc
    except (OSError, UnicodeDecodeError) as exc:
        raise ManifestError(f"cannot read {path}: {exc}") from exc


def parse_config(path=None, overrides: Optional[dict] = None) -> RunManifest:
    """Read, validate and expand a manifest; ``overrides`` win over the file."""
    data = load_manifest_data(path) if path is not None else {}
    data.update({key: value for key, value in (overrides or {}).items() if value is not None})
    values = validate_manifest(data)
    output_dir = Path(values.get('output_dir') or settings.BEAMTRACK_OUTPUT_DIR)
    try:
        scenarios = build_scenarios(values)
    except ValueError as exc:
        raise ManifestError(str(exc)) from exc
    logger.debug("manifest %s expands to %d scenarios", path, len(scenarios))
    return RunManifest(tuple(scenarios), output_dir, values['emit_per_seed'])
