"""CSV contract of a run: one trace per scenario plus summary.csv."""
from __future__ import annotations

import itertools
from pathlib import Path

import pandas as pd

from core.virtual import VirtualAngle
from scenarios.runner import ThroughputSample, average_traces

TRACE_COLUMNS = [
    't_s', 'throughput_bps_hz', 'upper_bound_bps_hz', 'beam_psi_x', 'beam_psi_y',
    'aoa_psi_x', 'aoa_psi_y', 'block_index',
]
SUMMARY_COLUMNS = [
    'method', 'speed_deg_s', 'seed', 'mean_post_update_tput', 'min_tput', 'frac_above_90pct', 'trainings_used',
]
FLOAT_FORMAT = '%.9g'


def _write(frame: pd.DataFrame, path: Path):
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator='\n', encoding='utf-8')


def trace_name(method: str, speed: float, seed) -> str:
    return f'{method}_{speed:g}deg_{seed}.csv'


def trace_frame(samples, upper_bound: float) -> pd.DataFrame:
    return pd.DataFrame(
        {
            't_s': [s.t_s for s in samples],
            'throughput_bps_hz': [s.throughput_bps_hz for s in samples],
            'upper_bound_bps_hz': [float(upper_bound)] * len(samples),
            'beam_psi_x': [s.beam_virtual.psi_x for s in samples],
            'beam_psi_y': [s.beam_virtual.psi_y for s in samples],
            'aoa_psi_x': [s.aoa_virtual.psi_x for s in samples],
            'aoa_psi_y': [s.aoa_virtual.psi_y for s in samples],
            'block_index': [int(s.block_index) for s in samples],
        },
        columns=TRACE_COLUMNS,
    )


def write_trace(path, samples, upper_bound: float):
    _write(trace_frame(samples, upper_bound), Path(path))


def read_trace(path) -> list[ThroughputSample]:
    frame = pd.read_csv(path, float_precision='round_trip')
    return [
        ThroughputSample(
            float(row.t_s),
            float(row.throughput_bps_hz),
            VirtualAngle(float(row.beam_psi_x), float(row.beam_psi_y)),
            VirtualAngle(float(row.aoa_psi_x), float(row.aoa_psi_y)),
            int(row.block_index),
        )
        for row in frame.itertuples(index=False)
    ]


def write_summary(path, results):
    rows = [
        {
            'method': r.summary.method,
            'speed_deg_s': float(r.summary.speed_deg_s),
            'seed': int(r.summary.seed),
            'mean_post_update_tput': r.summary.mean_post_update_tput,
            'min_tput': r.summary.min_tput,
            'frac_above_90pct': r.summary.frac_above_90pct,
            'trainings_used': int(r.summary.trainings_used),
        }
        for r in results if r.ok
    ]
    _write(pd.DataFrame(rows, columns=SUMMARY_COLUMNS), Path(path))


def write_results(output_dir, results, emit_per_seed: bool = True) -> list[Path]:
    """Write traces (per seed or seed-averaged) and summary.csv; returns written paths."""
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    written = []
    successful = [r for r in results if r.ok]
    if emit_per_seed:
        for result in successful:
            method, speed, seed = result.config.key
            path = output_dir / trace_name(method, speed, seed)
            write_trace(path, result.samples, result.summary.upper_bound)
            written.append(path)
    else:
        def group_key(r):
            return r.config.method, r.config.angular_speed_deg_s

        for (method, speed), group in itertools.groupby(sorted(successful, key=group_key), key=group_key):
            group = list(group)
            path = output_dir / trace_name(method, speed, 'mean')
            write_trace(path, average_traces(group), group[0].summary.upper_bound)
            written.append(path)
    summary_path = output_dir / 'summary.csv'
    write_summary(summary_path, results)
    written.append(summary_path)
    return written
