"""File writers for realizations and simulation reports.

Every number is written with 9 significant digits through ``format``, which
does not consult the locale.
"""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Iterable, List, Sequence

import numpy as np

from .scenario import ScenarioRealization
from .simulate import SimulationReport

UM = 1e6


def num(x: float) -> str:
    return format(float(x), ".9g")


def _csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([num(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def scenario_csv(real: ScenarioRealization) -> str:
    return _csv_text(
        ("species", "x_um", "y_um", "z_um", "radius_um"),
        ((p.species, p.center[0] * UM, p.center[1] * UM, p.center[2] * UM, p.radius * UM) for p in real.placements),
    )


def vessels_csv(real: ScenarioRealization) -> str:
    return _csv_text(
        ("class", "x_um", "y_um", "z_um", "axis_x", "axis_y", "axis_z", "half_len_um", "radius_um"),
        (
            (v.vessel_class, *(c * UM for c in v.center), *map(float, v.axis), v.half_length * UM, v.radius * UM)
            for v in real.vessels
        ),
    )


def voxel_bytes(real: ScenarioRealization) -> bytes:
    """Labels as little-endian uint16, x varying fastest."""
    return np.asarray(real.voxel_labels, dtype="<u2").ravel(order="F").tobytes()


def voxel_header(real: ScenarioRealization, data_file: str) -> str:
    nx, ny, nz = real.voxel_labels.shape
    lines = [
        f'data_file = "{data_file}"',
        'dtype = "uint16"',
        'byte_order = "little"',
        'order = "x-fastest"',
        f"dims = [{nx}, {ny}, {nz}]",
        f"dx_m = {num(real.grid.dx)}",
        f"seed = {real.grid.seed}",
        "",
        "[labels]",
    ]
    lines += [f'{i} = "{name}"' for i, name in enumerate(real.label_names)]
    return "\n".join(lines) + "\n"


def read_voxels(data: bytes, dims: Sequence[int]) -> np.ndarray:
    return np.frombuffer(data, dtype="<u2").reshape(tuple(dims), order="F")


def write_scenario(real: ScenarioRealization, out: Path) -> List[Path]:
    out = Path(out)
    files = {
        "scenario.csv": scenario_csv(real),
        "vessels.csv": vessels_csv(real),
        "voxels.hdr": voxel_header(real, "voxels.u16"),
    }
    written = []
    for name, text in files.items():
        (out / name).write_text(text, encoding="utf-8")
        written.append(out / name)
    (out / "voxels.u16").write_bytes(voxel_bytes(real))
    written.append(out / "voxels.u16")
    return written


def attenuation_csv(report: SimulationReport) -> str:
    return _csv_text(
        ("frequency_hz", "distance_m", "L_spr_db", "L_abs_db", "L_sca_db", "L_tot_db"),
        (
            (
                float(r.frequency),
                float(r.distance),
                r.loss.spreading.db,
                r.loss.absorption.db,
                r.loss.scattering.db,
                r.loss.total.db,
            )
            for r in report.attenuation
        ),
    )


def freq_label(f: float) -> str:
    return num(f / 1e9) + "GHz"


def histogram_csv(edges: np.ndarray, density: np.ndarray) -> str:
    return _csv_text(
        ("bin_left", "bin_right", "density"),
        ((float(a), float(b), float(d)) for a, b, d in zip(edges[:-1], edges[1:], density)),
    )


def _rounded(obj):
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return float(num(x)) if math.isfinite(x) else None
    if isinstance(obj, dict):
        return {str(k): _rounded(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_rounded(v) for v in obj]
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def report_json(report: SimulationReport) -> str:
    return json.dumps(_rounded(report.to_json()), sort_keys=True, indent=1) + "\n"


def write_report(report: SimulationReport, out: Path) -> List[Path]:
    out = Path(out)
    written = []
    path = out / "attenuation.csv"
    path.write_text(attenuation_csv(report), encoding="utf-8")
    written.append(path)
    for h in report.histograms:
        path = out / f"hist_{h.layer}_{h.kind}_{freq_label(h.frequency)}.csv"
        path.write_text(histogram_csv(h.bin_edges, h.density), encoding="utf-8")
        written.append(path)
    path = out / "report.json"
    path.write_text(report_json(report), encoding="utf-8")
    written.append(path)
    return written
