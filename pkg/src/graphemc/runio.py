"""Run-directory layout and strict CSV / key=value readers and writers.

A completed run directory is immutable and contains:

    config.txt       resolved configuration (key = value)
    metadata.txt     run provenance: config.* keys, counters, timings
    counters.txt     event counters, one per line
    timeseries.csv   t_ps, mean_energy_eV, vx_nm_per_ps, vy_nm_per_ps,
                     density_per_cm2
    snapshot_<t>ps.csv   occupation fractions; header row = k_x centers,
                         first column = k_y centers

Analysis commands write stats.txt and corrected.csv next to their inputs
only when asked to; they never modify a run directory.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .config import SimConfig, parse_config_text
from .engine import RunResult, Snapshot, TimeSeries

TIMESERIES_HEADER = "t_ps,mean_energy_eV,vx_nm_per_ps,vy_nm_per_ps,density_per_cm2"


def _fmt(x: float) -> str:
    return format(x, ".12g")


def write_run_dir(result: RunResult, out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    from .config import format_config

    (out / "config.txt").write_text(format_config(result.config))

    lines = [TIMESERIES_HEADER]
    ts = result.timeseries
    for i in range(len(ts.t)):
        lines.append(
            f"{_fmt(ts.t[i])},{_fmt(ts.mean_energy[i])},{_fmt(ts.vx[i])},"
            f"{_fmt(ts.vy[i])},{_fmt(ts.density[i])}"
        )
    (out / "timeseries.csv").write_text("\n".join(lines) + "\n")

    counter_lines = [f"{k} = {v}" for k, v in result.counters.flatten().items()]
    counter_lines.append(f"counter.wall_clock_s = {_fmt(result.counters.wall_clock_s)}")
    (out / "counters.txt").write_text("\n".join(counter_lines) + "\n")

    meta_lines = []
    for key, value in result.metadata.items():
        rendered = _fmt(value) if isinstance(value, float) else str(value)
        meta_lines.append(f"{key} = {rendered}")
    meta_lines.append("")
    meta_lines.append(format_config(result.config, prefix="config."))
    (out / "metadata.txt").write_text("\n".join(meta_lines))

    for snap in result.snapshots:
        write_snapshot(snap, out / f"snapshot_{snap.t_ps:g}ps.csv")
    return out


def write_snapshot(snap: Snapshot, path: Path) -> None:
    lines = ["k_y\\k_x," + ",".join(_fmt(c) for c in snap.centers_x)]
    # Rows run over k_y; the value grid is stored [i_x, j_y].
    for j in range(len(snap.centers_y)):
        row = snap.f[:, j]
        lines.append(_fmt(snap.centers_y[j]) + "," + ",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def read_timeseries(path: str | Path) -> TimeSeries:
    path = Path(path)
    text = path.read_text().strip().splitlines()
    if not text or text[0].strip() != TIMESERIES_HEADER:
        raise ValueError(f"{path}: malformed time-series header")
    try:
        data = np.array(
            [[float(v) for v in line.split(",")] for line in text[1:]], dtype=float
        )
    except ValueError as exc:
        raise ValueError(f"{path}: malformed numeric row") from exc
    if data.ndim != 2 or data.shape[1] != 5:
        raise ValueError(f"{path}: expected 5 columns")
    if np.any(np.diff(data[:, 0]) <= 0):
        raise ValueError(f"{path}: time column must be strictly increasing")
    return TimeSeries(
        t=data[:, 0],
        mean_energy=data[:, 1],
        vx=data[:, 2],
        vy=data[:, 3],
        density=data[:, 4],
    )


def read_snapshot(path: str | Path) -> Snapshot:
    """Parse a snapshot CSV back into (t from the filename) grid form."""
    path = Path(path)
    lines = path.read_text().strip().splitlines()
    header = lines[0].split(",")
    if header[0] != "k_y\\k_x":
        raise ValueError(f"{path}: malformed snapshot header")
    centers_x = np.array([float(v) for v in header[1:]])
    centers_y = np.empty(len(lines) - 1)
    f = np.empty((len(centers_x), len(centers_y)))
    for row, line in enumerate(lines[1:]):
        cells = line.split(",")
        centers_y[row] = float(cells[0])
        f[:, row] = [float(v) for v in cells[1:]]
    name = path.stem  # snapshot_<t>ps
    t_ps = float(name[len("snapshot_"):-2])
    return Snapshot(t_ps=t_ps, f=f, centers_x=centers_x, centers_y=centers_y)


def read_metadata(run_dir: str | Path) -> dict:
    path = Path(run_dir) / "metadata.txt"
    out = {}
    for line in path.read_text().splitlines():
        stripped = line.strip()
        if not stripped or "=" not in stripped:
            continue
        key, value = stripped.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def config_from_metadata(meta: dict) -> SimConfig:
    lines = []
    for key, value in meta.items():
        if key.startswith("config."):
            lines.append(f"{key[len('config.'):]} = {value}")
    return parse_config_text("\n".join(lines))


# Keys that describe the physical problem; runs being compared must agree on
# them, while method/cost/recording keys may differ.
PHYSICS_KEYS = (
    "temperature_K",
    "fermi_level_eV",
    "field_kv_per_cm_x",
    "field_kv_per_cm_y",
    "k_max_per_nm",
    "n_k",
    "dt_fs",
    "t_max_ps",
)


def physics_mismatch(a: SimConfig, b: SimConfig) -> list[str]:
    return [k for k in PHYSICS_KEYS if getattr(a, k) != getattr(b, k)]


def load_run(run_dir: str | Path) -> tuple[SimConfig, TimeSeries, dict]:
    run_dir = Path(run_dir)
    if not (run_dir / "timeseries.csv").exists():
        raise FileNotFoundError(f"{run_dir} does not contain timeseries.csv")
    meta = read_metadata(run_dir)
    cfg = config_from_metadata(meta)
    ts = read_timeseries(run_dir / "timeseries.csv")
    return cfg, ts, meta
