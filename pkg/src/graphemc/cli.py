"""Command-line front end: run, analyze, compare, bench."""
from __future__ import annotations

import argparse
import itertools
import math
import sys
import time
from pathlib import Path

from . import analysis, engine, runio
from .config import ConfigError, SimConfig, apply_overrides, load_config

_SWEEPABLE = (
    "n_particles_target",
    "n_partner_samples",
    "field_kv_per_cm_x",
    "n_k",
    "dt_fs",
    "ee_mode",
    "seed",
)


def _parse_window(text: str) -> analysis.SteadyWindow:
    try:
        lo, hi = text.split(":")
        return analysis.SteadyWindow(float(lo), float(hi))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"window must look like lo:hi, got {text!r}") from exc


def _resolve_config(args) -> SimConfig:
    cfg = load_config(args.config) if args.config else SimConfig()
    if args.override:
        cfg = apply_overrides(cfg, args.override)
    if args.seed is not None:
        cfg = apply_overrides(cfg, [f"seed={args.seed}"])
    return cfg


def cmd_run(args) -> int:
    cfg = _resolve_config(args)
    out_dir = Path(args.out) if args.out else Path(
        time.strftime("run_%Y%m%d_%H%M%S")
    )
    result = engine.run(cfg)
    runio.write_run_dir(result, out_dir)
    ts = result.timeseries
    print(f"run complete: {out_dir}")
    print(f"  n_particles = {result.metadata['n_particles']}")
    print(f"  wall_clock_s = {result.metadata['wall_clock_s']:.3f}")
    print(f"  samples = {len(ts.t)}")
    return 0


def _stats_block(label: str, stats: analysis.WindowStats) -> str:
    return (
        f"{label}: mean = {stats.mean:.6g}  rms = {stats.rms:.4g}  "
        f"se = {stats.se:.4g}  n = {stats.n_samples}"
    )


def cmd_analyze(args) -> int:
    cfg, ts, meta = runio.load_run(args.run_dir)
    w_stats = _parse_window(args.window)
    w_osc = _parse_window(args.osc_window)

    lines = [f"run: {args.run_dir}"]
    lines.append(f"window_stats_ps: [{w_stats.t_lo}, {w_stats.t_hi}]")
    s_eps = analysis.window_stats(ts.t, ts.mean_energy, w_stats)
    s_vx = analysis.window_stats(ts.t, ts.vx, w_stats)
    s_vy = analysis.window_stats(ts.t, ts.vy, w_stats)
    lines.append(_stats_block("mean_energy_eV", s_eps))
    lines.append(_stats_block("vx_nm_per_ps", s_vx))
    lines.append(_stats_block("vy_nm_per_ps", s_vy))

    corrected_columns = {}
    if cfg.field_kv_per_cm_x != 0.0:
        t_grid = analysis.grid_period(cfg.dk_per_nm, cfg.field_kv_per_cm_x)
        lines.append(f"T_grid_ps = {t_grid:.6g}")
        dvd = ts.vx - analysis.window_stats(ts.t, ts.vx, w_osc).mean
        t_obs = analysis.extract_period(ts.t, dvd, w_osc)
        lines.append(
            "T_obs_ps = " + (f"{t_obs:.6g}" if t_obs is not None else "none")
        )
        omega = 2.0 * math.pi / t_grid
        for order in range(1, args.harmonics + 1):
            fit = analysis.harmonic_fit(ts.t, ts.vx, w_osc, omega, order)
            corrected = analysis.subtract_harmonics(ts.t, ts.vx, fit)
            delta, z = analysis.mean_shift_z(ts.t, ts.vx, corrected, w_osc)
            rms = analysis.window_stats(ts.t, corrected, w_osc).rms
            lines.append(
                f"harmonics H={order}: residual_rms = {fit.residual_rms:.6g}  "
                f"corrected_rms = {rms:.6g}  delta = {delta:.6g}  Z = {z:.6g}"
            )
            corrected_columns[f"vx_corrected_h{order}"] = corrected
    else:
        lines.append("T_grid_ps = undefined (zero drive field)")

    snap_paths = sorted(Path(args.run_dir).glob("snapshot_*ps.csv"))
    out_dir = Path(args.out) if args.out else Path(args.run_dir + "_analysis")
    out_dir.mkdir(parents=True, exist_ok=True)
    for snap_path in snap_paths:
        snap = runio.read_snapshot(snap_path)
        j0 = int(abs(snap.centers_y).argmin())   # row nearest k_y = 0
        cut_lines = ["k_x_per_nm,f"]
        for i in range(len(snap.centers_x)):
            cut_lines.append(f"{snap.centers_x[i]:.12g},{snap.f[i, j0]:.12g}")
        (out_dir / f"cut_{snap_path.stem}.csv").write_text("\n".join(cut_lines) + "\n")
        lines.append(f"snapshot cut: {snap_path.name} at k_y = {snap.centers_y[j0]:.4g}")

    report = "\n".join(lines) + "\n"
    print(report, end="")
    (out_dir / "stats.txt").write_text(report)
    if corrected_columns:
        header = "t_ps,vx_raw," + ",".join(corrected_columns)
        rows = [header]
        cols = list(corrected_columns.values())
        for i in range(len(ts.t)):
            vals = [f"{ts.t[i]:.12g}", f"{ts.vx[i]:.12g}"]
            vals += [f"{c[i]:.12g}" for c in cols]
            rows.append(",".join(vals))
        (out_dir / "corrected.csv").write_text("\n".join(rows) + "\n")
    return 0


def cmd_compare(args) -> int:
    if len(args.run_dirs) < 2:
        print("compare needs at least two run directories", file=sys.stderr)
        return 2
    w = _parse_window(args.window)
    loaded = [runio.load_run(d) for d in args.run_dirs]
    base_cfg = loaded[0][0]
    for run_dir, (cfg, _, _) in zip(args.run_dirs[1:], loaded[1:]):
        mismatch = runio.physics_mismatch(base_cfg, cfg)
        if mismatch:
            print(
                f"physical configuration of {run_dir} differs in: "
                + ", ".join(mismatch),
                file=sys.stderr,
            )
            return 2
    header = (
        f"{'run':<28} {'mode':<8} {'N_s':>4} {'N_p':>9} {'wall_s':>10} "
        f"{'<eps> (eV)':>22} {'v_d (nm/ps)':>22} {'<v_y> (nm/ps)':>22}"
    )
    print(header)
    for run_dir, (cfg, ts, meta) in zip(args.run_dirs, loaded):
        s_eps = analysis.window_stats(ts.t, ts.mean_energy, w)
        s_vx = analysis.window_stats(ts.t, ts.vx, w)
        s_vy = analysis.window_stats(ts.t, ts.vy, w)
        wall = float(meta.get("wall_clock_s", "nan"))
        n_p = meta.get("n_particles", "?")
        print(
            f"{Path(run_dir).name:<28} {cfg.ee_mode:<8} "
            f"{cfg.n_partner_samples:>4} {n_p:>9} {wall:>10.1f} "
            f"{s_eps.mean:.6f} ± {s_eps.rms:.2e} "
            f"{s_vx.mean:>10.3f} ± {s_vx.rms:.3f} "
            f"{s_vy.mean:>10.3f} ± {s_vy.rms:.3f}"
        )
    return 0


def cmd_bench(args) -> int:
    base = _resolve_config(args)
    axes: list[tuple[str, list[str]]] = []
    for sweep in args.sweep or []:
        if "=" not in sweep:
            print(f"sweep must look like key=v1,v2,...; got {sweep!r}", file=sys.stderr)
            return 2
        key, values = sweep.split("=", 1)
        key = key.strip()
        if key not in _SWEEPABLE:
            print(f"cannot sweep {key!r}; allowed: {_SWEEPABLE}", file=sys.stderr)
            return 2
        axes.append((key, [v.strip() for v in values.split(",") if v.strip()]))
    combos = list(itertools.product(*[vals for _, vals in axes])) if axes else [()]
    if len(combos) > args.cap:
        print(
            f"sweep size {len(combos)} exceeds cap {args.cap}; raise --cap to confirm",
            file=sys.stderr,
        )
        return 2
    out_dir = Path(args.out) if args.out else Path("bench")
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for combo in combos:
        overrides = [f"{key}={val}" for (key, _), val in zip(axes, combo)]
        cfg = apply_overrides(base, overrides)
        label = "_".join(v.replace(".", "p") for v in combo) if combo else "base"
        result = engine.run(cfg)
        runio.write_run_dir(result, out_dir / label)
        row = {
            "label": label,
            "ee_mode": cfg.ee_mode,
            "n_partner_samples": cfg.n_partner_samples,
            "n_particles": result.metadata["n_particles"],
            "wall_clock_s": result.metadata["wall_clock_s"],
        }
        for phase in engine.PHASES:
            row[f"{phase}_s"] = result.metadata[f"phase.{phase}_s"]
        rows.append(row)
        print(
            f"{label}: mode={cfg.ee_mode} N_s={cfg.n_partner_samples} "
            f"N_p={row['n_particles']} wall={row['wall_clock_s']:.2f}s"
        )
    if rows:
        header = list(rows[0])
        lines = [",".join(header)]
        for row in rows:
            lines.append(",".join(str(row[k]) for k in header))
        (out_dir / "bench.csv").write_text("\n".join(lines) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="graphemc",
        description="Pauli-consistent ensemble Monte Carlo for graphene transport",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one simulation")
    p_run.add_argument("--config", help="key=value configuration file")
    p_run.add_argument("--override", action="append", metavar="KEY=VALUE")
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--out", help="run directory (default: timestamped)")
    p_run.set_defaults(func=cmd_run)

    p_an = sub.add_parser("analyze", help="steady-window statistics and harmonics")
    p_an.add_argument("run_dir")
    p_an.add_argument("--window", default="3:5", help="stats window lo:hi in ps")
    p_an.add_argument(
        "--osc-window", default="2.5:5", help="period/harmonic window lo:hi in ps"
    )
    p_an.add_argument("--harmonics", type=int, default=3)
    p_an.add_argument("--out", help="analysis output directory")
    p_an.set_defaults(func=cmd_analyze)

    p_cmp = sub.add_parser("compare", help="side-by-side run comparison")
    p_cmp.add_argument("run_dirs", nargs="*")
    p_cmp.add_argument("--window", default="3:5")
    p_cmp.set_defaults(func=cmd_compare)

    p_bench = sub.add_parser("bench", help="run a sweep and tabulate costs")
    p_bench.add_argument("--config")
    p_bench.add_argument("--override", action="append", metavar="KEY=VALUE")
    p_bench.add_argument("--seed", type=int)
    p_bench.add_argument(
        "--sweep", action="append", metavar="KEY=V1,V2", help="repeatable sweep axis"
    )
    p_bench.add_argument("--cap", type=int, default=64)
    p_bench.add_argument("--out", default="bench")
    p_bench.set_defaults(func=cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except RuntimeError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
