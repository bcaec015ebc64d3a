"""Print criterion-relevant statistics for every cached run (dev tool)."""
from __future__ import annotations

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from runcache import CACHE_ROOT  # noqa: E402
from graphemc import runio  # noqa: E402
from graphemc.analysis import (  # noqa: E402
    SteadyWindow,
    extract_period,
    grid_period,
    window_stats,
)


def main() -> None:
    if not CACHE_ROOT.exists():
        print("no cache")
        return
    stats_w = SteadyWindow(3.0, 5.0)
    osc_w = SteadyWindow(2.5, 5.0)
    for d in sorted(CACHE_ROOT.iterdir()):
        if not (d / "COMPLETE").exists():
            print(f"{d.name}: incomplete")
            continue
        label = (d / "LABEL").read_text().strip() if (d / "LABEL").exists() else d.name
        cfg, ts, meta = runio.load_run(d)
        s_eps = window_stats(ts.t, ts.mean_energy, stats_w)
        s_vx = window_stats(ts.t, ts.vx, stats_w)
        s_vy = window_stats(ts.t, ts.vy, stats_w)
        line = (
            f"{label:>16s} N_p={meta['n_particles']:>8s} wall={float(meta['wall_clock_s']):9.1f}s "
            f"<eps>={s_eps.mean:.6f}±{s_eps.rms:.2e} v_d={s_vx.mean:8.3f}±{s_vx.rms:.3f} "
            f"v_y={s_vy.mean:+7.3f}±{s_vy.rms:.3f}"
        )
        if cfg.field_kv_per_cm_x != 0:
            t_grid = grid_period(cfg.dk_per_nm, cfg.field_kv_per_cm_x)
            dvd = ts.vx - window_stats(ts.t, ts.vx, osc_w).mean
            t_obs = extract_period(ts.t, dvd, osc_w)
            if t_obs:
                line += f" T_obs={t_obs:.5f} (grid {t_grid:.5f}, dev {abs(t_obs-t_grid)/t_grid:+.3%})"
            else:
                line += f" T_obs=none (grid {t_grid:.5f})"
        print(line)


if __name__ == "__main__":
    main()
