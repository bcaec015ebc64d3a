"""Drift-collision time stepping with null-collision free flights.

Each macro step advances the co-moving grid shift over dt, then processes
collisions in continuous time inside the step window.  Candidate event
times for every particle are drawn from the bounded rate
Gamma' = alpha * (Gamma_ph + lambda_ee); a candidate is a real collision
with probability 1/alpha, in which case a mechanism is selected in
proportion to the channel rates and executed with an event-level Pauli test.

The first candidate of every particle in a window is drawn in one
vectorized pass against the frozen state at the start of the window (rate
evaluation is read-only, so a frozen snapshot is sound); everything the
candidate mutates, and every subsequent flight of a particle that stays
busy, is processed strictly sequentially in a seeded random order.  Runs
are bit-reproducible for a fixed (config, seed).
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import ee as ee_mod
from .config import SimConfig
from .core import (
    CHANNELS,
    PhononParams,
    eph_channel_rates_scalar,
    eph_total_rate_array,
    sample_eph_final_state,
)
from .ensemble import (
    ConfigurationError,
    KGrid,
    ShiftState,
    apply_drift,
    apply_transition,
    cell_of,
    continuum_density,
    init_from_fermi_dirac,
    observables,
    pauli_accept_pair,
    pauli_accept_single,
    subcell_phase,
)
from .screening import ScreeningParams
from .units import DEFAULT_UNITS, kv_per_cm_to_ev_per_nm

MECHANISMS = CHANNELS + ("ee",)

PHASES = ("drift", "rates_ph", "rates_ee", "flights", "events", "record")


@dataclass
class EventCounters:
    """Attempt bookkeeping per mechanism plus the null-collision tally."""

    attempted: dict = field(default_factory=lambda: {m: 0 for m in MECHANISMS})
    accepted: dict = field(default_factory=lambda: {m: 0 for m in MECHANISMS})
    pauli_rejected: dict = field(default_factory=lambda: {m: 0 for m in MECHANISMS})
    candidates: int = 0
    null_events: int = 0
    ee_degenerate: int = 0
    wall_clock_s: float = 0.0

    def check_identity(self) -> None:
        for m in MECHANISMS:
            extra = self.ee_degenerate if m == "ee" else 0
            if self.attempted[m] != self.accepted[m] + self.pauli_rejected[m] + extra:
                raise RuntimeError(f"event accounting broken for {m}")

    def flatten(self) -> dict:
        out = {}
        for m in MECHANISMS:
            out[f"counter.{m}.attempted"] = self.attempted[m]
            out[f"counter.{m}.accepted"] = self.accepted[m]
            out[f"counter.{m}.pauli_rejected"] = self.pauli_rejected[m]
        out["counter.candidates"] = self.candidates
        out["counter.null_events"] = self.null_events
        out["counter.ee_degenerate"] = self.ee_degenerate
        return out


@dataclass
class TimeSeries:
    """Uniformly sampled observable traces."""

    t: np.ndarray
    mean_energy: np.ndarray
    vx: np.ndarray
    vy: np.ndarray
    density: np.ndarray


@dataclass
class Snapshot:
    """Occupation-fraction grid at one instant, with physical cell centers."""

    t_ps: float
    f: np.ndarray          # (n_k, n_k), index [i, j] = (x, y)
    centers_x: np.ndarray  # physical k_x centers at snapshot time
    centers_y: np.ndarray


@dataclass
class RunResult:
    config: SimConfig
    timeseries: TimeSeries
    snapshots: list
    counters: EventCounters
    metadata: dict


def collision_loop(total_rate, window: float, alpha: float, rng) -> tuple[list, list]:
    """Null-collision candidate stream over one window (diagnostic form).

    ``total_rate`` is either a constant rate or a zero-argument callable
    reevaluated before every flight.  Returns the candidate times and, per
    candidate, whether it was real (probability 1/alpha).
    """
    if window <= 0:
        raise ValueError("window must be positive")
    get = total_rate if callable(total_rate) else (lambda: total_rate)
    inv_alpha = 1.0 / alpha
    t = 0.0
    times: list[float] = []
    real: list[bool] = []
    while True:
        bounded = alpha * get()
        if bounded <= 0.0:
            break
        t -= math.log(rng.random()) / bounded
        if t >= window:
            break
        times.append(t)
        real.append(rng.random() < inv_alpha)
    return times, real


def select_mechanism(rates: tuple, lambda_ee: float, rng) -> str:
    """Categorical draw over the five phonon channels plus e-e."""
    total = sum(rates) + lambda_ee
    if total <= 0.0:
        raise ValueError("mechanism selection needs a positive total rate")
    x = rng.random() * total
    acc = 0.0
    for name, rate in zip(CHANNELS, rates):
        acc += rate
        if x < acc:
            return name
    return "ee"


class _Simulation:
    """One run's mutable state; `execute` drives it to completion."""

    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        self.u = DEFAULT_UNITS
        self.grid = KGrid(k_max=cfg.k_max_per_nm, n_k=cfg.n_k)
        self.phonons = PhononParams(T=cfg.temperature_K)
        self.coefs = self.phonons.coefficients(u=self.u)
        self.screen = ScreeningParams.from_fermi_level(
            cfg.fermi_level_eV, cfg.kappa_dielectric, u=self.u
        )
        self.c_ee = ee_mod.coulomb_prefactor(
            self.grid.dk, cfg.m_beta, cfg.kappa_dielectric, cfg.ee_calibration, u=self.u
        )
        nodes = ee_mod.BetaMesh(cfg.m_beta).nodes()
        self.cos_b = np.cos(nodes)
        self.sin_b = np.sin(nodes)
        self.cos_b_list = self.cos_b.tolist()
        self.sin_b_list = self.sin_b.tolist()
        self.rng = np.random.default_rng(cfg.seed)
        self.force_x = kv_per_cm_to_ev_per_nm(cfg.field_kv_per_cm_x)
        self.force_y = kv_per_cm_to_ev_per_nm(cfg.field_kv_per_cm_y)
        self.counters = EventCounters()
        self.phase_s = {p: 0.0 for p in PHASES}

        self.occ_field, self.particles = init_from_fermi_dirac(
            self.grid, cfg.temperature_K, cfg.fermi_level_eV, cfg.n_particles_target,
            self.rng, u=self.u,
        )
        self.n_p = len(self.particles)
        if cfg.ee_mode != "off" and self.n_p < 2:
            raise ConfigurationError("e-e scattering needs at least 2 particles")
        self.shift = ShiftState()
        self.centers_rel = self.grid.centers()
        self.density = continuum_density(self.occ_field, self.grid, u=self.u)
        self.inv_alpha = 1.0 / cfg.alpha_bound

        n_rec = cfg.n_steps // cfg.record_every + 1
        self.rec_t = np.empty(n_rec)
        self.rec_eps = np.empty(n_rec)
        self.rec_vx = np.empty(n_rec)
        self.rec_vy = np.empty(n_rec)
        self.n_rec = 0
        self.snapshots: list[Snapshot] = []
        self.snapshot_steps = {
            int(round(t / cfg.dt_ps)): t for t in cfg.snapshot_times_ps
        }

    # -- rate evaluation -------------------------------------------------

    def _lambda_batch(self, kx_phys: np.ndarray, ky_phys: np.ndarray) -> np.ndarray:
        cfg = self.cfg
        if cfg.ee_mode == "off":
            return np.zeros(self.n_p)
        if cfg.ee_mode == "fullsum":
            occ = self.occ_field.occ
            ii, jj = np.nonzero(occ > 0)
            cx = self.centers_rel[ii] + self.shift.shift_x
            cy = self.centers_rel[jj] + self.shift.shift_y
            f_occ = occ[ii, jj] / float(self.occ_field.m_norm)
            return ee_mod.fullsum_rates_batch(
                kx_phys, ky_phys, cx, cy, f_occ, self.cos_b, self.sin_b,
                self.screen, self.c_ee,
            )
        # sampled: one fresh uniform partner set per particle, self excluded
        n_s = cfg.n_partner_samples
        idx = self.rng.integers(0, self.n_p - 1, size=(self.n_p, n_s))
        idx += idx >= np.arange(self.n_p)[:, None]
        px = self.particles.kx[idx] + self.shift.shift_x
        py = self.particles.ky[idx] + self.shift.shift_y
        return ee_mod.sampled_rates_batch(
            kx_phys, ky_phys, px, py, self.n_p / self.occ_field.m_norm,
            self.cos_b, self.sin_b, self.screen, self.c_ee,
        )

    def _lambda_scalar(self, pid: int, kx: float, ky: float) -> float:
        cfg = self.cfg
        if cfg.ee_mode == "off":
            return 0.0
        if cfg.ee_mode == "fullsum":
            occ = self.occ_field.occ
            ii, jj = np.nonzero(occ > 0)
            cx = self.centers_rel[ii] + self.shift.shift_x
            cy = self.centers_rel[jj] + self.shift.shift_y
            f_occ = occ[ii, jj] / float(self.occ_field.m_norm)
            return float(
                ee_mod.fullsum_rates_batch(
                    np.array([kx]), np.array([ky]), cx, cy, f_occ,
                    self.cos_b, self.sin_b, self.screen, self.c_ee,
                )[0]
            )
        total = 0.0
        pkx = self.particles.kx
        pky = self.particles.ky
        for _ in range(cfg.n_partner_samples):
            j = int(self.rng.integers(0, self.n_p - 1))
            if j >= pid:
                j += 1
            total += ee_mod._pair_beta_sum_scalar(
                kx, ky,
                float(pkx[j]) + self.shift.shift_x,
                float(pky[j]) + self.shift.shift_y,
                self.cos_b_list, self.sin_b_list,
                self.screen.C_eps, self.screen.k_F,
            )
        mean = total / cfg.n_partner_samples
        return self.c_ee * (self.n_p / self.occ_field.m_norm) * mean


    # -- event execution -------------------------------------------------

    def _phys(self, pid: int) -> tuple[float, float]:
        return (
            float(self.particles.kx[pid]) + self.shift.shift_x,
            float(self.particles.ky[pid]) + self.shift.shift_y,
        )

    def _execute_eph(self, pid: int, channel: str) -> None:
        c = self.counters
        c.attempted[channel] += 1
        kx, ky = self._phys(pid)
        nkx, nky = sample_eph_final_state(kx, ky, channel, self.phonons, self.rng, u=self.u)
        rel_x = nkx - self.shift.shift_x
        rel_y = nky - self.shift.shift_y
        dest = cell_of(rel_x, rel_y, self.grid)
        src = (int(self.particles.ci[pid]), int(self.particles.cj[pid]))
        if self.cfg.pauli_disabled or pauli_accept_single(src, dest, self.occ_field, self.rng):
            apply_transition(
                self.particles, self.occ_field, (pid,), (rel_x,), (rel_y,), (dest,)
            )
            c.accepted[channel] += 1
        else:
            c.pauli_rejected[channel] += 1

    def _execute_ee(self, pid: int) -> None:
        c = self.counters
        c.attempted["ee"] += 1
        j = int(self.rng.integers(0, self.n_p - 1))
        if j >= pid:
            j += 1
        k1x, k1y = self._phys(pid)
        k2x, k2y = self._phys(j)
        geom = ee_mod.ellipse_from_pair(k1x, k1y, k2x, k2y)
        if geom.degenerate:
            c.ee_degenerate += 1
            return
        beta = 2.0 * math.pi * self.rng.random()
        k1px, k1py, k2px, k2py = ee_mod.final_pair(geom, k1x, k1y, k2x, k2y, beta)
        rel1 = (k1px - self.shift.shift_x, k1py - self.shift.shift_y)
        rel2 = (k2px - self.shift.shift_x, k2py - self.shift.shift_y)
        dest1 = cell_of(rel1[0], rel1[1], self.grid)
        dest2 = cell_of(rel2[0], rel2[1], self.grid)
        src1 = (int(self.particles.ci[pid]), int(self.particles.cj[pid]))
        src2 = (int(self.particles.ci[j]), int(self.particles.cj[j]))
        if self.cfg.pauli_disabled or pauli_accept_pair(
            src1, src2, dest1, dest2, self.occ_field, self.rng
        ):
            apply_transition(
                self.particles,
                self.occ_field,
                (pid, j),
                (rel1[0], rel2[0]),
                (rel1[1], rel2[1]),
                (dest1, dest2),
            )
            c.accepted["ee"] += 1
        else:
            c.pauli_rejected["ee"] += 1

    def _finish_window(self, pid: int, t_loc: float, lam: float) -> None:
        """Process the pending candidate of ``pid`` and the rest of its window.

        The first candidate keeps the rate values it was drawn with; channel
        rates are recomputed from the particle's current energy at selection
        time, so infeasible emission channels carry zero weight even if an
        earlier pair event moved this particle.  Later flights re-evaluate
        everything against the live state.
        """
        cfg = self.cfg
        dt = cfg.dt_ps
        rng = self.rng
        counters = self.counters
        zeros5 = (0.0, 0.0, 0.0, 0.0, 0.0)
        while True:
            counters.candidates += 1
            if rng.random() < self.inv_alpha:
                kx, ky = self._phys(pid)
                eps = self.u.hbar_vf * math.hypot(kx, ky)
                g5 = zeros5 if cfg.eph_disabled else eph_channel_rates_scalar(eps, self.coefs)
                mech = select_mechanism(g5, lam, rng)
                if mech == "ee":
                    self._execute_ee(pid)
                else:
                    self._execute_eph(pid, mech)
            else:
                counters.null_events += 1
            # Next flight, from the (possibly updated) current state.
            kx, ky = self._phys(pid)
            eps = self.u.hbar_vf * math.hypot(kx, ky)
            g5 = zeros5 if cfg.eph_disabled else eph_channel_rates_scalar(eps, self.coefs)
            lam = self._lambda_scalar(pid, kx, ky)
            bounded = cfg.alpha_bound * (
                g5[0] + g5[1] + g5[2] + g5[3] + g5[4] + lam
            )
            if bounded <= 0.0:
                return
            t_loc -= math.log(rng.random()) / bounded
            if t_loc >= dt:
                return

    # -- main loop ---------------------------------------------------------

    def _record(self, t_ps: float) -> None:
        obs = observables(self.particles, self.shift, self.density, u=self.u)
        i = self.n_rec
        self.rec_t[i] = t_ps
        self.rec_eps[i] = obs.mean_energy
        self.rec_vx[i] = obs.mean_vx
        self.rec_vy[i] = obs.mean_vy
        self.n_rec += 1

    def _take_snapshot(self, t_ps: float) -> None:
        self.snapshots.append(
            Snapshot(
                t_ps=t_ps,
                f=self.occ_field.fractions().copy(),
                centers_x=self.centers_rel + self.shift.shift_x,
                centers_y=self.centers_rel + self.shift.shift_y,
            )
        )

    def execute(self) -> RunResult:
        cfg = self.cfg
        t_start = time.perf_counter()
        clock = time.perf_counter
        dt = cfg.dt_ps
        self._record(0.0)
        if 0 in self.snapshot_steps:
            self._take_snapshot(0.0)
        n_p0 = self.n_p
        for step in range(1, cfg.n_steps + 1):
            t0 = clock()
            apply_drift(
                self.shift, self.occ_field, self.particles,
                self.force_x, self.force_y, dt, self.grid,
                rebase_threshold=cfg.rebase_threshold_cells, u=self.u,
            )
            t1 = clock()
            kx_phys = self.particles.kx + self.shift.shift_x
            ky_phys = self.particles.ky + self.shift.shift_y
            if cfg.eph_disabled:
                gamma_ph = np.zeros(self.n_p)
            else:
                eps = self.u.hbar_vf * np.hypot(kx_phys, ky_phys)
                gamma_ph = eph_total_rate_array(eps, self.coefs)
            t2 = clock()
            lam = self._lambda_batch(kx_phys, ky_phys)
            t3 = clock()
            bounded = cfg.alpha_bound * (gamma_ph + lam)
            u_draw = self.rng.random(self.n_p)
            with np.errstate(divide="ignore"):
                t_ff = np.where(bounded > 0.0, -np.log(u_draw) / bounded, np.inf)
            pending = np.nonzero(t_ff < dt)[0]
            t4 = clock()
            if len(pending) > 0:
                for pid in self.rng.permutation(pending):
                    p = int(pid)
                    self._finish_window(p, float(t_ff[p]), float(lam[p]))
            t5 = clock()
            if step % cfg.record_every == 0:
                self._record(step * dt)
            if step in self.snapshot_steps:
                self._take_snapshot(step * dt)
            t6 = clock()
            ph = self.phase_s
            ph["drift"] += t1 - t0
            ph["rates_ph"] += t2 - t1
            ph["rates_ee"] += t3 - t2
            ph["flights"] += t4 - t3
            ph["events"] += t5 - t4
            ph["record"] += t6 - t5
            if int(self.occ_field.occ.sum()) != n_p0:
                raise RuntimeError("particle number drifted; occupancy corrupted")

        self.counters.wall_clock_s = time.perf_counter() - t_start
        self.counters.check_identity()
        ts = TimeSeries(
            t=self.rec_t[: self.n_rec].copy(),
            mean_energy=self.rec_eps[: self.n_rec].copy(),
            vx=self.rec_vx[: self.n_rec].copy(),
            vy=self.rec_vy[: self.n_rec].copy(),
            density=np.full(self.n_rec, self.density),
        )
        meta = self._metadata()
        return RunResult(
            config=cfg,
            timeseries=ts,
            snapshots=self.snapshots,
            counters=self.counters,
            metadata=meta,
        )

    def _metadata(self) -> dict:
        meta: dict = {
            "schema": "graphemc-run-v1",
            "n_particles": self.n_p,
            "m_norm": self.occ_field.m_norm,
            "density_per_cm2": self.density,
            "ee_prefactor_per_nm_ps": self.c_ee,
            "grid_dk_per_nm": self.grid.dk,
            "subcell_phase_final": subcell_phase(self.shift, self.grid),
            "rebase_count_x": self.shift.rebase_x,
            "rebase_count_y": self.shift.rebase_y,
            "wall_clock_s": self.counters.wall_clock_s,
        }
        for phase in PHASES:
            meta[f"phase.{phase}_s"] = self.phase_s[phase]
        meta.update(self.counters.flatten())
        return meta


def run(cfg: SimConfig) -> RunResult:
    """Run one simulation to completion; deterministic for (config, seed)."""
    return _Simulation(cfg).execute()


def runtime_benchmark(configs: list[SimConfig], labels: list[str] | None = None) -> list[dict]:
    """Run each config and tabulate wall clock plus per-phase timings."""
    rows = []
    for i, cfg in enumerate(configs):
        result = run(cfg)
        row = {
            "label": labels[i] if labels else f"run{i}",
            "ee_mode": cfg.ee_mode,
            "n_partner_samples": cfg.n_partner_samples,
            "n_particles": result.metadata["n_particles"],
            "wall_clock_s": result.metadata["wall_clock_s"],
        }
        for phase in PHASES:
            row[f"{phase}_s"] = result.metadata[f"phase.{phase}_s"]
        rows.append(row)
    return rows
