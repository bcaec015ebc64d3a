"""Occupancy-limited momentum grid, co-moving drift, and Pauli bookkeeping.

Particles are stored grid-relative; the physical wavevector of particle i is

    k_phys = k_rel + k_shift(t),

where k_shift accumulates the field-induced drift.  Drift therefore never
touches particle coordinates or the occupancy array.  Whenever the shift
along an axis accumulates a whole cell spacing, the state is rebased: the
occupancy array is rolled one cell, all k_rel move by one spacing, and the
shift is reduced by one spacing, leaving every physical wavevector unchanged
to rounding.  Cell-quantized evaluation of the Pauli factors under this
continuously sliding shift is what produces the grid-locked oscillation in
recorded observables.

Pauli blocking is statistical: a proposed destination cell is accepted with
probability 1 - occ_eff/M, where M is the maximum initial cell occupancy and
occ_eff discounts the movers themselves.  Nothing structurally prevents
occ > M; excess is tracked as a diagnostic, not an error.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import dirac_energy, fermi_dirac
from .units import DEFAULT_UNITS, G_S, G_V, UnitSystem, per_nm2_to_per_cm2


class DomainEscapeError(RuntimeError):
    """A particle or a rebase would leave the momentum-space domain.

    The domain is sized so that this indicates misconfiguration; clamping
    silently would corrupt the physics.
    """


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class KGrid:
    """Uniform N_k x N_k grid over [-k_max, k_max]^2."""

    k_max: float
    n_k: int

    def __post_init__(self) -> None:
        if self.k_max <= 0:
            raise ConfigurationError("k_max must be positive")
        if self.n_k < 2 or self.n_k % 2 != 0:
            raise ConfigurationError("n_k must be even and >= 2")

    @property
    def dk(self) -> float:
        return 2.0 * self.k_max / self.n_k

    def centers(self) -> np.ndarray:
        """Cell-center coordinates along one axis."""
        return -self.k_max + (np.arange(self.n_k) + 0.5) * self.dk


def cell_of(kx: float, ky: float, grid: KGrid) -> tuple[int, int]:
    """Cell index (i, j) of a grid-relative wavevector, floor convention.

    Raises DomainEscapeError outside [-k_max, k_max]^2; the upper boundary
    is clamped into the last cell.
    """
    if not (-grid.k_max <= kx <= grid.k_max and -grid.k_max <= ky <= grid.k_max):
        raise DomainEscapeError(f"wavevector ({kx}, {ky}) outside the momentum domain")
    inv_dk = 1.0 / grid.dk
    i = int((kx + grid.k_max) * inv_dk)
    j = int((ky + grid.k_max) * inv_dk)
    n1 = grid.n_k - 1
    return (n1 if i > n1 else i, n1 if j > n1 else j)


@dataclass
class OccupancyField:
    """Integer simulated-particle counts per cell plus the normalization M."""

    occ: np.ndarray
    m_norm: int

    def __post_init__(self) -> None:
        if self.m_norm <= 0:
            raise ConfigurationError("occupancy normalization M must be positive")

    @property
    def n_particles(self) -> int:
        return int(self.occ.sum())

    def fractions(self) -> np.ndarray:
        return self.occ / float(self.m_norm)


@dataclass
class ParticleStore:
    """Grid-relative wavevectors and the per-particle cell-index cache."""

    kx: np.ndarray
    ky: np.ndarray
    ci: np.ndarray
    cj: np.ndarray

    def __len__(self) -> int:
        return len(self.kx)


@dataclass
class ShiftState:
    """Accumulated drift of the co-moving grid, kept sub-cell by rebases."""

    shift_x: float = 0.0
    shift_y: float = 0.0
    rebase_x: int = 0
    rebase_y: int = 0

    def as_tuple(self) -> tuple[float, float]:
        return (self.shift_x, self.shift_y)


@dataclass(frozen=True)
class Observables:
    density_per_cm2: float
    mean_energy: float
    mean_vx: float
    mean_vy: float


def init_from_fermi_dirac(
    grid: KGrid,
    temperature: float,
    eps_fermi: float,
    n_target: int,
    rng,
    *,
    u: UnitSystem = DEFAULT_UNITS,
) -> tuple[OccupancyField, ParticleStore]:
    """Populate the grid from the equilibrium distribution.

    Cell occupancies are n_ij = N_target * f(k_ij) / sum f, rounded to
    integers; M is the maximum initial occupancy and stays frozen for the
    whole run.  Particles are placed uniformly inside their cells.
    """
    if n_target < 1:
        raise ConfigurationError("target particle count must be >= 1")
    cx = grid.centers()
    kxx, kyy = np.meshgrid(cx, cx, indexing="ij")
    f0 = fermi_dirac(dirac_energy(kxx, kyy, u=u), temperature, eps_fermi, u=u)
    occ = np.rint(n_target * f0 / f0.sum()).astype(np.int64)
    n_p = int(occ.sum())
    if n_p == 0:
        raise ConfigurationError(
            "all cell occupancies rounded to zero; increase the particle count"
        )
    m_norm = int(occ.max())

    ii, jj = np.nonzero(occ)
    counts = occ[ii, jj]
    ci = np.repeat(ii, counts).astype(np.int64)
    cj = np.repeat(jj, counts).astype(np.int64)
    kx = cx[ci] + (rng.random(n_p) - 0.5) * grid.dk
    ky = cx[cj] + (rng.random(n_p) - 0.5) * grid.dk
    return (
        OccupancyField(occ=occ, m_norm=m_norm),
        ParticleStore(kx=kx, ky=ky, ci=ci, cj=cj),
    )


def subcell_phase(shift: ShiftState, grid: KGrid) -> float:
    """Fractional part of the drift shift along x, in cell-spacing units."""
    x = shift.shift_x / grid.dk
    return x - math.floor(x)


def apply_drift(
    shift: ShiftState,
    occ_field: OccupancyField,
    particles: ParticleStore,
    force_x: float,
    force_y: float,
    dt: float,
    grid: KGrid,
    *,
    rebase_threshold: float = 1.0,
    u: UnitSystem = DEFAULT_UNITS,
) -> None:
    """Advance the co-moving shift by (e*E/hbar)*dt and rebase if needed.

    ``force_x/y`` are e*E in eV/nm; positive force drifts the distribution
    toward positive k (positive reported drift velocity).  The rebase keeps
    each physical wavevector k_rel + k_shift unchanged to rounding and never
    interpolates occupancies.
    """
    if dt <= 0:
        raise ConfigurationError("dt must be positive")
    shift.shift_x += force_x * dt / u.hbar
    shift.shift_y += force_y * dt / u.hbar
    if rebase_threshold <= 0:
        return
    dk = grid.dk
    limit = rebase_threshold * dk
    while shift.shift_x >= limit:
        _rebase_axis(shift, occ_field, particles, grid, axis=0, direction=+1)
    while shift.shift_x <= -limit:
        _rebase_axis(shift, occ_field, particles, grid, axis=0, direction=-1)
    while shift.shift_y >= limit:
        _rebase_axis(shift, occ_field, particles, grid, axis=1, direction=+1)
    while shift.shift_y <= -limit:
        _rebase_axis(shift, occ_field, particles, grid, axis=1, direction=-1)


def _rebase_axis(
    shift: ShiftState,
    occ_field: OccupancyField,
    particles: ParticleStore,
    grid: KGrid,
    axis: int,
    direction: int,
) -> None:
    """Move one whole cell of shift into particle coordinates and the array."""
    dk = grid.dk
    occ = occ_field.occ
    edge = -1 if direction > 0 else 0
    if axis == 0:
        if occ[edge, :].any():
            raise DomainEscapeError("rebase would push occupied cells off the grid (x)")
        shift.shift_x -= direction * dk
        particles.kx += direction * dk
        particles.ci += direction
        shift.rebase_x += direction
        occ_field.occ = np.roll(occ, direction, axis=0)
    else:
        if occ[:, edge].any():
            raise DomainEscapeError("rebase would push occupied cells off the grid (y)")
        shift.shift_y -= direction * dk
        particles.ky += direction * dk
        particles.cj += direction
        shift.rebase_y += direction
        occ_field.occ = np.roll(occ, direction, axis=1)
    # The wrapped-around edge row is empty by the check above; make it explicit.
    if axis == 0:
        occ_field.occ[0 if direction > 0 else -1, :] = 0
    else:
        occ_field.occ[:, 0 if direction > 0 else -1] = 0


def pauli_accept_single(
    src: tuple[int, int],
    dest: tuple[int, int],
    occ_field: OccupancyField,
    rng,
) -> bool:
    """Occupancy rejection test for a one-particle move.

    The mover does not block itself: if dest == src the destination count is
    discounted by one.  Accept iff the drawn eta exceeds occ_eff/M.
    """
    occ_eff = int(occ_field.occ[dest])
    if dest == src:
        occ_eff -= 1
    f_eff = occ_eff / float(occ_field.m_norm)
    return f_eff < rng.random()


def pauli_accept_pair(
    src1: tuple[int, int],
    src2: tuple[int, int],
    dest1: tuple[int, int],
    dest2: tuple[int, int],
    occ_field: OccupancyField,
    rng,
) -> bool:
    """Sequential occupancy test for the two destinations of a pair event.

    Both movers' initial cells are discounted wherever they coincide with a
    destination; when both final states land in the same cell the second
    test sees the first placement.  The second eta is only drawn if the
    first test passes (same acceptance probability, one fewer draw).
    """
    occ = occ_field.occ
    m = float(occ_field.m_norm)
    occ_eff1 = int(occ[dest1]) - (dest1 == src1) - (dest1 == src2)
    if occ_eff1 / m >= rng.random():
        return False
    occ_eff2 = int(occ[dest2]) - (dest2 == src1) - (dest2 == src2) + (dest2 == dest1)
    return occ_eff2 / m < rng.random()


def apply_transition(
    particles: ParticleStore,
    occ_field: OccupancyField,
    particle_ids: tuple[int, ...],
    new_kx: tuple[float, ...],
    new_ky: tuple[float, ...],
    new_cells: tuple[tuple[int, int], ...],
) -> None:
    """Commit accepted moves: update counts, coordinates, and cell caches."""
    occ = occ_field.occ
    for pid, kx, ky, cell in zip(particle_ids, new_kx, new_ky, new_cells):
        src = (int(particles.ci[pid]), int(particles.cj[pid]))
        occ[src] -= 1
        if occ[src] < 0:
            raise RuntimeError(f"negative occupancy at cell {src}")
        occ[cell] += 1
        particles.kx[pid] = kx
        particles.ky[pid] = ky
        particles.ci[pid] = cell[0]
        particles.cj[pid] = cell[1]


def continuum_density(
    occ_field: OccupancyField, grid: KGrid, *, u: UnitSystem = DEFAULT_UNITS
) -> float:
    """Carrier density (1/cm^2) from the discrete occupation fractions.

    rho = g_s g_v / (2 pi)^2 * sum f_ij * dk^2, evaluated at t = 0 and
    constant thereafter because the particle number is conserved.
    """
    total_f = occ_field.occ.sum() / float(occ_field.m_norm)
    rho_nm = (G_S * G_V) / (2.0 * math.pi) ** 2 * total_f * grid.dk**2
    return per_nm2_to_per_cm2(rho_nm)


def observables(
    particles: ParticleStore,
    shift: ShiftState,
    density_per_cm2: float,
    *,
    u: UnitSystem = DEFAULT_UNITS,
) -> Observables:
    """Particle-average mean energy (eV) and mean velocity (nm/ps)."""
    if len(particles) < 1:
        raise ConfigurationError("observables need at least one particle")
    kx = particles.kx + shift.shift_x
    ky = particles.ky + shift.shift_y
    norm = np.hypot(kx, ky)
    mean_energy = u.hbar_vf * norm.mean()
    with np.errstate(invalid="ignore", divide="ignore"):
        inv = np.where(norm > 0.0, 1.0 / norm, 0.0)
    mean_vx = u.vF * float((kx * inv).mean())
    mean_vy = u.vF * float((ky * inv).mean())
    return Observables(
        density_per_cm2=density_per_cm2,
        mean_energy=float(mean_energy),
        mean_vx=mean_vx,
        mean_vy=mean_vy,
    )
