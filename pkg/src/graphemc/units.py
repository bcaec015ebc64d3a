"""Internal unit system and conversion helpers.

All simulation quantities are kept in (eV, nm, ps) working units:

* energy        eV
* length        nm
* time          ps
* wavevector    1/nm
* rate          1/ps
* velocity      nm/ps
* field force   eV/nm   (e*E, i.e. force on one carrier)

Rates come out O(1)-O(1e3) per ps and the grid-drift periods are O(0.1) ps,
so everything stays comfortably inside double precision.
"""
from __future__ import annotations

from dataclasses import dataclass

# Reduced Planck constant, eV*ps.
HBAR = 6.582119514e-4

# Boltzmann constant, eV/K.
KB = 8.617333e-5

# Coulomb coupling e^2/(4*pi*eps0), eV*nm.
E2_COULOMB = 1.4399645

# Fermi velocity of monolayer graphene, nm/ps (1.0e6 m/s).
V_F = 1000.0

# Spin and valley degeneracies.
G_S = 2
G_V = 2


def kv_per_cm_to_ev_per_nm(field_kv_per_cm: float) -> float:
    """Convert a field in kV/cm to the force e*E in eV/nm."""
    return 1.0e-4 * field_kv_per_cm


def m_per_s_to_nm_per_ps(v: float) -> float:
    return 1.0e-3 * v


def g_per_cm2_to_ev_ps2_per_nm4(rho: float) -> float:
    """Convert an areal mass density from g/cm^2 to eV*ps^2/nm^4.

    1 kg = 1 J*s^2/m^2 = 6.241509074e18 eV * (1e12 ps)^2 / (1e9 nm)^2.
    """
    kg_to_internal = 6.241509074e18 * 1.0e24 / 1.0e18  # eV*ps^2/nm^2
    return rho * 1.0e-3 * kg_to_internal / 1.0e14  # g->kg, cm^2->nm^2


def ev_per_cm_to_ev_per_nm(d: float) -> float:
    return d / 1.0e7


def per_nm2_to_per_cm2(density: float) -> float:
    return density * 1.0e14


@dataclass(frozen=True)
class UnitSystem:
    """Bundle of the fixed constants of the working unit system.

    ``vF`` is the only member that is physically adjustable; the default is
    the graphene Fermi velocity used throughout.
    """

    hbar: float = HBAR
    kB: float = KB
    e2_coulomb: float = E2_COULOMB
    vF: float = V_F

    def __post_init__(self) -> None:
        if self.vF <= 0:
            raise ValueError("vF must be positive")

    @property
    def hbar_vf(self) -> float:
        """hbar * vF in eV*nm, the Dirac-cone slope."""
        return self.hbar * self.vF


DEFAULT_UNITS = UnitSystem()
