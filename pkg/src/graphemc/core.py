"""Dirac-cone kinematics, equilibrium distributions, and phonon scattering.

The electron-phonon model has five channels: an effective elastic acoustic
channel (equipartition approximation), and emission/absorption of an
effective optical phonon (O) and of an intervalley phonon (K).  Rates are
isotropic functions of the carrier energy eps = hbar*vF*|k|:

    ac:    Gamma = D_ac^2 kB T / (4 hbar^3 vF^2 rho_m v_p^2) * eps
    X em:  Gamma = D_X^2 / (rho_m omega_X hbar^2 vF^2) * (eps - hw_X)
                   * (n_X + 1) * Theta(eps - hw_X)
    X ab:  Gamma = D_X^2 / (rho_m omega_X hbar^2 vF^2) * (eps + hw_X) * n_X

with n_X the Bose occupation of the phonon at temperature T.  All functions
accept scalars or numpy arrays for the energy argument.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import units
from .units import DEFAULT_UNITS, UnitSystem

# Channel identifiers, in the fixed order used for mechanism selection.
CHANNELS = ("ac", "o_em", "o_ab", "k_em", "k_ab")

_TWO_PI = 2.0 * math.pi


def dirac_energy(kx, ky, *, u: UnitSystem = DEFAULT_UNITS):
    """Conduction-band energy eps = hbar*vF*|k| in eV."""
    return u.hbar_vf * np.hypot(kx, ky)


def group_velocity(kx, ky, *, u: UnitSystem = DEFAULT_UNITS):
    """Group velocity vF * k/|k| in nm/ps; zero vector at k = 0.

    The Dirac point is singular; returning zero there keeps ensemble
    averages finite without affecting anything of nonzero measure.
    """
    norm = np.hypot(kx, ky)
    with np.errstate(invalid="ignore", divide="ignore"):
        vx = np.where(norm > 0.0, u.vF * kx / norm, 0.0)
        vy = np.where(norm > 0.0, u.vF * ky / norm, 0.0)
    if np.isscalar(kx) or (isinstance(kx, np.ndarray) and kx.ndim == 0):
        return float(vx), float(vy)
    return vx, vy


def fermi_dirac(eps, temperature: float, eps_fermi: float, *, u: UnitSystem = DEFAULT_UNITS):
    """Fermi-Dirac occupation 1/(1 + exp((eps - eps_F)/(kB T)))."""
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    x = np.asarray((np.asarray(eps, dtype=float) - eps_fermi) / (u.kB * temperature))
    # Overflow-safe logistic: 1/(1+e^x) = e^-x/(1+e^-x) for x >= 0.
    out = np.empty_like(x)
    pos = x >= 0
    ex = np.exp(-x[pos])
    out[pos] = ex / (1.0 + ex)
    out[~pos] = 1.0 / (1.0 + np.exp(x[~pos]))
    if np.isscalar(eps):
        return float(out)
    return out


def bose_occupation(hw: float, temperature: float, *, u: UnitSystem = DEFAULT_UNITS) -> float:
    """Bose occupation n = 1/(exp(hw/(kB T)) - 1) for a phonon of energy hw."""
    if hw <= 0:
        raise ValueError("phonon energy must be positive")
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    return 1.0 / math.expm1(hw / (u.kB * temperature))


@dataclass(frozen=True)
class PhononParams:
    """Material constants of the phonon model, in internal units.

    Defaults are the monolayer-graphene set used throughout:
    D_ac = 6.8 eV, rho_m = 7.6e-8 g/cm^2, v_p = 2.13e4 m/s,
    hw_O = 164.6 meV, hw_K = 124 meV, D_O = 1e9 eV/cm, D_K = 3.5e8 eV/cm.
    """

    D_ac: float = 6.8                                  # eV
    rho_m: float = field(
        default_factory=lambda: units.g_per_cm2_to_ev_ps2_per_nm4(7.6e-8)
    )                                                  # eV*ps^2/nm^4
    v_p: float = field(default_factory=lambda: units.m_per_s_to_nm_per_ps(2.13e4))  # nm/ps
    hw_O: float = 0.1646                               # eV
    D_O: float = field(default_factory=lambda: units.ev_per_cm_to_ev_per_nm(1.0e9))  # eV/nm
    hw_K: float = 0.124                                # eV
    D_K: float = field(default_factory=lambda: units.ev_per_cm_to_ev_per_nm(3.5e8))  # eV/nm
    T: float = 300.0                                   # K

    def __post_init__(self) -> None:
        for name in ("D_ac", "rho_m", "v_p", "hw_O", "D_O", "hw_K", "D_K", "T"):
            if getattr(self, name) <= 0:
                raise ValueError(f"PhononParams.{name} must be positive")

    def coefficients(self, *, u: UnitSystem = DEFAULT_UNITS) -> "EphCoefficients":
        """Precompute the linear-rate coefficients and Bose factors."""
        k_ac = self.D_ac**2 * u.kB * self.T / (
            4.0 * u.hbar**3 * u.vF**2 * self.rho_m * self.v_p**2
        )
        omega_o = self.hw_O / u.hbar
        omega_k = self.hw_K / u.hbar
        k_o = self.D_O**2 / (self.rho_m * omega_o * u.hbar**2 * u.vF**2)
        k_k = self.D_K**2 / (self.rho_m * omega_k * u.hbar**2 * u.vF**2)
        return EphCoefficients(
            k_ac=k_ac,
            k_o=k_o,
            k_k=k_k,
            hw_o=self.hw_O,
            hw_k=self.hw_K,
            n_o=bose_occupation(self.hw_O, self.T, u=u),
            n_k=bose_occupation(self.hw_K, self.T, u=u),
        )


@dataclass(frozen=True)
class EphCoefficients:
    """Reduced coefficients: each channel rate is coeff * (energy factor)."""

    k_ac: float  # 1/(eV*ps)
    k_o: float   # 1/(eV*ps)
    k_k: float   # 1/(eV*ps)
    hw_o: float  # eV
    hw_k: float  # eV
    n_o: float
    n_k: float


@dataclass(frozen=True)
class EphRateSet:
    """Per-channel scattering rates (1/ps) at one energy."""

    gamma_ac: float
    gamma_o_em: float
    gamma_o_ab: float
    gamma_k_em: float
    gamma_k_ab: float

    @property
    def total(self) -> float:
        return (
            self.gamma_ac
            + self.gamma_o_em
            + self.gamma_o_ab
            + self.gamma_k_em
            + self.gamma_k_ab
        )

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (
            self.gamma_ac,
            self.gamma_o_em,
            self.gamma_o_ab,
            self.gamma_k_em,
            self.gamma_k_ab,
        )


def eph_rates(eps: float, p: PhononParams, *, u: UnitSystem = DEFAULT_UNITS) -> EphRateSet:
    """All five phonon channel rates at carrier energy eps >= 0."""
    if eps < 0:
        raise ValueError("carrier energy must be non-negative")
    c = p.coefficients(u=u)
    return EphRateSet(
        gamma_ac=c.k_ac * eps,
        gamma_o_em=c.k_o * (eps - c.hw_o) * (c.n_o + 1.0) if eps > c.hw_o else 0.0,
        gamma_o_ab=c.k_o * (eps + c.hw_o) * c.n_o,
        gamma_k_em=c.k_k * (eps - c.hw_k) * (c.n_k + 1.0) if eps > c.hw_k else 0.0,
        gamma_k_ab=c.k_k * (eps + c.hw_k) * c.n_k,
    )


def eph_total_rate_array(eps: np.ndarray, c: EphCoefficients) -> np.ndarray:
    """Vectorized total phonon rate over an array of energies."""
    em_o = np.maximum(eps - c.hw_o, 0.0)
    em_k = np.maximum(eps - c.hw_k, 0.0)
    return (
        c.k_ac * eps
        + c.k_o * (em_o * (c.n_o + 1.0) + (eps + c.hw_o) * c.n_o)
        + c.k_k * (em_k * (c.n_k + 1.0) + (eps + c.hw_k) * c.n_k)
    )


def eph_channel_rates_scalar(eps: float, c: EphCoefficients) -> tuple[float, float, float, float, float]:
    """Scalar per-channel rates, ordered as CHANNELS."""
    return (
        c.k_ac * eps,
        c.k_o * (eps - c.hw_o) * (c.n_o + 1.0) if eps > c.hw_o else 0.0,
        c.k_o * (eps + c.hw_o) * c.n_o,
        c.k_k * (eps - c.hw_k) * (c.n_k + 1.0) if eps > c.hw_k else 0.0,
        c.k_k * (eps + c.hw_k) * c.n_k,
    )


def channel_energy_shift(channel: str, p: PhononParams) -> float:
    """Post-collision energy change for the channel (0 for elastic acoustic)."""
    return {
        "ac": 0.0,
        "o_em": -p.hw_O,
        "o_ab": +p.hw_O,
        "k_em": -p.hw_K,
        "k_ab": +p.hw_K,
    }[channel]


def sample_scattering_angle(channel: str, rng) -> float:
    """Scattering angle theta between incoming and outgoing wavevectors.

    Density on [-pi, pi): (1+cos)/2-weighted for the acoustic channel,
    (1-cos)/2-weighted for the K channels, uniform for the optical channel.
    Rejection against the flat envelope (bound 1/pi) is exact and cheap:
    acceptance ratio is 1/2.
    """
    if channel in ("o_em", "o_ab"):
        return _TWO_PI * (rng.random() - 0.5)
    sign = 1.0 if channel == "ac" else -1.0
    if channel not in ("ac", "k_em", "k_ab"):
        raise ValueError(f"unknown channel {channel!r}")
    while True:
        theta = _TWO_PI * (rng.random() - 0.5)
        if rng.random() < 0.5 * (1.0 + sign * math.cos(theta)):
            return theta


def sample_eph_final_state(
    kx: float,
    ky: float,
    channel: str,
    p: PhononParams,
    rng,
    *,
    u: UnitSystem = DEFAULT_UNITS,
) -> tuple[float, float]:
    """Propose the post-collision wavevector for a phonon event.

    The magnitude follows from energy conservation, |k'| = eps'/(hbar vF);
    the direction is the incoming direction rotated by a channel-specific
    random angle.  Emission below threshold is a caller contract violation.
    """
    eps = u.hbar_vf * math.hypot(kx, ky)
    eps_new = eps + channel_energy_shift(channel, p)
    if eps_new < 0:
        raise ValueError(f"emission requested below threshold: eps={eps}, channel={channel}")
    k_new = eps_new / u.hbar_vf
    theta = sample_scattering_angle(channel, rng)
    if kx == 0.0 and ky == 0.0:
        phi0 = 0.0
    else:
        phi0 = math.atan2(ky, kx)
    phi = phi0 + theta
    return k_new * math.cos(phi), k_new * math.sin(phi)
