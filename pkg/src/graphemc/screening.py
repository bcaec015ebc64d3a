"""Static RPA screening of the intraband Coulomb interaction.

The screened 2D Coulomb kernel uses the combination eps(q)*q, which stays
finite (and bounded below by C_eps) as q -> 0:

    eps(q)*q = q + C_eps * Pi(q)

with the static polarization

    Pi(q) = 1,                                              q < 2 kF
    Pi(q) = 1 + pi q/(8 kF) - sqrt(q^2 - 4 kF^2)/(2 q)
              - q/(4 kF) * arcsin(2 kF/q),                  q >= 2 kF

which is continuous across q = 2 kF.  The strength constant is

    C_eps = (r_s kF / 2) (g_s g_v)^(3/2),
    r_s   = e^2/(kappa hbar vF) * sqrt(4/(g_s g_v)).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .units import DEFAULT_UNITS, G_S, G_V, UnitSystem


@dataclass(frozen=True)
class ScreeningParams:
    """Derived screening constants for a given Fermi level and background."""

    kappa: float
    eps_F: float   # eV
    k_F: float     # 1/nm
    r_s: float
    C_eps: float   # 1/nm
    g_s: int = G_S
    g_v: int = G_V

    @classmethod
    def from_fermi_level(
        cls,
        eps_F: float,
        kappa: float = 1.0,
        *,
        u: UnitSystem = DEFAULT_UNITS,
    ) -> "ScreeningParams":
        if eps_F <= 0:
            raise ValueError("eps_F must be positive")
        if kappa <= 0:
            raise ValueError("kappa must be positive")
        k_f = eps_F / u.hbar_vf
        r_s = (u.e2_coulomb / (kappa * u.hbar_vf)) * math.sqrt(4.0 / (G_S * G_V))
        c_eps = 0.5 * r_s * k_f * (G_S * G_V) ** 1.5
        return cls(kappa=kappa, eps_F=eps_F, k_F=k_f, r_s=r_s, C_eps=c_eps)


def polarization(q, k_F: float):
    """Static polarization Pi(q); accepts scalar or array q >= 0."""
    if k_F <= 0:
        raise ValueError("k_F must be positive")
    q_arr = np.asarray(q, dtype=float)
    out = np.ones_like(q_arr)
    above = q_arr >= 2.0 * k_F
    if np.any(above):
        qa = q_arr[above]
        out[above] = (
            1.0
            + math.pi * qa / (8.0 * k_F)
            - np.sqrt(qa * qa - 4.0 * k_F * k_F) / (2.0 * qa)
            - qa / (4.0 * k_F) * np.arcsin(2.0 * k_F / qa)
        )
    if np.isscalar(q):
        return float(out)
    return out


def screened_denominator(q, s: ScreeningParams):
    """eps(q)*q = q + C_eps*Pi(q) in 1/nm; strictly positive for q >= 0."""
    return q + s.C_eps * polarization(q, s.k_F)
