"""Pauli-consistent ensemble Monte Carlo for graphene transport.

Simulates space-homogeneous conduction-band electron transport in monolayer
graphene under a constant in-plane field, with five phonon channels and
screened intraband electron-electron scattering, on an occupancy-limited
momentum grid.  Includes an analysis toolchain that identifies the
grid-locked oscillation in recorded observables and removes it by harmonic
subtraction at the known drift frequency.
"""
from .config import SimConfig
from .engine import RunResult, run

__all__ = ["SimConfig", "RunResult", "run"]
__version__ = "0.1.0"
