"""Post-processing of recorded traces.

The grid-locked artifact appears at the drift recurrence period

    T_grid = hbar * dk / (e * E_x),

so its angular frequency is known exactly from the run configuration; the
harmonic-subtraction pipeline always fits at that fixed frequency (never at
a fitted one).  Period extraction from the data itself is used only to
verify the identification: mean-subtract, FFT, take the dominant nonzero
bin, and refine to sub-bin resolution by parabolic interpolation of the
log magnitude on a zero-padded spectrum.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .units import DEFAULT_UNITS, UnitSystem, kv_per_cm_to_ev_per_nm

# Blocks used for the batch-means standard error of a windowed mean.  Batch
# means stay honest for autocorrelated Monte Carlo traces where the naive
# iid estimate is far too small.
BATCH_BLOCKS = 20

# A spectral peak must exceed this multiple of the median nonzero-frequency
# magnitude to count as a dominant period.
PEAK_OVER_MEDIAN = 4.0


@dataclass(frozen=True)
class SteadyWindow:
    """Time window [t_lo, t_hi] (ps) over which statistics are computed."""

    t_lo: float
    t_hi: float

    def __post_init__(self) -> None:
        if not self.t_lo < self.t_hi:
            raise ValueError("window must satisfy t_lo < t_hi")

    def mask(self, t: np.ndarray) -> np.ndarray:
        eps = 1e-9
        sel = (t >= self.t_lo - eps) & (t <= self.t_hi + eps)
        if not np.any(sel):
            raise ValueError(
                f"window [{self.t_lo}, {self.t_hi}] ps contains no samples"
            )
        return sel


STATS_WINDOW = SteadyWindow(3.0, 5.0)
OSC_WINDOW = SteadyWindow(2.5, 5.0)


@dataclass(frozen=True)
class WindowStats:
    mean: float
    rms: float
    se: float
    n_samples: int


@dataclass(frozen=True)
class HarmonicFit:
    """Least-squares harmonic decomposition at a fixed base frequency."""

    omega: float                 # rad/ps
    order: int
    a0: float
    b: tuple[float, ...]         # sine coefficients, h = 1..order
    c: tuple[float, ...]         # cosine coefficients, h = 1..order
    residual_rms: float

    def oscillation(self, t: np.ndarray) -> np.ndarray:
        """The fitted oscillatory component (without the level a0)."""
        out = np.zeros_like(np.asarray(t, dtype=float))
        for h in range(1, self.order + 1):
            out += self.b[h - 1] * np.sin(h * self.omega * t)
            out += self.c[h - 1] * np.cos(h * self.omega * t)
        return out


def window_stats(t: np.ndarray, y: np.ndarray, w: SteadyWindow) -> WindowStats:
    """Mean, RMS fluctuation, and batch-means SE over the window samples."""
    sel = w.mask(np.asarray(t))
    yw = np.asarray(y, dtype=float)[sel]
    if len(yw) < 2:
        raise ValueError("window must contain at least 2 samples")
    mean = float(yw.mean())
    rms = float(np.sqrt(np.mean((yw - mean) ** 2)))
    blocks = np.array_split(yw, min(BATCH_BLOCKS, len(yw)))
    block_means = np.array([b.mean() for b in blocks])
    se = float(block_means.std(ddof=1) / math.sqrt(len(block_means)))
    return WindowStats(mean=mean, rms=rms, se=se, n_samples=len(yw))


def grid_period(
    dk: float, field_kv_per_cm_x: float, *, u: UnitSystem = DEFAULT_UNITS
) -> float:
    """Grid-locked drift period T = hbar*dk/(e*E_x) in ps."""
    if field_kv_per_cm_x == 0:
        raise ValueError("grid period is undefined at zero field")
    force = kv_per_cm_to_ev_per_nm(abs(field_kv_per_cm_x))
    return u.hbar * dk / force


def extract_period(t: np.ndarray, y: np.ndarray, w: SteadyWindow) -> float | None:
    """Dominant oscillation period in the window, or None if none stands out.

    The trace is mean-subtracted and Fourier transformed; if the dominant
    nonzero-frequency bin clears the noise floor, the frequency is refined
    to sub-bin resolution by maximizing the continuous spectrum (the
    zero-padding limit) of the Hann-tapered window around that bin.  The
    taper only enters the refinement stage; it suppresses interference from
    the negative-frequency image, which otherwise biases few-period traces.
    """
    t = np.asarray(t, dtype=float)
    sel = w.mask(t)
    yw = np.asarray(y, dtype=float)[sel]
    tw = t[sel]
    if len(yw) < 16:
        raise ValueError("period extraction needs at least 16 samples")
    n = len(yw)
    dt = float(np.mean(np.diff(tw)))
    yw = yw - yw.mean()
    mag = np.abs(np.fft.rfft(yw))
    if len(mag) < 4:
        return None
    mag[0] = 0.0
    k_peak = int(np.argmax(mag))
    floor = float(np.median(mag[1:]))
    if floor <= 0.0 or mag[k_peak] < PEAK_OVER_MEDIAN * floor:
        return None

    taper = 0.5 * (1.0 - np.cos(2.0 * math.pi * np.arange(n) / (n - 1)))
    y_tap = yw * taper
    y_tap -= y_tap.mean()

    def power(freq: float) -> float:
        z = np.exp(-2j * math.pi * freq * tw) @ y_tap
        return float((z * z.conjugate()).real)

    bin_width = 1.0 / (n * dt)
    f0 = k_peak * bin_width
    lo = max(f0 - bin_width, 0.25 * bin_width)
    hi = f0 + bin_width
    golden = (math.sqrt(5.0) - 1.0) / 2.0
    c = hi - golden * (hi - lo)
    d = lo + golden * (hi - lo)
    pc, pd = power(c), power(d)
    for _ in range(40):
        if pc > pd:
            hi, d, pd = d, c, pc
            c = hi - golden * (hi - lo)
            pc = power(c)
        else:
            lo, c, pc = c, d, pd
            d = lo + golden * (hi - lo)
            pd = power(d)
    freq = 0.5 * (lo + hi)
    if freq <= 0.0:
        return None
    return 1.0 / freq


def harmonic_fit(
    t: np.ndarray,
    y: np.ndarray,
    w: SteadyWindow,
    omega: float,
    order: int,
) -> HarmonicFit:
    """Least squares of y ~ a0 + sum_h [b_h sin(h w t) + c_h cos(h w t)].

    ``omega`` is fixed by the caller (2*pi/T_grid); it is never fitted.
    """
    if omega <= 0:
        raise ValueError("omega must be positive")
    if order < 1:
        raise ValueError("harmonic order must be >= 1")
    t = np.asarray(t, dtype=float)
    sel = w.mask(t)
    tw = t[sel]
    yw = np.asarray(y, dtype=float)[sel]
    n_cols = 2 * order + 1
    if len(yw) <= n_cols:
        raise ValueError("window too short for the requested harmonic order")
    if tw[-1] - tw[0] < 2.0 * math.pi / omega:
        raise ValueError(
            "window shorter than one fundamental period; the design is degenerate"
        )
    design = np.empty((len(tw), n_cols))
    design[:, 0] = 1.0
    for h in range(1, order + 1):
        design[:, 2 * h - 1] = np.sin(h * omega * tw)
        design[:, 2 * h] = np.cos(h * omega * tw)
    coef, _, rank, _ = np.linalg.lstsq(design, yw, rcond=None)
    if rank < n_cols:
        raise ValueError(
            "rank-deficient harmonic design; the window is shorter than one period"
        )
    resid = yw - design @ coef
    return HarmonicFit(
        omega=omega,
        order=order,
        a0=float(coef[0]),
        b=tuple(float(coef[2 * h - 1]) for h in range(1, order + 1)),
        c=tuple(float(coef[2 * h]) for h in range(1, order + 1)),
        residual_rms=float(np.sqrt(np.mean(resid**2))),
    )


def subtract_harmonics(t: np.ndarray, y: np.ndarray, fit: HarmonicFit) -> np.ndarray:
    """Remove the fitted oscillatory component over the full trace.

    Only the oscillation is subtracted; the level a0 and any transient
    evolution are left in place.
    """
    return np.asarray(y, dtype=float) - fit.oscillation(np.asarray(t, dtype=float))


def mean_shift_z(
    t: np.ndarray,
    raw: np.ndarray,
    corrected: np.ndarray,
    w: SteadyWindow,
) -> tuple[float, float]:
    """Window-mean shift of the corrected trace and its significance Z.

    Z = (mean(corrected) - mean(raw)) / SE(mean(raw)); |Z| well below 1
    means the subtraction did not move the steady-state mean.
    """
    raw_stats = window_stats(t, raw, w)
    corr_stats = window_stats(t, corrected, w)
    delta = corr_stats.mean - raw_stats.mean
    z = delta / raw_stats.se if raw_stats.se > 0 else math.inf if delta else 0.0
    return delta, z
