"""Screened-Coulomb electron-electron kinematics and proposal-rate estimators.

For a pair (k1, k2) with Dirac dispersion, energy and momentum conservation
confine the post-collision states to an ellipse with foci at the origin and
at k1+k2:

    2a = |k1| + |k2|,  2c = |k1 + k2|,  b = sqrt(a^2 - c^2),

parametrized by beta in [0, 2*pi] around the center (k1+k2)/2 with the major
axis along k1+k2.  The proposal rate integrates the antisymmetrized screened
matrix element along this manifold with line element
sqrt(a^2 sin^2 b + b^2 cos^2 b).

Two estimators of the rate are provided:

* ``lambda_ee_fullsum`` sums the occupation-weighted kernel over every
  occupied cell of the momentum grid (partner at the cell center).
* ``lambda_ee_sampled`` replaces the cell sum by an average over partner
  particles drawn uniformly from the ensemble, scaled by N_p/M.  It is the
  cheap, unbiased work-horse for large ensembles.

The trapezoidal beta quadrature and its 1/2 are folded into the prefactor

    C_ee = e^4 (dk)^2 dbeta / (128 pi hbar^2 vF),

so both estimators accumulate plain node-pair sums M(b_{l-1}) + M(b_l).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .screening import ScreeningParams, polarization
from .units import DEFAULT_UNITS, UnitSystem

_TWO_PI = 2.0 * math.pi
_TINY = 1.0e-300

# Magnitude floor for direction cosines: keeps reciprocal products finite
# even when two degenerate magnitudes multiply (the dot product is then 0).
_TINY_NORM = 1.0e-150

# Upper bound on flattened (query, partner) pairs per chunk in batch
# evaluation; bounds each temporary at ~12 MB.
_CHUNK_PAIRS = 1_500_000


@dataclass(frozen=True)
class BetaMesh:
    """Uniform quadrature mesh on [0, 2*pi] with m_beta intervals."""

    m_beta: int = 10

    def __post_init__(self) -> None:
        if self.m_beta < 1:
            raise ValueError("m_beta must be >= 1")

    @property
    def dbeta(self) -> float:
        return _TWO_PI / self.m_beta

    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, _TWO_PI, self.m_beta + 1)


@dataclass(frozen=True)
class EllipseGeom:
    """Conservation-manifold geometry for one (k1, k2) pair."""

    a: float
    b: float
    c: float
    center_x: float
    center_y: float
    axis_cos: float
    axis_sin: float
    degenerate: bool

    @property
    def axis_angle(self) -> float:
        return math.atan2(self.axis_sin, self.axis_cos)


def ellipse_from_pair(k1x: float, k1y: float, k2x: float, k2y: float) -> EllipseGeom:
    """Build the final-state ellipse; degenerate when b collapses to zero.

    Degeneracy (collinear, co-directed pair) makes the manifold a segment
    through the foci; such events are treated as null by the engine.
    """
    r1 = math.hypot(k1x, k1y)
    r2 = math.hypot(k2x, k2y)
    if r1 + r2 <= 0.0:
        raise ValueError("ellipse undefined for |k1| + |k2| = 0")
    kx = k1x + k2x
    ky = k1y + k2y
    a = 0.5 * (r1 + r2)
    c = 0.5 * math.hypot(kx, ky)
    b_sq = a * a - c * c
    degenerate = b_sq <= 0.0
    b = math.sqrt(b_sq) if b_sq > 0.0 else 0.0
    if c > 0.0:
        ux, uy = 0.5 * kx / c, 0.5 * ky / c
    else:
        ux, uy = 1.0, 0.0
    return EllipseGeom(
        a=a, b=b, c=c,
        center_x=0.5 * kx, center_y=0.5 * ky,
        axis_cos=ux, axis_sin=uy,
        degenerate=degenerate,
    )


def final_pair(
    g: EllipseGeom,
    k1x: float,
    k1y: float,
    k2x: float,
    k2y: float,
    beta: float,
) -> tuple[float, float, float, float]:
    """Post-collision pair (k1', k2') at ellipse parameter beta.

    Momentum is conserved exactly by construction (k2' = k1 + k2 - k1'),
    and |k1'| + |k2'| = 2a by the focus property, so the Dirac energy sum
    is conserved to rounding.
    """
    pa = g.a * math.cos(beta)
    pb = g.b * math.sin(beta)
    k1px = g.center_x + g.axis_cos * pa - g.axis_sin * pb
    k1py = g.center_y + g.axis_sin * pa + g.axis_cos * pb
    k2px = (k1x + k2x) - k1px
    k2py = (k1y + k2y) - k1py
    return k1px, k1py, k2px, k2py


def coulomb_prefactor(
    dk: float,
    m_beta: int,
    kappa: float = 1.0,
    calibration: float = 1.0,
    *,
    u: UnitSystem = DEFAULT_UNITS,
) -> float:
    """Rate prefactor C_ee in 1/(nm*ps), including the quadrature weights.

    ``calibration`` is a dimensionless overall factor on the e-e strength;
    the default 1.0 corresponds to taking the Gaussian-units bookkeeping of
    the kernel at face value.  Runs record the value used.
    """
    if dk <= 0:
        raise ValueError("dk must be positive")
    e2 = u.e2_coulomb / kappa
    dbeta = _TWO_PI / m_beta
    return calibration * e2 * e2 * dk * dk * dbeta / (128.0 * math.pi * u.hbar**2 * u.vF)


def _screened_inverse(q: np.ndarray, s: ScreeningParams) -> np.ndarray:
    """1/(q + C_eps*Pi(q)) evaluated in place on a fresh array."""
    k_f = s.k_F
    two_kf = 2.0 * k_f
    den = q + s.C_eps
    above = q >= two_kf
    if above.any():
        qa = q[above]
        den[above] += s.C_eps * (
            (math.pi / (8.0 * k_f)) * qa
            - np.sqrt(qa * qa - two_kf * two_kf) / (2.0 * qa)
            - qa / (4.0 * k_f) * np.arcsin(two_kf / qa)
        )
    return np.reciprocal(den, out=den)


def _pair_beta_sums(
    k1x,
    k1y,
    k2x,
    k2y,
    cos_b: np.ndarray,
    sin_b: np.ndarray,
    s: ScreeningParams,
) -> np.ndarray:
    """Node-pair kernel sum  sum_l [M(b_{l-1}) + M(b_l)]  per (k1, k2) pair.

    All of k1x..k2y broadcast against each other.  Degenerate pairs are
    evaluated with b = 0 (finite values); vanishing vector magnitudes are
    guarded so the result is always finite.

    The beta nodes are iterated in Python with full-size contiguous array
    passes per node; broadcasting a trailing length-11 axis instead would
    leave numpy with 11-element inner loops and an order of magnitude more
    dispatch overhead.
    """
    k1x, k1y, k2x, k2y = (
        np.ascontiguousarray(v, dtype=float)
        for v in np.broadcast_arrays(k1x, k1y, k2x, k2y)
    )
    shape = k1x.shape
    k1x, k1y, k2x, k2y = (v.ravel() for v in (k1x, k1y, k2x, k2y))

    r1 = np.sqrt(k1x * k1x + k1y * k1y)
    r2 = np.sqrt(k2x * k2x + k2y * k2y)
    kx = k1x + k2x
    ky = k1y + k2y
    a = 0.5 * (r1 + r2)
    c_sq = 0.25 * (kx * kx + ky * ky)
    a_sq = a * a
    b_sq = np.maximum(a_sq - c_sq, 0.0)
    b = np.sqrt(b_sq)
    c = np.sqrt(c_sq)
    inv_2c = 1.0 / np.maximum(2.0 * c, _TINY)
    pos = c > 0.0
    ux = np.where(pos, kx * inv_2c, 1.0)
    uy = np.where(pos, ky * inv_2c, 0.0)
    hx = 0.5 * kx
    hy = 0.5 * ky
    inv_r1 = 1.0 / np.maximum(r1, _TINY_NORM)
    inv_r2 = 1.0 / np.maximum(r2, _TINY_NORM)

    out = np.zeros_like(a)
    n_nodes = len(cos_b)
    for l in range(n_nodes):
        cb = cos_b[l]
        sb = sin_b[l]
        pa = a * cb
        pb = b * sb
        k1px = hx + ux * pa - uy * pb
        k1py = hy + uy * pa + ux * pb
        k2px = kx - k1px
        k2py = ky - k1py
        dx = k1x - k1px
        dy = k1y - k1py
        q = np.sqrt(dx * dx + dy * dy)
        dx = k1x - k2px
        dy = k1y - k2py
        qp = np.sqrt(dx * dx + dy * dy)
        inv_r1p = 1.0 / np.maximum(np.sqrt(k1px * k1px + k1py * k1py), _TINY_NORM)
        inv_r2p = 1.0 / np.maximum(np.sqrt(k2px * k2px + k2py * k2py), _TINY_NORM)
        c11 = (k1x * k1px + k1y * k1py) * inv_r1 * inv_r1p
        c22 = (k2x * k2px + k2y * k2py) * inv_r2 * inv_r2p
        c12 = (k1x * k2px + k1y * k2py) * inv_r1 * inv_r2p
        c21 = (k2x * k1px + k2y * k1py) * inv_r2 * inv_r1p
        v_q = _screened_inverse(q, s)
        v_q *= 1.0 + c11
        v_q *= 1.0 + c22
        v_qp = _screened_inverse(qp, s)
        v_qp *= 1.0 + c12
        v_qp *= 1.0 + c21
        m2 = v_q * v_q
        m2 += v_qp * v_qp
        v_q *= v_qp
        m2 -= v_q
        m2 *= np.sqrt(a_sq * (sb * sb) + b_sq * (cb * cb))
        if l == 0 or l == n_nodes - 1:
            out += m2
        else:
            out += m2
            out += m2
    return out.reshape(shape)


def _pair_beta_sum_scalar(
    k1x: float,
    k1y: float,
    k2x: float,
    k2y: float,
    cos_b,
    sin_b,
    c_eps: float,
    k_f: float,
) -> float:
    """Pure-Python single-pair variant of :func:`_pair_beta_sums`.

    Used on the per-event path, where one 11-node evaluation in plain math
    beats numpy dispatch overhead by an order of magnitude.
    """
    sqrt = math.sqrt
    asin = math.asin
    r1 = sqrt(k1x * k1x + k1y * k1y)
    r2 = sqrt(k2x * k2x + k2y * k2y)
    kx = k1x + k2x
    ky = k1y + k2y
    a = 0.5 * (r1 + r2)
    c = 0.5 * sqrt(kx * kx + ky * ky)
    a_sq = a * a
    b_sq = a_sq - c * c
    if b_sq < 0.0:
        b_sq = 0.0
    b = sqrt(b_sq)
    if c > 0.0:
        ux, uy = 0.5 * kx / c, 0.5 * ky / c
    else:
        ux, uy = 1.0, 0.0
    hx = 0.5 * kx
    hy = 0.5 * ky
    two_kf = 2.0 * k_f
    four_kf_sq = two_kf * two_kf
    pi_slope = math.pi / (8.0 * k_f)
    inv_4kf = 1.0 / (4.0 * k_f)

    total = 0.0
    first = 0.0
    mm = 0.0
    n_nodes = len(cos_b)
    for l in range(n_nodes):
        cb = cos_b[l]
        sb = sin_b[l]
        pa = a * cb
        pb = b * sb
        k1px = hx + ux * pa - uy * pb
        k1py = hy + uy * pa + ux * pb
        k2px = kx - k1px
        k2py = ky - k1py
        dx = k1x - k1px
        dy = k1y - k1py
        q = sqrt(dx * dx + dy * dy)
        dx = k1x - k2px
        dy = k1y - k2py
        qp = sqrt(dx * dx + dy * dy)
        r1p = sqrt(k1px * k1px + k1py * k1py)
        r2p = sqrt(k2px * k2px + k2py * k2py)
        d11 = r1 * r1p
        d22 = r2 * r2p
        d12 = r1 * r2p
        d21 = r2 * r1p
        c11 = (k1x * k1px + k1y * k1py) / d11 if d11 > 0.0 else 0.0
        c22 = (k2x * k2px + k2y * k2py) / d22 if d22 > 0.0 else 0.0
        c12 = (k1x * k2px + k1y * k2py) / d12 if d12 > 0.0 else 0.0
        c21 = (k2x * k1px + k2y * k1py) / d21 if d21 > 0.0 else 0.0
        if q >= two_kf:
            pi_q = (
                1.0
                + pi_slope * q
                - sqrt(q * q - four_kf_sq) / (2.0 * q)
                - q * inv_4kf * asin(two_kf / q)
            )
        else:
            pi_q = 1.0
        if qp >= two_kf:
            pi_qp = (
                1.0
                + pi_slope * qp
                - sqrt(qp * qp - four_kf_sq) / (2.0 * qp)
                - qp * inv_4kf * asin(two_kf / qp)
            )
        else:
            pi_qp = 1.0
        v_q = (1.0 + c11) * (1.0 + c22) / (q + c_eps * pi_q)
        v_qp = (1.0 + c12) * (1.0 + c21) / (qp + c_eps * pi_qp)
        m2 = v_q * v_q + v_qp * v_qp - v_q * v_qp
        mm = m2 * sqrt(a_sq * sb * sb + b_sq * cb * cb)
        total += mm
        if l == 0:
            first = mm
    return 2.0 * total - first - mm


def coulomb_kernel(
    k1x: float,
    k1y: float,
    k2x: float,
    k2y: float,
    beta: float,
    s: ScreeningParams,
) -> float:
    """Kernel value M(beta) = |M~|^2(q, q') * line element, for one beta."""
    g = ellipse_from_pair(k1x, k1y, k2x, k2y)
    k1px, k1py, k2px, k2py = final_pair(g, k1x, k1y, k2x, k2y, beta)
    r1 = math.hypot(k1x, k1y)
    r2 = math.hypot(k2x, k2y)
    r1p = math.hypot(k1px, k1py)
    r2p = math.hypot(k2px, k2py)
    q = math.hypot(k1x - k1px, k1y - k1py)
    qp = math.hypot(k1x - k2px, k1y - k2py)

    def _cos(ax: float, ay: float, bx: float, by: float, na: float, nb: float) -> float:
        d = na * nb
        return (ax * bx + ay * by) / d if d > 0.0 else 0.0

    v_q = (1.0 + _cos(k1x, k1y, k1px, k1py, r1, r1p)) * (
        1.0 + _cos(k2x, k2y, k2px, k2py, r2, r2p)
    ) / (q + s.C_eps * polarization(q, s.k_F))
    v_qp = (1.0 + _cos(k1x, k1y, k2px, k2py, r1, r2p)) * (
        1.0 + _cos(k2x, k2y, k1px, k1py, r2, r1p)
    ) / (qp + s.C_eps * polarization(qp, s.k_F))
    m2 = v_q * v_q + v_qp * v_qp - v_q * v_qp
    line = math.sqrt((g.a * math.sin(beta)) ** 2 + (g.b * math.cos(beta)) ** 2)
    return m2 * line


def lambda_ee_fullsum(
    k1x: float,
    k1y: float,
    occ: np.ndarray,
    m_norm: int,
    axis_centers: np.ndarray,
    mesh: BetaMesh,
    s: ScreeningParams,
    c_ee: float,
    shift: tuple[float, float] = (0.0, 0.0),
) -> float:
    """Full partner-cell sum of the e-e proposal rate for one query state.

    ``occ`` is the (n_k, n_k) occupancy array indexed [i_x, j_y] and
    ``axis_centers`` the grid-relative cell centers along one axis; partner
    states sit at the physical cell centers (grid center + shift).  Empty
    cells contribute nothing and are skipped.
    """
    if m_norm <= 0:
        raise ValueError("occupancy normalization M must be positive")
    ii, jj = np.nonzero(occ > 0)
    if len(ii) == 0:
        return 0.0
    f = occ[ii, jj] / float(m_norm)
    nodes = mesh.nodes()
    sums = _pair_beta_sums(
        k1x,
        k1y,
        axis_centers[ii] + shift[0],
        axis_centers[jj] + shift[1],
        np.cos(nodes),
        np.sin(nodes),
        s,
    )
    return float(c_ee * np.dot(f, sums))


def lambda_ee_sampled(
    k1x: float,
    k1y: float,
    kx_rel: np.ndarray,
    ky_rel: np.ndarray,
    shift: tuple[float, float],
    m_norm: int,
    n_samples: int,
    mesh: BetaMesh,
    s: ScreeningParams,
    c_ee: float,
    rng,
    *,
    exclude_index: int | None = None,
    partners: np.ndarray | None = None,
) -> float:
    """Sampled-partner estimate of the e-e proposal rate for one query state.

    Partners are drawn uniformly (with replacement) from the ensemble,
    excluding ``exclude_index`` when given; their exact wavevectors are used,
    which is what distinguishes this estimator from the cell-midpoint sum.
    ``partners`` overrides the draw with explicit indices (diagnostics).
    """
    n_p = len(kx_rel)
    if n_p < 2:
        raise ValueError("sampled-partner estimate needs at least 2 particles")
    if partners is None:
        if n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if exclude_index is None:
            idx = rng.integers(0, n_p, size=n_samples)
        else:
            idx = rng.integers(0, n_p - 1, size=n_samples)
            idx = idx + (idx >= exclude_index)
    else:
        idx = np.asarray(partners)
    nodes = mesh.nodes()
    sums = _pair_beta_sums(
        k1x,
        k1y,
        kx_rel[idx] + shift[0],
        ky_rel[idx] + shift[1],
        np.cos(nodes),
        np.sin(nodes),
        s,
    )
    return float(c_ee * (n_p / float(m_norm)) * np.mean(sums))


def fullsum_rates_batch(
    qx: np.ndarray,
    qy: np.ndarray,
    centers_x: np.ndarray,
    centers_y: np.ndarray,
    f_occ: np.ndarray,
    cos_b: np.ndarray,
    sin_b: np.ndarray,
    s: ScreeningParams,
    c_ee: float,
) -> np.ndarray:
    """Full-sum rates for many query states against one frozen occupancy.

    Chunked over queries to bound the (queries x cells x beta) temporaries.
    """
    n_q = len(qx)
    n_c = len(centers_x)
    out = np.empty(n_q)
    if n_c == 0:
        out.fill(0.0)
        return out
    chunk = max(1, _CHUNK_PAIRS // n_c)
    for lo in range(0, n_q, chunk):
        hi = min(lo + chunk, n_q)
        sums = _pair_beta_sums(
            qx[lo:hi, None],
            qy[lo:hi, None],
            centers_x[None, :],
            centers_y[None, :],
            cos_b,
            sin_b,
            s,
        )
        out[lo:hi] = sums @ f_occ
    return c_ee * out


def sampled_rates_batch(
    qx: np.ndarray,
    qy: np.ndarray,
    px: np.ndarray,
    py: np.ndarray,
    np_over_m: float,
    cos_b: np.ndarray,
    sin_b: np.ndarray,
    s: ScreeningParams,
    c_ee: float,
) -> np.ndarray:
    """Sampled-partner rates for many queries with pre-drawn partners.

    ``px``/``py`` have shape (n_q, n_s) and hold physical partner
    wavevectors.
    """
    n_q, n_s = px.shape
    out = np.empty(n_q)
    chunk = max(1, _CHUNK_PAIRS // n_s)
    for lo in range(0, n_q, chunk):
        hi = min(lo + chunk, n_q)
        sums = _pair_beta_sums(
            qx[lo:hi, None],
            qy[lo:hi, None],
            px[lo:hi],
            py[lo:hi],
            cos_b,
            sin_b,
            s,
        )
        out[lo:hi] = sums.mean(axis=1)
    return (c_ee * np_over_m) * out
