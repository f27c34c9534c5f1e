"""Physical quantities derived from a moment state.

Conventions (fixed package-wide):

* Cavity quadrature  X_theta = e^{-i theta} a + e^{i theta} a^dag, so the
  vacuum variance (shot noise) is 1.
* Ensemble quadrature summed linearly over sites with shot noise N/2.
* Pauli components  sigma_x = sigma + sigma^dag,  sigma_y = i(sigma^dag -
  sigma); a global sign flip of sigma_y leaves every variance unchanged.
* Decibels are 10*log10(variance / shot_noise); negative means squeezed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import DomainError, ParameterError, UnpolarizedStateError
from .params import MomentState, SystemParams

__all__ = [
    "QuadratureResult",
    "SpinMetrics",
    "CouplingEstimate",
    "CLASSIFICATIONS",
    "cavity_quadrature_variance",
    "min_cavity_quadrature",
    "ensemble_quadrature_variance",
    "min_ensemble_quadrature",
    "analytic_free_space_variance",
    "spin_metrics",
    "transfer_factor",
    "lasing_threshold_margin",
    "estimate_coupling",
    "to_db",
    "cavity_variance_series",
    "min_cavity_quadrature_series",
    "min_ensemble_quadrature_series",
    "spin_metrics_series",
]

CLASSIFICATIONS = ("none", "standard", "planar", "dicke_like")

SPEED_OF_LIGHT = 2.99792458e8  # m/s


# --------------------------------------------------------------------------
# cavity quadratures
# --------------------------------------------------------------------------

def _centered_cavity(m_a, m_aa, m_ada):
    """Centered field moments <Delta a^2> and <Delta a^dag Delta a>."""
    coherent = m_aa - m_a * m_a
    incoherent = np.real(m_ada) - np.abs(m_a) ** 2
    return coherent, incoherent


@dataclass(frozen=True)
class QuadratureResult:
    """Optimized quadrature variance of the cavity field."""

    theta_min: float
    var_min: float
    var_max: float
    shot_noise: float
    db_min: float


def cavity_quadrature_variance(state: MomentState, theta: float) -> float:
    """Variance of X_theta: 2(<Delta a^dag Delta a> + Re{e^{-2i theta} <Delta a^2>}) + 1."""
    c, n = _centered_cavity(state.m_a, state.m_aa, state.m_ada)
    return float(2.0 * (n + np.real(np.exp(-2j * theta) * c)) + 1.0)


def min_cavity_quadrature(state: MomentState) -> QuadratureResult:
    """Variance minimized over the quadrature phase.

    var_min = 1 + 2<Delta a^dag Delta a> - 2|<Delta a^2>| at
    theta_min = (arg<Delta a^2> + pi)/2 (mod pi); the orthogonal phase
    carries var_max, and var_min*var_max = (1+2n)^2 - 4|<Delta a^2>|^2.
    """
    c, n = _centered_cavity(state.m_a, state.m_aa, state.m_ada)
    mag = abs(c)
    var_min = 1.0 + 2.0 * n - 2.0 * mag
    var_max = 1.0 + 2.0 * n + 2.0 * mag
    theta = 0.0 if mag == 0 else ((np.angle(c) + np.pi) / 2.0) % np.pi
    db = to_db(var_min, 1.0) if var_min > 0 else -math.inf
    return QuadratureResult(theta_min=float(theta), var_min=float(var_min),
                            var_max=float(var_max), shot_noise=1.0, db_min=db)


# --------------------------------------------------------------------------
# ensemble (far-field) quadratures
# --------------------------------------------------------------------------

def _ensemble_sums(state: MomentState, n: int):
    """Linearly summed coherent and incoherent ensemble fluctuations.

    sigma^2 = 0 exactly, so <Delta sigma_1^2> = -<sigma>^2.
    """
    ms = state.m_s
    inc = n * (np.real(state.m_sds) - abs(ms) ** 2) \
        + (n - 1) * (np.real(state.m_sds2) - abs(ms) ** 2)
    coh = n * (-ms * ms) + (n - 1) * (state.m_ss - ms * ms)
    return coh, inc


def ensemble_quadrature_variance(state: MomentState, params: SystemParams,
                                 phi: float, constant: str = "n_half") -> float:
    """Ensemble quadrature variance 2(Sigma_inc + Re{e^{-2i phi} Sigma_coh}) + const.

    constant="n_half" uses the fixed reference N/2 (the minimum the
    additive term takes at maximal coherent fluctuations); "inversion"
    uses the instantaneous -N<sigma_z> instead, which is the form whose
    orthogonal-phase uncertainty product is bounded below by 1/2 for N=1.
    """
    n = params.n_emitters
    coh, inc = _ensemble_sums(state, n)
    if constant == "n_half":
        const = 0.5 * n
    elif constant == "inversion":
        const = -n * np.real(state.sigma_z)
    else:
        raise ParameterError(f"unknown constant convention {constant!r}")
    return float(2.0 * (inc + np.real(np.exp(-2j * phi) * coh)) + const)


def min_ensemble_quadrature(state: MomentState, params: SystemParams) -> QuadratureResult:
    """Ensemble variance minimized over phi, shot-noise reference N/2."""
    n = params.n_emitters
    coh, inc = _ensemble_sums(state, n)
    mag = abs(coh)
    base = 2.0 * inc + 0.5 * n
    var_min = base - 2.0 * mag
    var_max = base + 2.0 * mag
    phi = 0.0 if mag == 0 else ((np.angle(coh) + np.pi) / 2.0) % np.pi
    db = to_db(var_min, 0.5 * n) if var_min > 0 else -math.inf
    return QuadratureResult(theta_min=float(phi), var_min=float(var_min),
                            var_max=float(var_max), shot_noise=0.5 * n, db_min=db)


def analytic_free_space_variance(z: float, phi: float, gamma1: float,
                                 gamma2_star: float, n_bar: float = 0.0,
                                 delta0: float = 0.0) -> float:
    """Closed-form steady-state single-emitter quadrature variance.

        V = z*alpha/(2*z*alpha + 1)
            - Re{ z (1 + e^{-2i phi}) / (4 (2*z*alpha + 1)^2) } + 1/2

    with alpha = Gamma/(2*gamma1), Gamma = gamma1/2 + gamma2* + n_bar*gamma1
    and z the scaled drive (Omega/|Gamma + i*delta0|)^2.  Evaluated exactly
    as written; see the free-space benchmark for how it compares with the
    master-equation minimum.
    """
    if z < 0:
        raise DomainError(f"scaled drive z must be >= 0, got {z}")
    if gamma1 <= 0:
        raise DomainError("alpha = Gamma/(2*gamma1) undefined for gamma1 = 0")
    gamma = 0.5 * gamma1 + gamma2_star + n_bar * gamma1
    alpha = gamma / (2.0 * gamma1)
    den = 2.0 * z * alpha + 1.0
    first = z * alpha / den
    second = np.real(z * (1.0 + np.exp(-2j * phi)) / (4.0 * den * den))
    return float(first - second + 0.5)


# --------------------------------------------------------------------------
# collective-spin metrics
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SpinMetrics:
    """Collective-spin means, variances, and squeezing parameters.

    xi2 entries are NaN on axes where the complementary polarization
    vanishes (xi2 undefined); xi2_defined records which are meaningful.
    """

    j_mean: Tuple[float, float, float]        # <Jx>, <Jy>, <Jz>
    j_var: Tuple[float, float, float]         # <Delta J^2> per axis
    xi2: Tuple[float, float, float]
    xi2_defined: Tuple[bool, bool, bool]
    entangled: Tuple[bool, bool, bool]         # xi2 < 1/N where defined
    classification: str                       # one of CLASSIFICATIONS


def _spin_arrays(m_s, m_sds, m_ss, m_sds2, m_zz, n):
    """Vector-friendly core of spin_metrics; returns means and variances."""
    jx = n * np.real(m_s)
    jy = n * np.imag(m_s)
    jz = n * (np.real(m_sds) - 0.5)
    pair_xx = 2.0 * np.real(m_ss) + 2.0 * np.real(m_sds2)
    pair_yy = -2.0 * np.real(m_ss) + 2.0 * np.real(m_sds2)
    pair_zz = np.real(m_zz)
    quarter_n = 0.25 * n
    var_x = quarter_n * (1.0 + (n - 1) * pair_xx) - jx ** 2
    var_y = quarter_n * (1.0 + (n - 1) * pair_yy) - jy ** 2
    var_z = quarter_n * (1.0 + (n - 1) * pair_zz) - jz ** 2
    return (jx, jy, jz), (var_x, var_y, var_z)


def _classify(j_mean, j_var):
    """Squeezing-type label from the printed uncertainty condition
    <Delta J_j^2> < (1/4) sqrt(<J_k>^2 + <J_l>^2), axes tested z, y, x."""
    jx, jy, jz = j_mean
    vx, vy, vz = j_var
    den_x = jy * jy + jz * jz
    den_y = jx * jx + jz * jz
    den_z = jx * jx + jy * jy
    sq_z = vz < 0.25 * math.sqrt(den_z)
    sq_y = vy < 0.25 * math.sqrt(den_y)
    sq_x = vx < 0.25 * math.sqrt(den_x)
    equatorial = sq_x or sq_y
    if not (sq_x or sq_y or sq_z):
        return "none"
    if sq_z and not equatorial:
        return "dicke_like"
    if sq_z and equatorial:
        # planar only when both equatorial parameters are actually defined
        return "planar" if (den_x > 0 and den_y > 0) else "dicke_like"
    if sq_x and sq_y:
        return "planar"
    return "standard"


def spin_metrics(state: MomentState, params: SystemParams, strict: bool = True) -> SpinMetrics:
    """Collective-spin means, variances, xi^2 triple, and classification.

    For N = 1 the pair terms vanish and the single-spin variances remain.
    When the complementary polarization <J_k>^2 + <J_l>^2 vanishes on every
    axis the state is unpolarized and xi^2 is undefined everywhere; with
    strict=True that raises UnpolarizedStateError, otherwise (and for
    single undefined axes) the entry is NaN with xi2_defined=False.
    """
    n = params.n_emitters
    j_mean, j_var = _spin_arrays(state.m_s, state.m_sds, state.m_ss,
                                 state.m_sds2, state.m_zz, n)
    jx, jy, jz = j_mean
    dens = (jy * jy + jz * jz, jx * jx + jz * jz, jx * jx + jy * jy)
    xi2 = []
    defined = []
    entangled = []
    for var, den in zip(j_var, dens):
        if den > 0:
            value = var / den
            xi2.append(float(value))
            defined.append(True)
            entangled.append(bool(value < 1.0 / n))
        else:
            xi2.append(math.nan)
            defined.append(False)
            entangled.append(False)
    if strict and not any(defined):
        raise UnpolarizedStateError(
            "collective polarization vanishes on all axes; xi^2 undefined")
    return SpinMetrics(
        j_mean=tuple(float(v) for v in j_mean),
        j_var=tuple(float(v) for v in j_var),
        xi2=tuple(xi2),
        xi2_defined=tuple(defined),
        entangled=tuple(entangled),
        classification=_classify(j_mean, j_var),
    )


# --------------------------------------------------------------------------
# coupling/lasing diagnostics
# --------------------------------------------------------------------------

def transfer_factor(params: SystemParams) -> float:
    """Squeezing-transfer proportionality |g1^2 N / (Gamma_c Gamma_t)|^2.

    Diagnostic only: large values indicate efficient mapping of ensemble
    quadrature fluctuations onto the cavity output.
    """
    gc = params.gamma_c
    gt = params.gamma_t
    if gc == 0 or gt == 0:
        raise DomainError("transfer factor undefined: zero complex rate")
    return float(abs(params.g1 ** 2 * params.n_emitters / (gc * gt)) ** 2)


def lasing_threshold_margin(params: SystemParams) -> float:
    """g1^2 N / (|Gamma_c Gamma_t| / 2); values around or above 1 flag the
    self-oscillation (lasing) regime."""
    denom = 0.5 * abs(params.gamma_c * params.gamma_t)
    if denom == 0:
        raise DomainError("lasing margin undefined: zero complex rate")
    return float(params.g1 ** 2 * params.n_emitters / denom)


@dataclass(frozen=True)
class CouplingEstimate:
    """Single-emitter coupling and ensemble size for a near-concentric cavity."""

    g1_hz: float
    n_emitters: float
    v_eff: float       # effective mode volume, m^3

    @property
    def collective_hz(self) -> float:
        return math.sqrt(self.n_emitters) * self.g1_hz


def estimate_coupling(density: float, cavity_length: float, wavelength: float,
                      gamma1_hz: float, refractive_index: float,
                      zeta: float) -> CouplingEstimate:
    """Coupling estimate for a near-concentric cavity.

    Beam waist W0 = sqrt(L*lambda/(2*pi)); mode volume V_eff = pi*L*W0^2/4
    (= L^2 lambda / 8); N = density * V_eff; and

        g1 = zeta * sqrt(3*pi*c^3*gamma1 / (2*omega^2*n^3*V_eff)),
        omega = 2*pi*c/lambda.

    At fixed density, g1 scales as V_eff^(-1/2) while N scales as V_eff,
    leaving sqrt(N)*g1 invariant.
    """
    for name, value in (("density", density), ("cavity_length", cavity_length),
                        ("wavelength", wavelength), ("gamma1_hz", gamma1_hz),
                        ("refractive_index", refractive_index)):
        if not (value > 0):
            raise ParameterError(f"{name} must be > 0, got {value}")
    if not (0 < zeta <= 1):
        raise ParameterError(f"zeta must lie in (0, 1], got {zeta}")
    waist_sq = cavity_length * wavelength / (2.0 * math.pi)
    v_eff = math.pi * cavity_length * waist_sq / 4.0
    omega = 2.0 * math.pi * SPEED_OF_LIGHT / wavelength
    g1 = zeta * math.sqrt(3.0 * math.pi * SPEED_OF_LIGHT ** 3 * gamma1_hz
                          / (2.0 * omega ** 2 * refractive_index ** 3 * v_eff))
    return CouplingEstimate(g1_hz=g1, n_emitters=density * v_eff, v_eff=v_eff)


def to_db(variance: float, shot_noise: float) -> float:
    """10*log10(variance / shot_noise)."""
    if not (variance > 0) or not (shot_noise > 0):
        raise DomainError(
            f"dB conversion needs positive inputs, got ({variance}, {shot_noise})")
    return float(10.0 * math.log10(variance / shot_noise))


# --------------------------------------------------------------------------
# vectorized helpers over traces
# --------------------------------------------------------------------------

def cavity_variance_series(moments: np.ndarray, theta: float) -> np.ndarray:
    """Full cavity quadrature variance per sample for a (n, 12) moment array."""
    m_a = moments[:, 0]
    c, n = _centered_cavity(m_a, moments[:, 2], moments[:, 3])
    return 2.0 * (n + np.real(np.exp(-2j * theta) * c)) + 1.0


def min_cavity_quadrature_series(moments: np.ndarray):
    """(var_min, theta_min, var_max) arrays for a (n, 12) moment array."""
    m_a = moments[:, 0]
    c, n = _centered_cavity(m_a, moments[:, 2], moments[:, 3])
    mag = np.abs(c)
    var_min = 1.0 + 2.0 * n - 2.0 * mag
    var_max = 1.0 + 2.0 * n + 2.0 * mag
    theta = np.where(mag == 0, 0.0, (np.angle(c) + np.pi) / 2.0) % np.pi
    return var_min, theta, var_max


def min_ensemble_quadrature_series(moments: np.ndarray, params: SystemParams):
    """(var_min, phi_min) arrays of the phase-optimized ensemble variance."""
    n = params.n_emitters
    ms = moments[:, 1]
    inc = n * (np.real(moments[:, 4]) - np.abs(ms) ** 2) \
        + (n - 1) * (np.real(moments[:, 6]) - np.abs(ms) ** 2)
    coh = n * (-ms * ms) + (n - 1) * (moments[:, 5] - ms * ms)
    mag = np.abs(coh)
    var_min = 2.0 * inc + 0.5 * n - 2.0 * mag
    phi = np.where(mag == 0, 0.0, (np.angle(coh) + np.pi) / 2.0) % np.pi
    return var_min, phi


def spin_metrics_series(moments: np.ndarray, params: SystemParams):
    """Per-sample spin means, variances, and xi^2 (NaN where undefined).

    Returns (j_mean (n,3), j_var (n,3), xi2 (n,3)).
    """
    n = params.n_emitters
    j_mean, j_var = _spin_arrays(moments[:, 1], moments[:, 4], moments[:, 5],
                                 moments[:, 6], moments[:, 7], n)
    jx, jy, jz = j_mean
    dens = (jy * jy + jz * jz, jx * jx + jz * jz, jx * jx + jy * jy)
    xi2 = []
    with np.errstate(divide="ignore", invalid="ignore"):
        for var, den in zip(j_var, dens):
            xi2.append(np.where(den > 0, var / np.where(den > 0, den, 1.0), np.nan))
    return (np.column_stack(j_mean), np.column_stack(j_var), np.column_stack(xi2))
