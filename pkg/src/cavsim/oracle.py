"""Exact density-matrix evolution of the joint cavity-spin system.

Ground truth for validating the moment closure and the observable
formulas, practical for up to three spins and a truncated Fock space.
The rotating-frame generator is time independent and keeps the
counter-rotating part of the cavity coupling:

    H = delta_c a^dag a + (delta0/2) sum_k sigma_kz
        + g1 sum_k i (a + a^dag)(sigma_k - sigma_k^dag)
        + (Omega/2) sum_k (sigma_k + sigma_k^dag)

with dissipators 2*kappa*(n_bar+1) D[a], 2*kappa*n_bar D[a^dag], per spin
gamma1*(n_bar+1) D[sigma], gamma1*n_bar D[sigma^dag], and (gamma2*/2)
D[sigma_z]; the dephasing form yields the transverse rate
Gamma = gamma1/2 + gamma2* + n_bar*gamma1 (asserted by tests).

Basis ordering: Fock index major, spin bit-string minor; spin site 0 is
the most significant bit, bit value 1 = excited.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply

from .errors import ParameterError, TruncationError
from .integrate import IntegrationConfig, Trace, integrate_trace
from .observables import min_cavity_quadrature_series, min_ensemble_quadrature_series, spin_metrics_series
from .params import MOMENT_NAMES, MomentState, SystemParams, initial_thermal_state

__all__ = [
    "OracleConfig",
    "DensityMatrix",
    "OracleRun",
    "build_generator",
    "evolve",
    "extract_moments",
    "compare_with_cumulant",
    "ComparisonReport",
    "spin_steady_state",
]


@dataclass(frozen=True)
class OracleConfig:
    """Truncation and sampling controls for the exact solver."""

    n_spins: int
    n_max: int = 15
    t_end: float = 50.0
    sample_count: int = 201
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    dim_cap: int = 4096
    trace_tol: float = 1e-8
    hermiticity_tol: float = 1e-10
    eigenvalue_tol: float = 1e-8

    def __post_init__(self):
        if not (1 <= self.n_spins <= 3):
            raise ParameterError(f"n_spins must be 1..3, got {self.n_spins}")
        if self.n_max < 1:
            raise ParameterError(f"n_max must be >= 1, got {self.n_max}")
        if self.dimension > self.dim_cap:
            raise ParameterError(
                f"Hilbert dimension {self.dimension} exceeds cap {self.dim_cap}")
        if self.sample_count < 2 or self.t_end <= 0:
            raise ParameterError("need t_end > 0 and sample_count >= 2")

    @property
    def dimension(self) -> int:
        return (self.n_max + 1) * 2 ** self.n_spins


# --------------------------------------------------------------------------
# operators
# --------------------------------------------------------------------------

_SIGMA = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)   # |g><e|, basis (g,e)
_SIGMA_Z = np.array([[-1.0, 0.0], [0.0, 1.0]], dtype=complex)
_EYE2 = np.eye(2, dtype=complex)


@lru_cache(maxsize=8)
def _operator_set(n_max: int, n_spins: int):
    """Dense full-space operators (a, sigma_k, sigma_kz) for traces."""
    dim_f = n_max + 1
    a_f = np.diag(np.sqrt(np.arange(1, dim_f, dtype=float)), 1).astype(complex)
    eye_f = np.eye(dim_f, dtype=complex)

    def site(op, k):
        out = np.eye(1, dtype=complex)
        for j in range(n_spins):
            out = np.kron(out, op if j == k else _EYE2)
        return out

    eye_s = np.eye(2 ** n_spins, dtype=complex)
    a = np.kron(a_f, eye_s)
    sigmas = tuple(np.kron(eye_f, site(_SIGMA, k)) for k in range(n_spins))
    sigma_zs = tuple(np.kron(eye_f, site(_SIGMA_Z, k)) for k in range(n_spins))
    return a, sigmas, sigma_zs


@dataclass(frozen=True)
class DensityMatrix:
    """Joint cavity-spin state over the Fock-major, spin-minor basis."""

    matrix: np.ndarray

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def expect(self, op: np.ndarray) -> complex:
        return complex(np.tensordot(op, self.matrix, axes=([0, 1], [1, 0])))

    def validate(self, trace_tol: float = 1e-8, hermiticity_tol: float = 1e-10,
                 eigenvalue_tol: float = 1e-8) -> None:
        """Raise TruncationError if trace, Hermiticity, or positivity broke."""
        err_trace = abs(self.trace() - 1.0)
        if err_trace > trace_tol:
            raise TruncationError(
                f"trace deviates by {err_trace:.3e} (> {trace_tol:g}); "
                "increase n_max")
        err_herm = float(np.max(np.abs(self.matrix - self.matrix.conj().T)))
        if err_herm > hermiticity_tol:
            raise TruncationError(
                f"Hermiticity violated by {err_herm:.3e} (> {hermiticity_tol:g})")
        min_eig = float(np.linalg.eigvalsh(self.matrix)[0])
        if min_eig < -eigenvalue_tol:
            raise TruncationError(
                f"negative eigenvalue {min_eig:.3e} (< -{eigenvalue_tol:g}); "
                "increase n_max")

    @classmethod
    def thermal(cls, params: SystemParams, cfg: OracleConfig) -> "DensityMatrix":
        """Maximally mixed spins with a (truncated, renormalized) thermal field."""
        n = np.arange(cfg.n_max + 1, dtype=float)
        if params.n_bar > 0:
            weights = (params.n_bar / (params.n_bar + 1.0)) ** n
        else:
            weights = np.zeros(cfg.n_max + 1)
            weights[0] = 1.0
        weights = weights / weights.sum()
        rho_f = np.diag(weights).astype(complex)
        rho_s = np.eye(2 ** cfg.n_spins, dtype=complex) / 2 ** cfg.n_spins
        return cls(np.kron(rho_f, rho_s))

    @classmethod
    def basis(cls, cfg: OracleConfig, fock: int, spin_bits: int = 0) -> "DensityMatrix":
        """Pure product basis state |fock> x |spin bit-string>."""
        dim = cfg.dimension
        idx = fock * 2 ** cfg.n_spins + spin_bits
        rho = np.zeros((dim, dim), dtype=complex)
        rho[idx, idx] = 1.0
        return cls(rho)


# --------------------------------------------------------------------------
# generator and propagation
# --------------------------------------------------------------------------

def _dissipator(c: sp.spmatrix) -> sp.spmatrix:
    """Row-major-vec superoperator of D[c] rho = c rho c^dag - {c^dag c, rho}/2."""
    cd_c = (c.getH() @ c).tocsr()
    eye = sp.identity(c.shape[0], dtype=complex, format="csr")
    return (sp.kron(c, c.conj(), format="csr")
            - 0.5 * sp.kron(cd_c, eye, format="csr")
            - 0.5 * sp.kron(eye, cd_c.T, format="csr"))


def build_generator(params: SystemParams, cfg: OracleConfig) -> sp.csr_matrix:
    """Sparse Liouvillian acting on the row-major vectorized density matrix."""
    a_d, sigmas_d, sigma_zs_d = _operator_set(cfg.n_max, cfg.n_spins)
    a = sp.csr_matrix(a_d)
    sigmas = [sp.csr_matrix(s) for s in sigmas_d]
    sigma_zs = [sp.csr_matrix(s) for s in sigma_zs_d]
    ad = a.getH()

    h = params.delta_c * (ad @ a)
    for k in range(cfg.n_spins):
        sk = sigmas[k]
        h = h + 0.5 * params.delta0 * sigma_zs[k] \
            + 1j * params.g1 * ((a + ad) @ (sk - sk.getH())) \
            + 0.5 * params.omega_rabi * (sk + sk.getH())
    h = h.tocsr()

    eye = sp.identity(h.shape[0], dtype=complex, format="csr")
    gen = -1j * (sp.kron(h, eye, format="csr") - sp.kron(eye, h.T, format="csr"))

    gen = gen + 2.0 * params.kappa * (params.n_bar + 1.0) * _dissipator(a)
    if params.n_bar > 0:
        gen = gen + 2.0 * params.kappa * params.n_bar * _dissipator(ad)
    for k in range(cfg.n_spins):
        gen = gen + params.gamma1 * (params.n_bar + 1.0) * _dissipator(sigmas[k])
        if params.n_bar > 0:
            gen = gen + params.gamma1 * params.n_bar * _dissipator(sigmas[k].getH())
        if params.gamma2_star > 0:
            gen = gen + 0.5 * params.gamma2_star * _dissipator(sigma_zs[k])
    return gen.tocsr()


@dataclass(frozen=True)
class OracleRun:
    """Sampled exact evolution."""

    times: np.ndarray
    matrices: np.ndarray  # (k, dim, dim) complex

    def __len__(self):
        return len(self.times)

    def state_at(self, i: int) -> DensityMatrix:
        return DensityMatrix(self.matrices[i])


def evolve(rho0: DensityMatrix, generator: sp.spmatrix, cfg: OracleConfig) -> OracleRun:
    """Propagate the master equation, sampling uniformly on [0, t_end].

    The generator is time independent, so the exact action of the matrix
    exponential is applied (scaled Taylor with 1-norm error control); its
    accuracy is at or below cfg.rel_tol/abs_tol in practice.  Every sample
    is validated against the DensityMatrix invariants; a breach raises
    TruncationError recommending a larger n_max.
    """
    rho0.validate(cfg.trace_tol, max(cfg.hermiticity_tol, 1e-12), cfg.eigenvalue_tol)
    dim = rho0.dimension
    times = np.linspace(0.0, cfg.t_end, cfg.sample_count)
    stacked = expm_multiply(generator.tocsc(), rho0.matrix.ravel(),
                            start=0.0, stop=cfg.t_end, num=cfg.sample_count,
                            endpoint=True)
    matrices = np.ascontiguousarray(stacked).reshape(cfg.sample_count, dim, dim)
    for i in range(cfg.sample_count):
        DensityMatrix(matrices[i]).validate(
            cfg.trace_tol, cfg.hermiticity_tol * 10, cfg.eigenvalue_tol)
    return OracleRun(times=times, matrices=matrices)


# --------------------------------------------------------------------------
# moment extraction
# --------------------------------------------------------------------------

def extract_moments(rho: DensityMatrix, cfg: OracleConfig) -> MomentState:
    """All twelve canonical moments, site-symmetrically averaged.

    Single-site expectations average over sites and pair expectations over
    all ordered pairs.  With one spin the pair entries are reported as NaN
    (not applicable).
    """
    a, sigmas, sigma_zs = _operator_set(cfg.n_max, cfg.n_spins)
    ad = a.conj().T
    ev = rho.expect
    s_count = cfg.n_spins

    def site_avg(ops):
        return sum(ev(o) for o in ops) / len(ops)

    m_a = ev(a)
    m_aa = ev(a @ a)
    m_ada = ev(ad @ a)
    m_s = site_avg(sigmas)
    m_sds = site_avg([s.conj().T @ s for s in sigmas])
    m_as = site_avg([a @ s for s in sigmas])
    m_ads = site_avg([ad @ s for s in sigmas])
    m_az = site_avg([a @ z for z in sigma_zs])

    if s_count >= 2:
        pairs = [(i, j) for i in range(s_count) for j in range(s_count) if i != j]
        m_ss = sum(ev(sigmas[i] @ sigmas[j]) for i, j in pairs) / len(pairs)
        m_sds2 = sum(ev(sigmas[i].conj().T @ sigmas[j]) for i, j in pairs) / len(pairs)
        m_zz = sum(ev(sigma_zs[i] @ sigma_zs[j]) for i, j in pairs) / len(pairs)
        m_sz = sum(ev(sigmas[i] @ sigma_zs[j]) for i, j in pairs) / len(pairs)
    else:
        m_ss = m_sds2 = m_zz = m_sz = complex(math.nan, math.nan)

    return MomentState(m_a=m_a, m_s=m_s, m_aa=m_aa, m_ada=m_ada, m_sds=m_sds,
                       m_ss=m_ss, m_sds2=m_sds2, m_zz=m_zz, m_sz=m_sz,
                       m_as=m_as, m_ads=m_ads, m_az=m_az)


def pair_moment(rho: DensityMatrix, cfg: OracleConfig, kind: str, i: int, j: int) -> complex:
    """One un-averaged pair moment for a specific ordered site pair.

    kind is one of 'ss', 'sds2', 'zz', 'sz'.  Used to assert site-exchange
    symmetry of symmetric states.
    """
    _, sigmas, sigma_zs = _operator_set(cfg.n_max, cfg.n_spins)
    if kind == "ss":
        op = sigmas[i] @ sigmas[j]
    elif kind == "sds2":
        op = sigmas[i].conj().T @ sigmas[j]
    elif kind == "zz":
        op = sigma_zs[i] @ sigma_zs[j]
    elif kind == "sz":
        op = sigmas[i] @ sigma_zs[j]
    else:
        raise ParameterError(f"unknown pair moment kind {kind!r}")
    return rho.expect(op)


# --------------------------------------------------------------------------
# model-vs-oracle comparison
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ComparisonReport:
    """Per-moment and observable-level deviations, oracle as reference."""

    times: np.ndarray
    oracle_moments: np.ndarray   # (k, 12)
    model_moments: np.ndarray    # (k, 12)
    moment_abs_dev: dict
    moment_rel_dev: dict         # relative where |oracle| > rel_floor
    oracle_scale: dict           # max |oracle| per moment
    observable_abs_dev: dict
    rel_floor: float

    def worst_relative(self) -> float:
        values = [v for v in self.moment_rel_dev.values() if not math.isnan(v)]
        return max(values) if values else math.nan

    def summary(self) -> str:
        lines = ["moment    max|oracle|   abs dev      rel dev"]
        for name in MOMENT_NAMES:
            lines.append(
                f"{name:8s}  {self.oracle_scale[name]:.4e}  "
                f"{self.moment_abs_dev[name]:.4e}  {self.moment_rel_dev[name]:.4e}")
        for key, val in self.observable_abs_dev.items():
            lines.append(f"{key:22s} abs dev {val:.4e}")
        return "\n".join(lines)


def compare_with_cumulant(params: SystemParams, cfg: OracleConfig,
                          variant: str = "lindblad",
                          rel_floor: float = 1e-4) -> ComparisonReport:
    """Run oracle and moment model from the same thermal start and compare.

    Relative deviations are quoted where the oracle magnitude exceeds
    rel_floor; below that only the absolute deviation is meaningful (NaN
    recorded for the relative entry).  Pair moments are skipped for one
    spin.  Breakdown at strong drive shows up as large deviations; nothing
    is clipped.
    """
    if cfg.n_spins != params.n_emitters:
        raise ParameterError(
            f"oracle n_spins ({cfg.n_spins}) must equal n_emitters ({params.n_emitters})")
    gen = build_generator(params, cfg)
    run = evolve(DensityMatrix.thermal(params, cfg), gen, cfg)
    oracle = np.array([extract_moments(run.state_at(i), cfg).to_complex()
                       for i in range(len(run))])

    icfg = IntegrationConfig(t_end=cfg.t_end, sample_count=cfg.sample_count,
                             rel_tol=min(cfg.rel_tol, 1e-9), abs_tol=min(cfg.abs_tol, 1e-11))
    trace = integrate_trace(params, initial_thermal_state(params), icfg, variant)
    model = trace.moments

    abs_dev, rel_dev, scale = {}, {}, {}
    for idx, name in enumerate(MOMENT_NAMES):
        o = oracle[:, idx]
        if np.any(np.isnan(o.real)):
            abs_dev[name] = math.nan
            rel_dev[name] = math.nan
            scale[name] = math.nan
            continue
        d = np.abs(o - model[:, idx])
        mag = np.abs(o)
        abs_dev[name] = float(d.max())
        scale[name] = float(mag.max())
        big = mag > rel_floor
        rel_dev[name] = float((d[big] / mag[big]).max()) if big.any() else math.nan

    observables = {}
    o_var, _, _ = min_cavity_quadrature_series(oracle)
    m_var, _, _ = min_cavity_quadrature_series(model)
    observables["cavity_var_min"] = float(np.max(np.abs(o_var - m_var)))
    if params.n_emitters >= 2:
        o_ens, _ = min_ensemble_quadrature_series(oracle, params)
        m_ens, _ = min_ensemble_quadrature_series(model, params)
        observables["ensemble_var_min"] = float(np.max(np.abs(o_ens - m_ens)))
        o_mean, o_jvar, _ = spin_metrics_series(oracle, params)
        m_mean, m_jvar, _ = spin_metrics_series(model, params)
        observables["j_mean"] = float(np.max(np.abs(o_mean - m_mean)))
        observables["j_var"] = float(np.max(np.abs(o_jvar - m_jvar)))

    return ComparisonReport(times=run.times, oracle_moments=oracle,
                            model_moments=model, moment_abs_dev=abs_dev,
                            moment_rel_dev=rel_dev, oracle_scale=scale,
                            observable_abs_dev=observables, rel_floor=rel_floor)


# --------------------------------------------------------------------------
# single-spin (2x2) steady state
# --------------------------------------------------------------------------

def spin_steady_state(params: SystemParams):
    """Exact stationary (m_s, m_sds) of one free-space spin (g1 = 0).

    Solves the 4x4 Liouvillian null space with the trace constraint; the
    reference for the Bloch-limit and free-space benchmarks.
    """
    h = 0.5 * params.delta0 * _SIGMA_Z + 0.5 * params.omega_rabi * (_SIGMA + _SIGMA.conj().T)
    eye = np.eye(2, dtype=complex)
    gen = -1j * (np.kron(h, eye) - np.kron(eye, h.T))

    def add_dissipator(c, rate):
        nonlocal gen
        cd_c = c.conj().T @ c
        gen = gen + rate * (np.kron(c, c.conj())
                            - 0.5 * np.kron(cd_c, eye)
                            - 0.5 * np.kron(eye, cd_c.T))

    add_dissipator(_SIGMA, params.gamma1 * (params.n_bar + 1.0))
    if params.n_bar > 0:
        add_dissipator(_SIGMA.conj().T, params.gamma1 * params.n_bar)
    if params.gamma2_star > 0:
        add_dissipator(_SIGMA_Z, 0.5 * params.gamma2_star)

    # stack the trace constraint and solve the bordered least-squares system
    trace_row = np.eye(2, dtype=complex).ravel()[None, :]
    a_mat = np.vstack([gen, trace_row])
    b = np.zeros(5, dtype=complex)
    b[4] = 1.0
    rho_vec, *_ = np.linalg.lstsq(a_mat, b, rcond=None)
    rho = rho_vec.reshape(2, 2)
    m_s = complex(np.trace(_SIGMA @ rho))
    m_sds = complex(np.trace(_SIGMA.conj().T @ _SIGMA @ rho))
    return m_s, m_sds
