"""Adaptive time integration, steady-state finding, and verification.

The moment system turns severely stiff once detunings grow and the single
cooperativity exceeds unity, so integration uses lsoda, which switches
automatically between Adams and BDF with stiffness detection.  Failure to
reach t_end is a first-class outcome carrying the partial trace.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import ode

from .errors import ContractViolation, IntegrationFailure, NoSteadyStateError, ParameterError
from .model import make_rhs
from .params import MomentState, STATE_DIM, SystemParams, initial_thermal_state, physicality_flags

__all__ = [
    "IntegrationConfig",
    "Trace",
    "SteadyState",
    "integrate_trace",
    "find_steady_state",
    "verify_steady",
]

log = logging.getLogger(__name__)

_SQRT_EPS = math.sqrt(np.finfo(float).eps)


@dataclass(frozen=True)
class IntegrationConfig:
    """Controls for one integration run (times in units of 1/kappa)."""

    t_end: float
    sample_count: int = 1001
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_step: Optional[float] = None
    hermiticity_tol: float = 1e-8

    def __post_init__(self):
        if not (self.t_end > 0):
            raise ParameterError(f"t_end must be > 0, got {self.t_end}")
        if self.sample_count < 2:
            raise ParameterError(f"sample_count must be >= 2, got {self.sample_count}")
        if not (self.rel_tol > 0 and self.abs_tol > 0 and self.hermiticity_tol > 0):
            raise ParameterError("tolerances must be > 0")
        if self.max_step is not None and not (self.max_step > 0):
            raise ParameterError("max_step must be > 0 when given")


@dataclass(frozen=True)
class Trace:
    """Uniformly sampled moment trajectory with physicality flags."""

    times: np.ndarray           # (n,) strictly increasing, uniform
    moments: np.ndarray         # (n, 12) complex, canonical order
    flags: np.ndarray           # (n,) uint8 bitmask (params.FLAG_*)

    def __post_init__(self):
        if len(self.times) != len(self.moments) or len(self.times) != len(self.flags):
            raise ContractViolation("trace arrays must have equal length")

    def __len__(self):
        return len(self.times)

    def state_at(self, i: int) -> MomentState:
        return MomentState.from_complex(self.moments[i])

    @property
    def final_state(self) -> MomentState:
        return self.state_at(len(self) - 1)

    def column(self, name_index: int) -> np.ndarray:
        return self.moments[:, name_index]


@dataclass(frozen=True)
class SteadyState:
    """A stationary point of the moment equations.

    residual_norm is the max-norm of the derivative at the solution; it is
    recorded, never assumed zero.  method records which path produced it.
    """

    state: MomentState
    residual_norm: float
    verified: bool
    method: str  # "root_find" | "long_integration"


def _solver(f, y0, cfg: IntegrationConfig):
    r = ode(f)
    kwargs = dict(rtol=cfg.rel_tol, atol=cfg.abs_tol, nsteps=10_000_000)
    if cfg.max_step is not None:
        kwargs["max_step"] = cfg.max_step
    r.set_integrator("lsoda", **kwargs)
    r.set_initial_value(np.asarray(y0, dtype=float), 0.0)
    return r


def integrate_trace(params: SystemParams, init: MomentState, cfg: IntegrationConfig,
                    variant: str = "lindblad") -> Trace:
    """Integrate the moment equations and sample uniformly on [0, t_end].

    Raises IntegrationFailure (carrying the partial trace and failure time)
    on step-size underflow or a non-finite state; some strongly driven
    configurations genuinely do this.
    """
    y0 = init.to_vector()
    if not np.all(np.isfinite(y0)):
        raise ContractViolation("initial state contains non-finite components")
    f = make_rhs(params, variant)
    times = np.linspace(0.0, cfg.t_end, cfg.sample_count)
    moments = np.empty((cfg.sample_count, 12), dtype=complex)
    flags = np.zeros(cfg.sample_count, dtype=np.uint8)
    moments[0] = y0.view(np.complex128)
    flags[0] = physicality_flags(moments[0], cfg.hermiticity_tol)

    r = _solver(f, y0, cfg)
    for i in range(1, cfg.sample_count):
        failed = False
        try:
            y = r.integrate(times[i])
        except ContractViolation:
            failed = True
            y = None
        if failed or not r.successful() or not np.all(np.isfinite(y)):
            partial = Trace(times[:i].copy(), moments[:i].copy(), flags[:i].copy())
            raise IntegrationFailure(
                f"integration failed at t ~ {r.t:.6g} (of {cfg.t_end:g})",
                partial_trace=partial, failure_time=float(r.t))
        moments[i] = y.view(np.complex128)
        flags[i] = physicality_flags(moments[i], cfg.hermiticity_tol)
    return Trace(times, moments, flags)


def _slowest_rate(params: SystemParams) -> float:
    """Smallest nonzero rate among kappa, gamma1, gamma2*, |gamma_t|,
    and (when nonzero) Omega and the collective coupling."""
    rates = [params.kappa, params.gamma1, params.gamma2_star,
             abs(params.gamma_t), params.omega_rabi, params.collective_coupling]
    nonzero = [r for r in rates if r > 0]
    if not nonzero:
        raise ParameterError("all rates are zero; no timescale to verify against")
    return min(nonzero)


def verify_steady(params: SystemParams, candidate: MomentState, cfg: IntegrationConfig,
                  variant: str = "lindblad") -> bool:
    """Integrate from the candidate for ten times the slowest timescale and
    check that the max-norm drift stays within tolerance.

    The drift tolerance scales with the candidate's magnitude so that
    integrator noise on large-amplitude states is not mistaken for
    instability: 1e3 * (abs_tol + rel_tol * |candidate|_inf).
    """
    if not candidate.is_finite():
        raise ContractViolation("candidate contains non-finite components")
    duration = 10.0 / _slowest_rate(params)
    y0 = candidate.to_vector()
    scale = float(np.max(np.abs(y0)))
    drift_tol = 1e3 * (cfg.abs_tol + cfg.rel_tol * scale)
    check_cfg = IntegrationConfig(
        t_end=duration, sample_count=64, rel_tol=cfg.rel_tol,
        abs_tol=cfg.abs_tol, max_step=cfg.max_step,
        hermiticity_tol=cfg.hermiticity_tol)
    try:
        trace = integrate_trace(params, candidate, check_cfg, variant)
    except IntegrationFailure as exc:
        log.info("steady-state verification integration failed: %s", exc)
        return False
    drift = np.max(np.abs(trace.moments - trace.moments[0]))
    return bool(drift < drift_tol)


def _unphysical_root(y: np.ndarray, hermiticity_tol: float) -> bool:
    """Reject stationary points outside the physical manifold.

    The closure polynomial has spurious roots (negative photon number,
    populations outside [0, 1], pair correlators beyond unit magnitude);
    Newton can converge onto them from strongly driven seeds.
    """
    values = y.view(np.complex128)
    if physicality_flags(values, hermiticity_tol) != 0:
        return True
    slack = 1.0 + 1e-6
    if abs(values[6].real) > slack or abs(values[7].real) > slack:  # m_sds2, m_zz
        return True
    if abs(values[5]) > slack or abs(values[8]) > slack:  # m_ss, m_sz
        return True
    return False


def _newton(f, y0, tol, max_iter=60):
    """Damped Newton iteration on f(y) = 0 with forward-difference Jacobian.

    Returns (y, residual_norm, converged).  The per-component FD step is
    sqrt(eps) * max(1, |y_i|), which is accurate enough for a 24-dim system
    and immune to closure algebra mistakes an analytic Jacobian could hide.
    """
    y = np.asarray(y0, dtype=float).copy()
    fy = f(0.0, y)
    norm = np.max(np.abs(fy))
    n = len(y)
    for _ in range(max_iter):
        if norm < tol:
            return y, norm, True
        jac = np.empty((n, n))
        for j in range(n):
            step = _SQRT_EPS * max(1.0, abs(y[j]))
            yp = y.copy()
            yp[j] += step
            jac[:, j] = (f(0.0, yp) - fy) / step
        try:
            delta = np.linalg.solve(jac, -fy)
        except np.linalg.LinAlgError:
            return y, norm, False
        if not np.all(np.isfinite(delta)):
            return y, norm, False
        # backtracking line search on the residual max-norm
        lam = 1.0
        for _ in range(12):
            y_try = y + lam * delta
            try:
                f_try = f(0.0, y_try)
            except ContractViolation:
                lam *= 0.5
                continue
            norm_try = np.max(np.abs(f_try))
            if norm_try < norm or lam < 1e-3:
                y, fy, norm = y_try, f_try, norm_try
                break
            lam *= 0.5
        else:
            return y, norm, False
    return y, norm, norm < tol


def find_steady_state(params: SystemParams, cfg: IntegrationConfig,
                      variant: str = "lindblad", verify: bool = True,
                      relax_time: float = 20.0) -> SteadyState:
    """Locate a stationary point of the moment equations.

    A short relaxation from the thermal state seeds a damped Newton
    iteration; if Newton stalls or its Jacobian is near-singular, the
    system is integrated until the residual max-norm falls below abs_tol.
    The result is checked with verify_steady; an unstable or drifting
    candidate raises NoSteadyStateError (limit cycle / lasing runaway),
    unless verify=False, in which case `verified` records the outcome.
    """
    f = make_rhs(params, variant)
    # Newton polishes to cfg.abs_tol regardless of seed quality, so the
    # relaxation only has to land in the right basin; loose tolerances keep
    # it cheap in stiff, strongly detuned regimes.
    seed_cfg = IntegrationConfig(
        t_end=relax_time / params.kappa, sample_count=16,
        rel_tol=max(cfg.rel_tol, 1e-6), abs_tol=max(cfg.abs_tol, 1e-9),
        max_step=cfg.max_step, hermiticity_tol=cfg.hermiticity_tol)
    try:
        seed = integrate_trace(params, initial_thermal_state(params), seed_cfg, variant)
        y_seed = seed.moments[-1].view(np.float64).copy()
    except IntegrationFailure as exc:
        raise NoSteadyStateError(
            f"relaxation toward a steady state failed: {exc}") from exc

    y, norm, converged = _newton(f, y_seed, cfg.abs_tol)
    method = "root_find"
    unphysical_hits = 0
    if converged and _unphysical_root(y, cfg.hermiticity_tol):
        converged = False
        unphysical_hits += 1
    if not converged:
        # fall back to long integration, windowed by the slowest timescale
        method = "long_integration"
        window = 10.0 / _slowest_rate(params)
        y = y_seed
        for _ in range(6):
            win_cfg = IntegrationConfig(
                t_end=window, sample_count=8, rel_tol=max(cfg.rel_tol, 1e-8),
                abs_tol=cfg.abs_tol, max_step=cfg.max_step,
                hermiticity_tol=cfg.hermiticity_tol)
            try:
                tr = integrate_trace(params, MomentState.from_vector(y), win_cfg, variant)
            except IntegrationFailure as exc:
                raise NoSteadyStateError(
                    f"long-integration fallback failed: {exc}") from exc
            y = tr.moments[-1].view(np.float64).copy()
            norm = float(np.max(np.abs(f(0.0, y))))
            if norm < cfg.abs_tol:
                break
            # replenish with Newton once the trajectory has settled a bit
            y_new, norm_new, converged = _newton(f, y, cfg.abs_tol, max_iter=20)
            if converged:
                if _unphysical_root(y_new, cfg.hermiticity_tol):
                    unphysical_hits += 1
                    if unphysical_hits >= 2:
                        # the flow keeps landing on a spurious branch; the
                        # physical trajectory is not settling
                        raise NoSteadyStateError(
                            "iteration repeatedly converges to an unphysical "
                            "branch; no physical steady state found",
                            candidate=MomentState.from_vector(y_new),
                            residual_norm=norm_new)
                else:
                    y, norm, method = y_new, norm_new, "root_find"
                    break
        if norm >= cfg.abs_tol:
            raise NoSteadyStateError(
                f"no steady state within budget (residual {norm:.3e}); "
                "likely a limit cycle or lasing runaway - use integrate_trace",
                candidate=MomentState.from_vector(y), residual_norm=norm)

    state = MomentState.from_vector(y)
    if verify:
        ok = verify_steady(params, state, cfg, variant)
        if not ok:
            raise NoSteadyStateError(
                "candidate stationary point failed drift verification "
                "(persistent modulation or instability)",
                candidate=state, residual_norm=norm)
        return SteadyState(state=state, residual_norm=norm, verified=True, method=method)
    return SteadyState(state=state, residual_norm=norm, verified=False, method=method)
