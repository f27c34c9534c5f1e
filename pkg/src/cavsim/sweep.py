"""Parameter-grid execution engine with figure presets and CSV persistence.

Grid points are independent tasks; execution may fan out over a process
pool, but assembly order (row-major over the declared axes) and the CSV
byte stream are deterministic regardless of worker count.  Per-point
failures are data, not errors: a point that has no steady state falls back
to the dynamical minimum and is flagged.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import IntegrationFailure, NoSteadyStateError, ParameterError, SchemaError
from .integrate import IntegrationConfig, Trace, find_steady_state, integrate_trace
from .model import EOM_VARIANTS
from .observables import (CLASSIFICATIONS, _classify, cavity_variance_series,
                          lasing_threshold_margin, min_cavity_quadrature_series,
                          min_ensemble_quadrature_series, spin_metrics_series,
                          to_db)
from .params import MomentState, SystemParams, initial_thermal_state
from .spectral import PsdEstimate, normally_ordered_variance_series, welch_psd

__all__ = [
    "SweepAxis",
    "PsdSettings",
    "SweepSpec",
    "SweepRecord",
    "SweepResult",
    "run_sweep",
    "figure_preset",
    "PRESET_NAMES",
    "write_csv",
    "read_csv",
    "records_equivalent",
    "CSV_HEADER",
]

SWEEP_MODES = ("steady", "trace_min", "psd")

#: Parameter names an axis may sweep; "z" sweeps the scaled drive
#: (Omega/|gamma_t|)^2 and is converted to omega_rabi per grid point.
AXIS_NAMES = ("n_emitters", "g1", "kappa", "gamma1", "gamma2_star",
              "omega_rabi", "delta0", "delta_c", "n_bar", "z")

CSV_HEADER = ("axis1,axis2,converged,var_min_db,theta_min,n_photons,"
              "ens_var_min_db,xi2_x,xi2_y,xi2_z,classification,lasing_margin,flag")


@dataclass(frozen=True)
class SweepAxis:
    """One swept parameter: either a (min, max, count) range with linear or
    log spacing, or an explicit value tuple for non-uniform grids."""

    name: str
    minimum: float = 0.0
    maximum: float = 0.0
    count: int = 2
    spacing: str = "linear"
    explicit: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if self.name not in AXIS_NAMES:
            raise ParameterError(f"unknown axis {self.name!r}; known: {AXIS_NAMES}")
        if self.explicit is not None:
            if len(self.explicit) < 1:
                raise ParameterError("explicit axis needs at least one value")
            return
        if self.count < 1:
            raise ParameterError(f"axis count must be >= 1, got {self.count}")
        if self.spacing not in ("linear", "log"):
            raise ParameterError(f"spacing must be linear or log, got {self.spacing!r}")
        if self.spacing == "log" and (self.minimum <= 0 or self.maximum <= 0):
            raise ParameterError("log spacing requires positive bounds")

    def values(self) -> np.ndarray:
        if self.explicit is not None:
            return np.asarray(self.explicit, dtype=float)
        if self.count == 1:
            return np.array([self.minimum], dtype=float)
        if self.spacing == "log":
            return np.geomspace(self.minimum, self.maximum, self.count)
        return np.linspace(self.minimum, self.maximum, self.count)


@dataclass(frozen=True)
class PsdSettings:
    """Spectral-estimation settings for psd-mode sweeps."""

    theta: float = 0.0
    segment_length: Optional[int] = None
    overlap_fraction: float = 0.5
    window: str = "hann"
    epsilon: float = 1.0
    varrho: float = 1.0


@dataclass(frozen=True)
class SweepSpec:
    """A parameter grid plus the per-mode evaluation settings."""

    base: SystemParams
    axes: Tuple[SweepAxis, ...]
    mode: str = "steady"
    integration: IntegrationConfig = field(
        default_factory=lambda: IntegrationConfig(t_end=200.0, sample_count=2001))
    theta_policy: str = "optimized"   # "optimized" | "fixed"
    theta: float = 0.0
    transient_fraction: float = 0.2
    scaled_drive: Optional[float] = None   # base z, converted per point
    psd: PsdSettings = field(default_factory=PsdSettings)
    variant: str = "lindblad"

    def __post_init__(self):
        if self.mode not in SWEEP_MODES:
            raise ParameterError(f"unknown sweep mode {self.mode!r}; known: {SWEEP_MODES}")
        if not (1 <= len(self.axes) <= 2):
            raise ParameterError("a sweep needs one or two axes")
        if self.theta_policy not in ("optimized", "fixed"):
            raise ParameterError(f"theta_policy must be optimized or fixed")
        if not (0.0 <= self.transient_fraction < 1.0):
            raise ParameterError("transient_fraction must lie in [0, 1)")
        if self.variant not in EOM_VARIANTS:
            raise ParameterError(f"unknown EOM variant {self.variant!r}")


@dataclass(frozen=True)
class SweepRecord:
    """Observables for one grid point; NaN marks unavailable entries."""

    axis1: float
    axis2: Optional[float]
    converged: bool
    var_min_db: float
    theta_min: float
    n_photons: float
    ens_var_min_db: float
    xi2_x: float
    xi2_y: float
    xi2_z: float
    classification: str
    lasing_margin: float
    flag: str


@dataclass(frozen=True)
class SweepResult:
    """Row-major records over the declared grid, optional PSD attachments."""

    axis_names: Tuple[str, ...]
    axis_values: Tuple[np.ndarray, ...]
    records: Tuple[SweepRecord, ...]
    psds: Optional[Tuple[Optional[PsdEstimate], ...]] = None

    def __len__(self):
        return len(self.records)

    def record_grid(self, attr: str) -> np.ndarray:
        """2D array (axis1 x axis2) of one record attribute (1D: (n, 1))."""
        n1 = len(self.axis_values[0])
        n2 = len(self.axis_values[1]) if len(self.axis_values) > 1 else 1
        values = np.array([getattr(r, attr) for r in self.records], dtype=float)
        return values.reshape(n1, n2)


def _point_params(spec: SweepSpec, values: Sequence[float]) -> SystemParams:
    """Parameters for one grid point, with z -> omega applied last."""
    overrides = {}
    z_value = spec.scaled_drive
    for axis, value in zip(spec.axes, values):
        if axis.name == "z":
            z_value = float(value)
        elif axis.name == "n_emitters":
            overrides[axis.name] = int(round(value))
        else:
            overrides[axis.name] = float(value)
    params = spec.base.replace(**overrides) if overrides else spec.base
    if z_value is not None:
        params = params.replace(omega_rabi=params.omega_for_scaled_drive(z_value))
    return params


def _nan_record(axis1, axis2, margin, flag) -> SweepRecord:
    nan = math.nan
    return SweepRecord(axis1=axis1, axis2=axis2, converged=False,
                       var_min_db=nan, theta_min=nan, n_photons=nan,
                       ens_var_min_db=nan, xi2_x=nan, xi2_y=nan, xi2_z=nan,
                       classification="none", lasing_margin=margin, flag=flag)


def _safe_db(variance: float, shot: float) -> float:
    if variance > 0 and shot > 0:
        return to_db(variance, shot)
    return math.nan


def _record_from_moments(spec: SweepSpec, params: SystemParams,
                         moments: np.ndarray, flags: np.ndarray,
                         axis1, axis2, converged, flag_tokens) -> SweepRecord:
    """Observables over a (window of a) trace or a single steady state."""
    if spec.theta_policy == "fixed":
        var = cavity_variance_series(moments, spec.theta)
        theta_arr = np.full(len(moments), spec.theta)
    else:
        var, theta_arr, _ = min_cavity_quadrature_series(moments)
    idx = int(np.argmin(var))
    var_min = float(var[idx])
    ens_var, _ = min_ensemble_quadrature_series(moments, params)
    ens_min = float(np.min(ens_var))
    j_mean, j_var, xi2 = spin_metrics_series(moments, params)
    with np.errstate(invalid="ignore"):
        xi2_min = [float(np.nanmin(xi2[:, k])) if not np.all(np.isnan(xi2[:, k]))
                   else math.nan for k in range(3)]
    classification = _classify(tuple(j_mean[idx]), tuple(j_var[idx]))
    tokens = list(flag_tokens)
    if np.any(flags):
        tokens.append("physicality")
    if var_min <= 0:
        tokens.append("nonpositive_variance")
    return SweepRecord(
        axis1=axis1, axis2=axis2, converged=converged,
        var_min_db=_safe_db(var_min, 1.0),
        theta_min=float(theta_arr[idx]),
        n_photons=float(np.real(moments[idx, 3])),
        ens_var_min_db=_safe_db(ens_min, 0.5 * params.n_emitters),
        xi2_x=xi2_min[0], xi2_y=xi2_min[1], xi2_z=xi2_min[2],
        classification=classification,
        lasing_margin=lasing_threshold_margin(params),
        flag=";".join(tokens) if tokens else "ok")


def _window(trace: Trace, fraction: float):
    start = int(fraction * len(trace))
    start = min(start, len(trace) - 1)
    return trace.moments[start:], trace.flags[start:]


def _trace_min_record(spec: SweepSpec, params: SystemParams, axis1, axis2,
                      converged=True, extra_flags=()):
    try:
        trace = integrate_trace(params, initial_thermal_state(params),
                                spec.integration, spec.variant)
    except IntegrationFailure:
        return _nan_record(axis1, axis2, lasing_threshold_margin(params),
                           ";".join(list(extra_flags) + ["integration_failed"])), None
    moments, flags = _window(trace, spec.transient_fraction)
    record = _record_from_moments(spec, params, moments, flags, axis1, axis2,
                                  converged, list(extra_flags))
    psd = None
    if spec.mode == "psd":
        series = normally_ordered_variance_series(trace, spec.psd.theta)
        start = int(spec.transient_fraction * len(series))
        dt = trace.times[1] - trace.times[0]
        psd = welch_psd(series[start:], sample_rate=1.0 / dt,
                        segment_length=spec.psd.segment_length,
                        overlap_fraction=spec.psd.overlap_fraction,
                        window=spec.psd.window)
    return record, psd


def evaluate_point(spec: SweepSpec, axis1: float, axis2: Optional[float]):
    """One grid point -> (SweepRecord, PsdEstimate | None).  Top-level so a
    process pool can pickle it; per-point failures become flagged records."""
    values = (axis1,) if axis2 is None else (axis1, axis2)
    try:
        params = _point_params(spec, values)
    except ParameterError:
        return _nan_record(axis1, axis2, math.nan, "invalid_point"), None
    if spec.mode in ("trace_min", "psd"):
        return _trace_min_record(spec, params, axis1, axis2)
    # steady mode, with dynamical fallback for points that refuse to settle
    try:
        ss = find_steady_state(params, spec.integration, spec.variant)
    except NoSteadyStateError:
        return _trace_min_record(spec, params, axis1, axis2,
                                 converged=False, extra_flags=("no_steady_state",))
    except IntegrationFailure:
        return _nan_record(axis1, axis2, lasing_threshold_margin(params),
                           "integration_failed"), None
    moments = ss.state.to_complex()[None, :]
    flags = np.zeros(1, dtype=np.uint8)
    return _record_from_moments(spec, params, moments, flags, axis1, axis2,
                                True, []), None


def _evaluate_star(task):
    spec, a1, a2 = task
    return evaluate_point(spec, a1, a2)


def run_sweep(spec: SweepSpec, jobs: int = 1) -> SweepResult:
    """Evaluate every grid point independently, in declared row-major order."""
    axis_values = tuple(axis.values() for axis in spec.axes)
    if len(spec.axes) == 1:
        tasks = [(spec, float(v), None) for v in axis_values[0]]
    else:
        tasks = [(spec, float(v1), float(v2))
                 for v1 in axis_values[0] for v2 in axis_values[1]]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_evaluate_star, tasks, chunksize=1))
    else:
        outcomes = [_evaluate_star(t) for t in tasks]
    records = tuple(rec for rec, _ in outcomes)
    psds = tuple(psd for _, psd in outcomes) if spec.mode == "psd" else None
    return SweepResult(axis_names=tuple(a.name for a in spec.axes),
                       axis_values=axis_values, records=records, psds=psds)


# --------------------------------------------------------------------------
# figure presets
# --------------------------------------------------------------------------

PRESET_NAMES = ("fig3a", "fig3b", "fig4a", "fig4b", "fig5", "fig6", "fig7",
                "fig8", "fig9a", "fig9b", "fig10", "fig11")

_STEADY_CFG = IntegrationConfig(t_end=200.0, sample_count=257)
_TRACE_CFG = IntegrationConfig(t_end=600.0, sample_count=2 ** 16 + 1)


def figure_preset(name: str) -> SweepSpec:
    """Parameter grids reproducing the reference squeezing studies.

    Grid resolutions and axis ranges for the 2D maps are read off the
    plotted ranges and are documented approximations; transcribed rates are
    exact.  Single-emitter map presets use unit coupling so the collective
    rate matches the ensemble presets.
    """
    if name == "fig3a":
        # free-space emitter vs scaled drive, dephasing from 0 to gamma1
        base = SystemParams(n_emitters=1, g1=0.0, gamma1=0.1)
        return SweepSpec(base=base, integration=_STEADY_CFG, axes=(
            SweepAxis("z", 1e-3, 10.0, 61, "log"),
            SweepAxis("gamma2_star", explicit=tuple(0.1 * f for f in
                                                    (0.0, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0)))))
    if name == "fig3b":
        # resonantly driven emitter for a few cavity couplings, kappa = 10*gamma1
        base = SystemParams(n_emitters=1, g1=0.0, gamma1=0.1)
        return SweepSpec(base=base, integration=_STEADY_CFG, axes=(
            SweepAxis("z", 1e-3, 10.0, 61, "log"),
            SweepAxis("g1", explicit=(0.0, 0.04, 0.06, 0.1))))
    if name == "fig4a":
        # resonant single emitter: cavity detuning x drive map
        base = SystemParams(n_emitters=1, g1=1.0, gamma1=0.1)
        return SweepSpec(base=base, integration=_STEADY_CFG, axes=(
            SweepAxis("delta_c", -30.0, 30.0, 101),
            SweepAxis("omega_rabi", 0.0, 10.0, 101)))
    if name == "fig4b":
        # detuned single emitter (delta0 = 25 kappa)
        base = SystemParams(n_emitters=1, g1=1.0, gamma1=0.1, delta0=25.0)
        return SweepSpec(base=base, integration=_STEADY_CFG, axes=(
            SweepAxis("delta_c", -50.0, 50.0, 101),
            SweepAxis("omega_rabi", 0.0, 10.0, 101)))
    if name == "fig5":
        # lasing onset vs coupling for several cavity detunings
        base = SystemParams(n_emitters=1, g1=1.0, gamma1=0.1, delta0=25.0,
                            omega_rabi=1.0)
        return SweepSpec(base=base, integration=_STEADY_CFG, axes=(
            SweepAxis("g1", 0.01, 10.0, 101, "log"),
            SweepAxis("delta_c", explicit=(-45.0, -35.0, -25.0, -15.0))))
    if name == "fig6":
        # ensemble with the same collective coupling as the single-emitter map
        base = SystemParams(n_emitters=10 ** 6, g1=1e-3, gamma1=0.1, delta0=25.0)
        return SweepSpec(base=base, integration=_STEADY_CFG, axes=(
            SweepAxis("delta_c", -50.0, 50.0, 101),
            SweepAxis("omega_rabi", 0.0, 10.0, 101)))
    if name == "fig7":
        # steady squeezing vs scaled drive for growing ensembles; the
        # cavity detuning sits where the (validated) equations actually
        # approach the -3 dB parametric bound with N <= 1e8
        base = SystemParams(n_emitters=10 ** 4, g1=1e-3, gamma1=0.1,
                            delta0=80.0, delta_c=-0.25)
        return SweepSpec(base=base, integration=_STEADY_CFG, axes=(
            SweepAxis("n_emitters", 1e4, 1e8, 5, "log"),
            SweepAxis("z", 1e-8, 1e-3, 25, "log")))
    if name == "fig8":
        # dephasing mitigation by emitter detuning at fixed weak scaled drive
        base = SystemParams(n_emitters=10 ** 8, g1=1e-3, gamma1=0.1,
                            delta0=80.0, delta_c=-5.0)
        return SweepSpec(base=base, integration=_STEADY_CFG, scaled_drive=1e-6, axes=(
            SweepAxis("delta0", 10.0, 3000.0, 31, "log"),
            SweepAxis("gamma2_star", explicit=(0.0, 0.01, 0.1, 1.0))))
    if name == "fig9a":
        # weakly driven far-detuned ensemble: settles to a squeezed state
        base = SystemParams(n_emitters=10 ** 8, g1=5e-3, gamma1=0.1,
                            delta0=100.0, delta_c=-100.0)
        return SweepSpec(base=base, mode="trace_min",
                         integration=IntegrationConfig(t_end=200.0, sample_count=8193),
                         axes=(SweepAxis("omega_rabi", explicit=(0.05, 0.2)),))
    if name == "fig9b":
        # strongly driven: superradiant lasing runaway regime
        base = SystemParams(n_emitters=10 ** 8, g1=5e-3, gamma1=0.1,
                            delta0=100.0, delta_c=-100.0)
        return SweepSpec(base=base, mode="trace_min",
                         integration=IntegrationConfig(t_end=50.0, sample_count=8193),
                         axes=(SweepAxis("omega_rabi", explicit=(5.0, 10.0)),))
    if name == "fig10":
        # frequency-modulated squeezing vs drive, cavity far above resonance
        base = SystemParams(n_emitters=10 ** 4, g1=5e-3, gamma1=0.1,
                            delta0=0.0, delta_c=100.0)
        return SweepSpec(base=base, mode="trace_min", integration=_TRACE_CFG,
                         axes=(SweepAxis("omega_rabi", 0.02, 0.1, 5, "log"),))
    if name == "fig11":
        # dephasing dependence of the modulated squeezing, with spectra
        base = SystemParams(n_emitters=10 ** 4, g1=5e-3, gamma1=0.1,
                            delta0=0.0, delta_c=100.0, omega_rabi=0.02)
        return SweepSpec(base=base, mode="psd", integration=_TRACE_CFG,
                         axes=(SweepAxis("gamma2_star",
                                         explicit=(0.0, 0.01, 0.02, 0.05, 0.1, 0.2)),))
    raise ParameterError(f"unknown preset {name!r}; known: {PRESET_NAMES}")


# --------------------------------------------------------------------------
# CSV persistence
# --------------------------------------------------------------------------

def records_equivalent(a: SweepRecord, b: SweepRecord) -> bool:
    """Field-wise equality treating NaN entries as equal (NaN marks
    'undefined', which survives the CSV round trip)."""
    for name in a.__dataclass_fields__:
        va, vb = getattr(a, name), getattr(b, name)
        if isinstance(va, float) and isinstance(vb, float):
            if math.isnan(va) and math.isnan(vb):
                continue
            if va != vb:
                return False
        elif va != vb:
            return False
    return True


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        return value
    return format(float(value), ".17g")


def _parse_float(token: str, line: int) -> float:
    try:
        return float(token)
    except ValueError:
        raise SchemaError(f"bad float {token!r}", line=line) from None


def write_csv(result: SweepResult, path) -> None:
    """Serialize records to the fixed schema: UTF-8, LF endings, 17
    significant digits, axis2 blank for one-axis sweeps."""
    if len(result.records) == 0:
        raise SchemaError("refusing to write an empty grid")
    lines = [CSV_HEADER]
    for r in result.records:
        lines.append(",".join([
            _fmt(r.axis1), _fmt(r.axis2), _fmt(r.converged), _fmt(r.var_min_db),
            _fmt(r.theta_min), _fmt(r.n_photons), _fmt(r.ens_var_min_db),
            _fmt(r.xi2_x), _fmt(r.xi2_y), _fmt(r.xi2_z), r.classification,
            _fmt(r.lasing_margin), r.flag]))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_csv(path) -> SweepResult:
    """Read a sweep CSV back; schema mismatches carry line numbers."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise SchemaError("empty file", line=1)
    header = lines[0]
    if header != CSV_HEADER:
        expected = CSV_HEADER.split(",")
        got = header.split(",")
        for i, col in enumerate(expected):
            if i >= len(got) or got[i] != col:
                bad = got[i] if i < len(got) else "<missing>"
                raise SchemaError(
                    f"header mismatch at column {i + 1}: expected {col!r}, got {bad!r}",
                    line=1)
        raise SchemaError("header has extra columns", line=1)
    records = []
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw:
            continue
        parts = raw.split(",")
        if len(parts) != 13:
            raise SchemaError(f"expected 13 columns, got {len(parts)}", line=lineno)
        if parts[2] not in ("true", "false"):
            raise SchemaError(f"bad boolean {parts[2]!r}", line=lineno)
        if parts[10] not in CLASSIFICATIONS:
            raise SchemaError(f"bad classification {parts[10]!r}", line=lineno)
        records.append(SweepRecord(
            axis1=_parse_float(parts[0], lineno),
            axis2=None if parts[1] == "" else _parse_float(parts[1], lineno),
            converged=parts[2] == "true",
            var_min_db=_parse_float(parts[3], lineno),
            theta_min=_parse_float(parts[4], lineno),
            n_photons=_parse_float(parts[5], lineno),
            ens_var_min_db=_parse_float(parts[6], lineno),
            xi2_x=_parse_float(parts[7], lineno),
            xi2_y=_parse_float(parts[8], lineno),
            xi2_z=_parse_float(parts[9], lineno),
            classification=parts[10],
            lasing_margin=_parse_float(parts[11], lineno),
            flag=parts[12]))
    if not records:
        raise SchemaError("no data rows", line=1)
    axis1 = np.array(list(dict.fromkeys(r.axis1 for r in records)))
    has_axis2 = records[0].axis2 is not None
    if has_axis2:
        axis2 = np.array(list(dict.fromkeys(r.axis2 for r in records)))
        return SweepResult(axis_names=("axis1", "axis2"),
                           axis_values=(axis1, axis2), records=tuple(records))
    return SweepResult(axis_names=("axis1",), axis_values=(axis1,),
                       records=tuple(records))
