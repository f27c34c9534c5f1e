"""Configuration file parsing and the section/key schema.

Grammar: ``[section]`` headers, ``key = value`` pairs, ``#`` comments
(whole-line or trailing), blank lines.  Numbers accept scientific
notation; booleans are ``true``/``false``; optional numeric keys accept
``none``.  Unknown sections or keys are hard errors, as are duplicate
keys (both lines are named).  Every key has a CLI override flag
``--<section>.<key>``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple

from .errors import ConfigError, ParameterError
from .integrate import IntegrationConfig
from .model import EOM_VARIANTS
from .oracle import OracleConfig
from .params import SystemParams
from .sweep import (AXIS_NAMES, PRESET_NAMES, SWEEP_MODES, PsdSettings,
                    SweepAxis, SweepSpec, figure_preset)

__all__ = ["RunConfig", "parse_config", "CONFIG_SCHEMA", "FieldSpec"]


def _nonneg(name):
    def check(v):
        if v < 0:
            raise ConfigError(f"{name} must be >= 0 (rates and occupancies are non-negative)")
    return check


def _positive(name):
    def check(v):
        if not (v > 0):
            raise ConfigError(f"{name} must be > 0")
    return check


def _at_least(name, bound):
    def check(v):
        if v < bound:
            raise ConfigError(f"{name} must be >= {bound}")
    return check


def _in_range(name, lo, hi):
    def check(v):
        if not (lo <= v <= hi):
            raise ConfigError(f"{name} must lie in [{lo}, {hi}]")
    return check


def _choice(name, options):
    def check(v):
        if v not in options:
            raise ConfigError(f"{name} must be one of {', '.join(options)}")
    return check


@dataclass(frozen=True)
class FieldSpec:
    kind: str                 # int | float | str | bool | optfloat | optint
    default: object
    help: str
    check: Optional[Callable] = None


CONFIG_SCHEMA: Dict[str, Dict[str, FieldSpec]] = {
    "system": {
        "n_emitters": FieldSpec("int", 1, "ensemble size N", _at_least("n_emitters", 1)),
        "g1": FieldSpec("float", 0.0, "single-emitter coupling (units of kappa)", _nonneg("g1")),
        "kappa": FieldSpec("float", 1.0, "cavity decay rate (the time unit)", _positive("kappa")),
        "gamma1": FieldSpec("float", 0.0, "longitudinal relaxation rate", _nonneg("gamma1")),
        "gamma2_star": FieldSpec("float", 0.0, "pure-dephasing rate", _nonneg("gamma2_star")),
        "omega_rabi": FieldSpec("float", 0.0, "driving Rabi frequency", _nonneg("omega_rabi")),
        "delta0": FieldSpec("float", 0.0, "emitter-drive detuning (any sign)"),
        "delta_c": FieldSpec("float", 0.0, "cavity-drive detuning (any sign)"),
        "n_bar": FieldSpec("float", 0.0, "thermal occupancy", _nonneg("n_bar")),
        "eom_variant": FieldSpec("str", "lindblad", "pair-moment damping variant",
                                 _choice("eom_variant", EOM_VARIANTS)),
    },
    "integration": {
        "t_end": FieldSpec("float", 200.0, "integration span (units of 1/kappa)",
                           _positive("t_end")),
        "sample_count": FieldSpec("int", 2001, "uniform samples", _at_least("sample_count", 2)),
        "rel_tol": FieldSpec("float", 1e-8, "relative local error tolerance", _positive("rel_tol")),
        "abs_tol": FieldSpec("float", 1e-10, "absolute local error tolerance", _positive("abs_tol")),
        "max_step": FieldSpec("optfloat", None, "optional step cap"),
        "hermiticity_tol": FieldSpec("float", 1e-8, "physicality monitoring tolerance",
                                     _positive("hermiticity_tol")),
    },
    "sweep": {
        "preset": FieldSpec("str", "", "figure preset name (empty = use axis keys)"),
        "mode": FieldSpec("str", "steady", "evaluation mode", _choice("mode", SWEEP_MODES)),
        "theta_policy": FieldSpec("str", "optimized", "quadrature phase policy",
                                  _choice("theta_policy", ("optimized", "fixed"))),
        "theta": FieldSpec("float", 0.0, "fixed quadrature phase (radians)"),
        "transient_fraction": FieldSpec("float", 0.2, "fraction of trace discarded",
                                        _in_range("transient_fraction", 0.0, 0.99)),
        "scaled_drive": FieldSpec("optfloat", None, "base scaled drive z (overrides omega_rabi)"),
        "axis1_name": FieldSpec("str", "", "first axis parameter",),
        "axis1_min": FieldSpec("float", 0.0, "first axis minimum"),
        "axis1_max": FieldSpec("float", 0.0, "first axis maximum"),
        "axis1_count": FieldSpec("int", 0, "first axis point count (0 = preset default)"),
        "axis1_scale": FieldSpec("str", "linear", "first axis spacing",
                                 _choice("axis1_scale", ("linear", "log"))),
        "axis2_name": FieldSpec("str", "", "second axis parameter (empty = 1D)"),
        "axis2_min": FieldSpec("float", 0.0, "second axis minimum"),
        "axis2_max": FieldSpec("float", 0.0, "second axis maximum"),
        "axis2_count": FieldSpec("int", 0, "second axis point count (0 = preset default)"),
        "axis2_scale": FieldSpec("str", "linear", "second axis spacing",
                                 _choice("axis2_scale", ("linear", "log"))),
    },
    "psd": {
        "theta": FieldSpec("float", 0.0, "quadrature phase of the analyzed series"),
        "segment_length": FieldSpec("optint", None, "segment length (none = len/8 pow2)"),
        "overlap_fraction": FieldSpec("float", 0.5, "segment overlap",
                                      _in_range("overlap_fraction", 0.0, 0.9)),
        "window": FieldSpec("str", "hann", "window function name"),
        "epsilon": FieldSpec("float", 1.0, "collection efficiency", _in_range("epsilon", 1e-12, 1.0)),
        "varrho": FieldSpec("float", 1.0, "detection efficiency", _in_range("varrho", 1e-12, 1.0)),
    },
    "oracle": {
        "n_spins": FieldSpec("int", 2, "exact-solver spin count", _in_range("n_spins", 1, 3)),
        "n_max": FieldSpec("int", 15, "Fock cutoff", _at_least("n_max", 1)),
        "t_end": FieldSpec("float", 50.0, "comparison span", _positive("t_end")),
        "sample_count": FieldSpec("int", 201, "comparison samples", _at_least("sample_count", 2)),
        "rel_tol": FieldSpec("float", 1e-8, "oracle relative tolerance", _positive("rel_tol")),
        "abs_tol": FieldSpec("float", 1e-10, "oracle absolute tolerance", _positive("abs_tol")),
        "dim_cap": FieldSpec("int", 4096, "Hilbert dimension cap", _at_least("dim_cap", 2)),
    },
    "coupling": {
        "density": FieldSpec("float", 1.76e23, "emitter density (m^-3)", _positive("density")),
        "cavity_length": FieldSpec("float", 1e-3, "cavity length (m)", _positive("cavity_length")),
        "wavelength": FieldSpec("float", 600e-9, "transition wavelength (m)",
                                _positive("wavelength")),
        "gamma1_hz": FieldSpec("float", 2e8, "longitudinal rate (Hz)", _positive("gamma1_hz")),
        "refractive_index": FieldSpec("float", 2.4, "host refractive index",
                                      _positive("refractive_index")),
        "zeta": FieldSpec("float", 0.75, "dipole alignment factor", _in_range("zeta", 1e-12, 1.0)),
    },
}


def _coerce(raw: str, spec: FieldSpec, where: str, line: Optional[int]):
    token = raw.strip()
    kind = spec.kind
    try:
        if kind == "int":
            value = int(token)
        elif kind == "float":
            value = float(token)
            if not math.isfinite(value):
                raise ValueError("not finite")
        elif kind == "bool":
            if token not in ("true", "false"):
                raise ValueError("expected true or false")
            value = token == "true"
        elif kind == "optfloat":
            value = None if token in ("none", "") else float(token)
        elif kind == "optint":
            value = None if token in ("none", "") else int(token)
        else:
            value = token
    except ValueError as exc:
        raise ConfigError(f"{where}: cannot parse {token!r} as {kind}: {exc}",
                          line=line) from None
    if spec.check is not None and value is not None:
        try:
            spec.check(value)
        except ConfigError as exc:
            raise ConfigError(f"{where}: {exc.args[0]}", line=line) from None
    return value


@dataclass
class RunConfig:
    """Typed configuration: defaults, file values, then flag overrides."""

    values: Dict[str, Dict[str, object]]

    @classmethod
    def defaults(cls) -> "RunConfig":
        return cls(values={section: {key: spec.default for key, spec in fields.items()}
                           for section, fields in CONFIG_SCHEMA.items()})

    def get(self, section: str, key: str):
        return self.values[section][key]

    def set_raw(self, section: str, key: str, raw: str, line: Optional[int] = None):
        if section not in CONFIG_SCHEMA:
            raise ConfigError(f"unknown section [{section}]", line=line)
        if key not in CONFIG_SCHEMA[section]:
            raise ConfigError(f"unknown key {key!r} in section [{section}]", line=line)
        self.values[section][key] = _coerce(raw, CONFIG_SCHEMA[section][key],
                                            f"[{section}] {key}", line)

    # -- object builders ------------------------------------------------------

    def system_params(self) -> SystemParams:
        sys_vals = {k: v for k, v in self.values["system"].items() if k != "eom_variant"}
        try:
            return SystemParams(**sys_vals)
        except ParameterError as exc:
            raise ConfigError(f"[system]: {exc}") from exc

    def variant(self) -> str:
        return self.values["system"]["eom_variant"]

    def integration_config(self) -> IntegrationConfig:
        try:
            return IntegrationConfig(**self.values["integration"])
        except ParameterError as exc:
            raise ConfigError(f"[integration]: {exc}") from exc

    def oracle_config(self) -> OracleConfig:
        try:
            return OracleConfig(**self.values["oracle"])
        except ParameterError as exc:
            raise ConfigError(f"[oracle]: {exc}") from exc

    def psd_settings(self) -> PsdSettings:
        return PsdSettings(**self.values["psd"])

    def _axis(self, which: str) -> Optional[SweepAxis]:
        v = self.values["sweep"]
        name = v[f"{which}_name"]
        if not name:
            return None
        try:
            return SweepAxis(name=name, minimum=v[f"{which}_min"],
                             maximum=v[f"{which}_max"], count=v[f"{which}_count"],
                             spacing=v[f"{which}_scale"])
        except ParameterError as exc:
            raise ConfigError(f"[sweep] {which}: {exc}") from exc

    def sweep_spec(self) -> SweepSpec:
        v = self.values["sweep"]
        preset = v["preset"]
        if preset:
            if preset not in PRESET_NAMES:
                raise ConfigError(f"[sweep] preset: unknown preset {preset!r}; "
                                  f"known: {', '.join(PRESET_NAMES)}")
            spec = figure_preset(preset)
            axes = list(spec.axes)
            for i, which in enumerate(("axis1", "axis2")):
                count = v[f"{which}_count"]
                if count and i < len(axes):
                    axis = axes[i]
                    if axis.explicit is not None:
                        values = axis.values()
                        lo, hi = float(values.min()), float(values.max())
                        spacing = "linear"
                        if lo > 0 and hi / max(lo, 1e-300) > 50:
                            spacing = "log"
                        axes[i] = SweepAxis(axis.name, lo, hi, count, spacing)
                    else:
                        axes[i] = SweepAxis(axis.name, axis.minimum, axis.maximum,
                                            count, axis.spacing)
            return SweepSpec(base=spec.base, axes=tuple(axes), mode=spec.mode,
                             integration=self.integration_config()
                             if self._integration_overridden() else spec.integration,
                             theta_policy=v["theta_policy"], theta=v["theta"],
                             transient_fraction=v["transient_fraction"],
                             scaled_drive=spec.scaled_drive,
                             psd=self.psd_settings(), variant=self.variant())
        axis1 = self._axis("axis1")
        if axis1 is None:
            raise ConfigError("[sweep]: need a preset or at least axis1_name")
        axes = (axis1,) if self._axis("axis2") is None else (axis1, self._axis("axis2"))
        try:
            return SweepSpec(base=self.system_params(), axes=axes, mode=v["mode"],
                             integration=self.integration_config(),
                             theta_policy=v["theta_policy"], theta=v["theta"],
                             transient_fraction=v["transient_fraction"],
                             scaled_drive=v["scaled_drive"],
                             psd=self.psd_settings(), variant=self.variant())
        except ParameterError as exc:
            raise ConfigError(f"[sweep]: {exc}") from exc

    def _integration_overridden(self) -> bool:
        defaults = {key: spec.default for key, spec in CONFIG_SCHEMA["integration"].items()}
        return self.values["integration"] != defaults

    def coupling_args(self) -> Dict[str, float]:
        return dict(self.values["coupling"])


def parse_config(text: str) -> RunConfig:
    """Parse a configuration file into a RunConfig with defaults applied."""
    cfg = RunConfig.defaults()
    seen: Dict[Tuple[str, str], int] = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0].rstrip()
        if not stripped.strip():
            continue
        line = stripped.strip()
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError("unterminated section header (missing ']')",
                                  line=lineno, column=len(stripped))
            section = line[1:-1].strip()
            if section not in CONFIG_SCHEMA:
                raise ConfigError(f"unknown section [{section}]", line=lineno, column=1)
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", line=lineno,
                              column=len(raw) - len(raw.lstrip()) + 1)
        if section is None:
            raise ConfigError("key outside any [section]", line=lineno, column=1)
        key, _, value = line.partition("=")
        key = key.strip()
        if (section, key) in seen:
            raise ConfigError(
                f"duplicate key {key!r} in [{section}] (first set on line "
                f"{seen[(section, key)]})", line=lineno)
        seen[(section, key)] = lineno
        cfg.set_raw(section, key, value, line=lineno)
    return cfg
