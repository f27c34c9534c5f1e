"""Command-line front-end.

Workflows: single trace, steady state, parameter sweeps, PSD estimation,
oracle comparison, coupling estimation.  Values are resolved as flags over
config-file entries over defaults; every config key has a ``--section.key``
override.  Exit codes: 0 success, 1 usage/configuration error, 2 numerical
failure (partial artifacts are written where they exist).  Errors go to
stderr with a machine-readable ``key=value`` diagnostic on the last line.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

import numpy as np

from .config import CONFIG_SCHEMA, RunConfig, parse_config
from .errors import (CavsimError, ConfigError, IntegrationFailure,
                     NoSteadyStateError, SchemaError, TruncationError)
from .integrate import Trace, find_steady_state, integrate_trace
from .observables import (_classify, estimate_coupling, lasing_threshold_margin,
                          min_cavity_quadrature_series,
                          min_ensemble_quadrature_series, spin_metrics_series)
from .oracle import compare_with_cumulant
from .params import MOMENT_NAMES, initial_thermal_state
from .spectral import normally_ordered_variance_series, scale_spectral_density, welch_psd
from .sweep import PRESET_NAMES, figure_preset, run_sweep, write_csv

SUBCOMMANDS = ("trace", "steady", "sweep", "psd", "oracle", "coupling", "preset-list")

_NEEDS_OUT = {"trace", "steady", "sweep", "psd", "oracle"}


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as ConfigError (exit code 1)."""

    def error(self, message):
        raise ConfigError(message)


def build_parser() -> _Parser:
    parser = _Parser(prog="cavsim", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("subcommand", choices=SUBCOMMANDS, help="workflow to run")
    parser.add_argument("--config", type=Path, default=None,
                        help="configuration file ([system], [integration], ...)")
    parser.add_argument("--out", type=Path, default=None,
                        help="output artifact path (required for file-writing commands)")
    parser.add_argument("--jobs", type=int, default=None,
                        help="sweep worker processes (default: CAVSIM_JOBS or CPU count)")
    parser.add_argument("--preset", default=None,
                        help="shorthand for --sweep.preset")
    for section, fields in CONFIG_SCHEMA.items():
        for key, spec in fields.items():
            parser.add_argument(f"--{section}.{key}", dest=f"{section}.{key}",
                                default=None, metavar=spec.kind.upper(),
                                help=f"{spec.help} (default: {spec.default})")
    return parser


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, bool):
        return "true" if x else "false"
    return format(float(x), ".17g")


def _write_lines(path: Path, lines) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_trace_csv(trace: Trace, params, path: Path) -> None:
    header = ["t"]
    for name in MOMENT_NAMES:
        header += [f"re_{name}", f"im_{name}"]
    header += ["var_min", "var_min_db", "theta_min", "n_photons", "flag"]
    var_min, theta, _ = min_cavity_quadrature_series(trace.moments)
    lines = [",".join(header)]
    for i, t in enumerate(trace.times):
        row = [_fmt(t)]
        for j in range(12):
            m = trace.moments[i, j]
            row += [_fmt(m.real), _fmt(m.imag)]
        vdb = 10.0 * math.log10(var_min[i]) if var_min[i] > 0 else math.nan
        row += [_fmt(var_min[i]), _fmt(vdb), _fmt(theta[i]),
                _fmt(trace.moments[i, 3].real), str(int(trace.flags[i]))]
        lines.append(",".join(row))
    _write_lines(path, lines)


def _cmd_trace(cfg: RunConfig, out: Path) -> int:
    params = cfg.system_params()
    icfg = cfg.integration_config()
    try:
        trace = integrate_trace(params, initial_thermal_state(params), icfg,
                                cfg.variant())
    except IntegrationFailure as exc:
        if exc.partial_trace is not None and len(exc.partial_trace) > 0:
            _write_trace_csv(exc.partial_trace, params, out)
            print(f"partial trace written to {out}", file=sys.stderr)
        raise
    _write_trace_csv(trace, params, out)
    return 0


_STEADY_HEADER = ("converged,var_min_db,theta_min,n_photons,ens_var_min_db,"
                  "xi2_x,xi2_y,xi2_z,classification,lasing_margin,"
                  "residual_norm,method,verified,flag")


def _cmd_steady(cfg: RunConfig, out: Path) -> int:
    params = cfg.system_params()
    ss = find_steady_state(params, cfg.integration_config(), cfg.variant())
    moments = ss.state.to_complex()[None, :]
    var_min, theta, _ = min_cavity_quadrature_series(moments)
    ens_min, _ = min_ensemble_quadrature_series(moments, params)
    j_mean, j_var, xi2 = spin_metrics_series(moments, params)
    vdb = 10.0 * math.log10(var_min[0]) if var_min[0] > 0 else math.nan
    shot = 0.5 * params.n_emitters
    edb = 10.0 * math.log10(ens_min[0] / shot) if ens_min[0] > 0 else math.nan
    cls = _classify(tuple(j_mean[0]), tuple(j_var[0]))
    row = [
        "true", _fmt(vdb), _fmt(theta[0]), _fmt(moments[0, 3].real), _fmt(edb),
        _fmt(xi2[0, 0]), _fmt(xi2[0, 1]), _fmt(xi2[0, 2]), cls,
        _fmt(lasing_threshold_margin(params)), _fmt(ss.residual_norm),
        ss.method, _fmt(ss.verified), "ok",
    ]
    _write_lines(out, [_STEADY_HEADER, ",".join(row)])
    print(f"steady state found by {ss.method}: residual max-norm "
          f"{ss.residual_norm:.3e}, verified={ss.verified}")
    return 0


def _cmd_sweep(cfg: RunConfig, out: Path, jobs: int) -> int:
    spec = cfg.sweep_spec()
    result = run_sweep(spec, jobs=jobs)
    write_csv(result, out)
    if result.psds is not None:
        stem = out.with_suffix("")
        for i, psd in enumerate(result.psds):
            if psd is None:
                continue
            lines = ["frequency,power"]
            for f, p in zip(psd.frequencies, psd.power):
                lines.append(f"{_fmt(f)},{_fmt(p)}")
            _write_lines(Path(f"{stem}_psd_{i:04d}.csv"), lines)
    print(f"sweep complete: {len(result)} points -> {out}")
    return 0


def _cmd_psd(cfg: RunConfig, out: Path) -> int:
    params = cfg.system_params()
    icfg = cfg.integration_config()
    psd_settings = cfg.psd_settings()
    trace = integrate_trace(params, initial_thermal_state(params), icfg, cfg.variant())
    series = normally_ordered_variance_series(trace, psd_settings.theta)
    dt = trace.times[1] - trace.times[0]
    psd = welch_psd(series, sample_rate=1.0 / dt,
                    segment_length=psd_settings.segment_length,
                    overlap_fraction=psd_settings.overlap_fraction,
                    window=psd_settings.window)
    scaled = scale_spectral_density(psd, psd_settings.epsilon, psd_settings.varrho)
    lines = ["frequency,power,s_theta"]
    for f, p, s in zip(psd.frequencies, psd.power, scaled.power):
        lines.append(f"{_fmt(f)},{_fmt(p)},{_fmt(s)}")
    _write_lines(out, lines)
    return 0


def _cmd_oracle(cfg: RunConfig, out: Path) -> int:
    ocfg = cfg.oracle_config()
    params = cfg.system_params().replace(n_emitters=ocfg.n_spins)
    report = compare_with_cumulant(params, ocfg, cfg.variant())
    lines = ["quantity,max_abs_dev,max_rel_dev,oracle_scale"]
    for name in MOMENT_NAMES:
        lines.append(",".join([name, _fmt(report.moment_abs_dev[name]),
                               _fmt(report.moment_rel_dev[name]),
                               _fmt(report.oracle_scale[name])]))
    for key, val in report.observable_abs_dev.items():
        lines.append(",".join([key, _fmt(val), "nan", "nan"]))
    _write_lines(out, lines)
    print(report.summary())
    return 0


def _cmd_coupling(cfg: RunConfig, out) -> int:
    est = estimate_coupling(**cfg.coupling_args())
    lines = [
        f"g1_hz={_fmt(est.g1_hz)}",
        f"n_emitters={_fmt(est.n_emitters)}",
        f"v_eff={_fmt(est.v_eff)}",
        f"collective_hz={_fmt(est.collective_hz)}",
    ]
    print("\n".join(lines))
    if out is not None:
        _write_lines(out, lines)
    return 0


def _cmd_preset_list() -> int:
    for name in PRESET_NAMES:
        spec = figure_preset(name)
        axes = " x ".join(f"{a.name}[{len(a.values())}]" for a in spec.axes)
        print(f"{name:7s} mode={spec.mode:9s} N={spec.base.n_emitters:<10g} axes: {axes}")
    return 0


def dispatch(subcommand: str, cfg: RunConfig, out, jobs: int) -> int:
    if subcommand in _NEEDS_OUT and out is None:
        raise ConfigError(f"{subcommand} writes an artifact; --out is required")
    if subcommand == "trace":
        return _cmd_trace(cfg, out)
    if subcommand == "steady":
        return _cmd_steady(cfg, out)
    if subcommand == "sweep":
        return _cmd_sweep(cfg, out, jobs)
    if subcommand == "psd":
        return _cmd_psd(cfg, out)
    if subcommand == "oracle":
        return _cmd_oracle(cfg, out)
    if subcommand == "coupling":
        return _cmd_coupling(cfg, out)
    if subcommand == "preset-list":
        return _cmd_preset_list()
    raise ConfigError(f"unknown subcommand {subcommand!r}")


def _resolve_jobs(flag_value) -> int:
    if flag_value is not None:
        return max(1, int(flag_value))
    env = os.environ.get("CAVSIM_JOBS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"CAVSIM_JOBS must be an integer, got {env!r}") from None
    return max(1, os.cpu_count() or 1)


def _emit_error(exc: Exception, code: int) -> None:
    detail = str(exc).replace('"', "'")
    print(f"cavsim: {exc}", file=sys.stderr)
    extras = []
    if isinstance(exc, ConfigError) and exc.line is not None:
        extras.append(f"line={exc.line}")
    if isinstance(exc, IntegrationFailure) and exc.failure_time is not None:
        extras.append(f"failure_time={exc.failure_time:.6g}")
    extra = (" " + " ".join(extras)) if extras else ""
    print(f'error={type(exc).__name__} exit={code}{extra} detail="{detail}"',
          file=sys.stderr)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = RunConfig.defaults()
        if args.config is not None:
            try:
                text = args.config.read_text(encoding="utf-8")
            except OSError as exc:
                raise ConfigError(f"cannot read config file: {exc}") from exc
            cfg = parse_config(text)
        if args.preset is not None:
            cfg.set_raw("sweep", "preset", args.preset)
        for section, fields in CONFIG_SCHEMA.items():
            for key in fields:
                raw = getattr(args, f"{section}.{key}")
                if raw is not None:
                    cfg.set_raw(section, key, raw)
        jobs = _resolve_jobs(args.jobs)
        return dispatch(args.subcommand, cfg, args.out, jobs)
    except (ConfigError, SchemaError) as exc:
        _emit_error(exc, 1)
        return 1
    except (IntegrationFailure, NoSteadyStateError, TruncationError) as exc:
        _emit_error(exc, 2)
        return 2
    except CavsimError as exc:
        _emit_error(exc, 1)
        return 1


if __name__ == "__main__":
    sys.exit(main())
