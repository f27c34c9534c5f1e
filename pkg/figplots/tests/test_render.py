"""Unit tests for the renderers, on synthetic CSV artifacts."""

import math

import numpy as np
import pytest

from figplots import MissingColumnError, PlotSpec, RenderError, render

SWEEP_HEADER = ("axis1,axis2,converged,var_min_db,theta_min,n_photons,"
                "ens_var_min_db,xi2_x,xi2_y,xi2_z,classification,lasing_margin,flag")


def write_sweep_csv(path, two_axes=True):
    rows = [SWEEP_HEADER]
    a2_values = (0.5, 1.0) if two_axes else (None,)
    for a1 in (1.0, 2.0, 3.0):
        for a2 in a2_values:
            db = -a1 * (a2 or 1.0)
            a2_txt = "" if a2 is None else f"{a2}"
            rows.append(f"{a1},{a2_txt},true,{db},0.1,0.2,-0.5,nan,1.0,0.9,none,0.1,ok")
    path.write_text("\n".join(rows) + "\n")


def write_trace_csv(path, n=64):
    names = ["t"]
    for m in ("m_a", "m_s", "m_aa", "m_ada", "m_sds", "m_ss", "m_sds2",
              "m_zz", "m_sz", "m_as", "m_ads", "m_az"):
        names += [f"re_{m}", f"im_{m}"]
    names += ["var_min", "var_min_db", "theta_min", "n_photons", "flag"]
    lines = [",".join(names)]
    t = np.linspace(0, 10, n)
    for i, ti in enumerate(t):
        row = np.zeros(len(names))
        row[0] = ti
        row[5] = -0.1 * math.cos(2 * ti)     # re_m_aa
        row[6] = 0.1 * math.sin(2 * ti)      # im_m_aa
        row[7] = 0.05                        # re_m_ada
        var_min = 1 + 2 * (0.05 - 0.1)
        row[25] = var_min
        row[26] = 10 * math.log10(var_min)
        row[27] = (np.angle(row[5] + 1j * row[6]) + np.pi) / 2 % np.pi
        lines.append(",".join(f"{v:.12g}" for v in row[:-1]) + ",0")
    path.write_text("\n".join(lines) + "\n")


def write_psd_csv(path):
    lines = ["frequency,power"]
    for f in np.linspace(0.0, 5.0, 40):
        lines.append(f"{f},{1e-3 + math.exp(-((f - 2) ** 2) * 8)}")
    path.write_text("\n".join(lines) + "\n")


def test_line_plot(tmp_path):
    csv = tmp_path / "sweep.csv"
    write_sweep_csv(csv)
    out = render(PlotSpec(csv_paths=(str(csv),), kind="line",
                          output=str(tmp_path / "line.png")))
    assert out.exists() and out.stat().st_size > 0


def test_map_plot(tmp_path):
    csv = tmp_path / "sweep.csv"
    write_sweep_csv(csv)
    out = render(PlotSpec(csv_paths=(str(csv),), kind="map",
                          output=str(tmp_path / "map.png"), db_range=5.0))
    assert out.exists() and out.stat().st_size > 0


def test_map_requires_two_axes(tmp_path):
    csv = tmp_path / "sweep1d.csv"
    write_sweep_csv(csv, two_axes=False)
    with pytest.raises(RenderError):
        render(PlotSpec(csv_paths=(str(csv),), kind="map",
                        output=str(tmp_path / "no.png")))
    assert not (tmp_path / "no.png").exists()


def test_trace_plot(tmp_path):
    csv = tmp_path / "trace.csv"
    write_trace_csv(csv)
    out = render(PlotSpec(csv_paths=(str(csv),), kind="trace",
                          output=str(tmp_path / "trace.svg")))
    assert out.exists()


def test_psd_plot_overlay(tmp_path):
    a, b = tmp_path / "p1.csv", tmp_path / "p2.csv"
    write_psd_csv(a)
    write_psd_csv(b)
    out = render(PlotSpec(csv_paths=(str(a), str(b)), kind="psd",
                          output=str(tmp_path / "psd.svg")))
    assert out.exists()


def test_missing_column_is_named(tmp_path):
    csv = tmp_path / "bad.csv"
    csv.write_text("axis1,flag\n1.0,ok\n")
    with pytest.raises(MissingColumnError) as exc_info:
        render(PlotSpec(csv_paths=(str(csv),), kind="line",
                        output=str(tmp_path / "no.png")))
    assert "var_min_db" in str(exc_info.value)
    assert not (tmp_path / "no.png").exists()


def test_empty_csv_rejected_without_output(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(RenderError):
        render(PlotSpec(csv_paths=(str(empty),), kind="line",
                        output=str(tmp_path / "no.png")))
    header_only = tmp_path / "header.csv"
    header_only.write_text(SWEEP_HEADER + "\n")
    with pytest.raises(RenderError):
        render(PlotSpec(csv_paths=(str(header_only),), kind="line",
                        output=str(tmp_path / "no.png")))
    assert not (tmp_path / "no.png").exists()


def test_unknown_kind_rejected(tmp_path):
    with pytest.raises(RenderError):
        PlotSpec(csv_paths=("x.csv",), kind="pie", output="o.png")


def test_rendering_is_read_only_and_svg_byte_stable(tmp_path):
    csv = tmp_path / "sweep.csv"
    write_sweep_csv(csv)
    before = csv.read_bytes()
    out1 = tmp_path / "a.svg"
    out2 = tmp_path / "b.svg"
    render(PlotSpec(csv_paths=(str(csv),), kind="line", output=str(out1)))
    render(PlotSpec(csv_paths=(str(csv),), kind="line", output=str(out2)))
    assert csv.read_bytes() == before
    assert out1.read_bytes() == out2.read_bytes()


def test_cli_round_trip(tmp_path, capsys):
    from figplots.cli import main
    csv = tmp_path / "sweep.csv"
    write_sweep_csv(csv)
    out = tmp_path / "cli.svg"
    assert main(["line", "--csv", str(csv), "--out", str(out),
                 "--x-label", "drive", "--title", "demo"]) == 0
    assert out.exists()
    assert main(["map", "--csv", str(tmp_path / "missing.csv"),
                 "--out", str(tmp_path / "no.png")]) == 1
