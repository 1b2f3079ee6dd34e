import io
import subprocess
import sys

import numpy as np
import pytest

from ghostcollapse import PAPER2015
from ghostcollapse.cli import EXIT_OK, EXIT_PHYSICS, EXIT_USAGE, main, report_equivalence
from ghostcollapse.geometry import format_geometry
from ghostcollapse.models import CaptureWarning
from ghostcollapse.scenarios import FIGURES, Scenario, ScenarioError, custom, output_paths


def read_csv(path):
    header, rows = [], []
    for line in path.read_text().splitlines():
        if line.startswith("#"):
            header.append(line)
        elif line == "x_m,value":
            continue
        else:
            rows.append([float(v) for v in line.split(",")])
    return header, np.array(rows)


def fwhm_of(rows):
    x, y = rows[:, 0], rows[:, 1]
    above = x[y >= 0.5 * y.max()]
    return above[-1] - above[0]


def test_every_figure_has_one_scenario():
    expected = {f"fig{n:02d}" for n in range(2, 22)} | {"figA2"}
    assert set(FIGURES) == expected


def test_run_heisenberg_ghost(tmp_path, capsys):
    out = tmp_path / "h.csv"
    assert main(["run", "--preset", "paper2015", "--model", "heisenberg", "--idler", "slit",
                 "--plane", "ghost", "--out", str(out)]) == EXIT_OK
    header, rows = read_csv(out)
    assert "# geometry: paper2015" in header and "# normalization: peak1" in header
    assert out.read_text().count("x_m,value") == 1
    assert fwhm_of(rows) == pytest.approx(320e-6, rel=0.02)
    assert rows[:, 1].max() == 1.0
    assert "fwhm_m=3.19" in capsys.readouterr().out


def test_run_basis_state_is_narrow(tmp_path):
    out = tmp_path / "b.csv"
    assert main(["run", "--model", "mixed_basis", "--basis-at", "0", "--out", str(out)]) == EXIT_OK
    _, rows = read_csv(out)
    assert fwhm_of(rows) == pytest.approx(18.5e-6, rel=0.1)


def test_psf_zero_length_matches_matched_psf(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    main(["run", "--model", "psf_mismatch", "--L", "0", "--out", str(a)])
    main(["run", "--model", "mixed_basis", "--basis-at", "0", "--out", str(b)])
    _, ra = read_csv(a)
    _, rb = read_csv(b)
    assert np.max(np.abs(ra[:, 1] - rb[:, 1])) < 1e-4


def test_area_normalisation(tmp_path):
    out = tmp_path / "a.csv"
    main(["run", "--model", "pure", "--normalize", "area1", "--grid-points", "801", "--out", str(out)])
    _, rows = read_csv(out)
    step = rows[1, 0] - rows[0, 0]
    assert np.sum(rows[1:, 1] + rows[:-1, 1]) * step / 2 == pytest.approx(1.0, rel=1e-6)
    assert len(rows) == 801


def test_multi_curve_scenario_writes_one_file_per_position(tmp_path):
    out = tmp_path / "f8.csv"
    assert main(["run", "--scenario", "fig08", "--out", str(out)]) == EXIT_OK
    files = sorted(p.name for p in tmp_path.glob("*.csv"))
    assert files == ["f8_0.csv", "f8_1.csv", "f8_2.csv"]
    assert output_paths(out, 1) == [out]


def test_weighted_basis_states_keep_relative_weights(tmp_path):
    out = tmp_path / "w.csv"
    main(["run", "--model", "mixed_basis", "--idler", "focus", "--plane", "diffraction",
          "--basis-at", "0", "--basis-at", "5e-4", "--weighted", "--out", str(out)])
    _, centre = read_csv(tmp_path / "w_0.csv")
    _, edge = read_csv(tmp_path / "w_1.csv")
    assert centre[:, 1].max() == 1.0
    assert 0.5 < edge[:, 1].max() < 0.95


def test_geometry_file_and_overrides(tmp_path):
    geo = tmp_path / "g.txt"
    geo.write_text(format_geometry(PAPER2015))
    out = tmp_path / "o.csv"
    assert main(["run", "--geometry", str(geo), "--set", "w=80e-6", "--out", str(out)]) == EXIT_OK
    _, rows = read_csv(out)
    assert fwhm_of(rows) == pytest.approx(160e-6, rel=0.03)


@pytest.mark.parametrize(
    "argv",
    [
        ["run", "--model", "bogus"],
        ["run", "--set", "colour=1"],
        ["run", "--set", "S0=2.0"],
        ["run", "--out", "/nonexistent/dir/x.csv"],
        ["run", "--model", "mixed_basis"],
        ["run", "--model", "mixed_basis", "--basis-at", "1e-3"],
        ["run", "--model", "pure", "--idler", "focus"],
        ["run", "--model", "psf_mismatch", "--plane", "diffraction"],
        ["run", "--scenario", "fig99"],
        ["report", "--tolerance", "-1"],
        [],
    ],
)
def test_usage_errors_exit_1(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    with pytest.raises(SystemExit) as exc:
        raise SystemExit(main(argv))
    assert exc.value.code == EXIT_USAGE


def test_scenario_validation():
    with pytest.raises(ScenarioError):
        Scenario("x", "nope", FIGURES["fig02"].sel)
    assert custom("heisenberg", "focus", "ghost").sel.idler_detector.value == "focus"


def test_report_degenerate_slit():
    out = io.StringIO()
    # a point-like slit spreads over +-lambda fc / w, far past any capture range
    with pytest.warns(CaptureWarning):
        code = report_equivalence(PAPER2015.replace(w=1e-9), 1e-3, out)
    text = out.getvalue()
    assert code == EXIT_PHYSICS
    assert "pure_contrast.diffraction.status=degenerate" in text
    assert text.count(".pass=true") == 4


def test_report_tolerance_below_discretisation_floor_fails():
    out = io.StringIO()
    code = report_equivalence(PAPER2015, 1e-12, out)
    text = out.getvalue()
    assert code == EXIT_PHYSICS
    assert text.count(".pass=false") == 4
    assert "result=fail" in text


def test_report_paper_preset_passes():
    out = io.StringIO()
    assert report_equivalence(PAPER2015, 1e-3, out) == EXIT_OK
    text = out.getvalue()
    assert text.count(".pass=true") == 4
    assert "status=detected" in text


def test_module_entry_point_and_determinism(tmp_path):
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for p in paths:
        subprocess.run([sys.executable, "-m", "ghostcollapse", "run", "--scenario", "fig05", "--out", str(p)],
                       check=True, capture_output=True)
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_scenarios_listing(capsys):
    assert main(["scenarios"]) == EXIT_OK
    assert len(capsys.readouterr().out.splitlines()) == len(FIGURES)
