import json
from dataclasses import replace

import numpy as np
import pytest

from src.cli import build_parser, main
from src.commands.asymptotics_check import effective_cross_check
from src.commands.bs_scan import order_for_nodes
from src.commands.utils.run_config import RunConfig, load_config_file, parse_list, resolve_run_config
from src.commands.utils.validators import ValidationError
from src.spectral.effective_operator import assemble_upsilon, solve_pencil
from src.spectral.oned_models import mu_of_tau
from src.spectral.surface_geometry import build_grid


def _read_csv(path):
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "# format_version=shellspectra/1"
    assert lines[1].startswith("# config=")
    return json.loads(lines[1][len("# config="):]), lines[2].split(","), [line.split(",") for line in lines[3:]]


def _run(output_dir, *args):
    return main([*args, "--output-dir", str(output_dir)])


class TestModes1D:

    def test_dirichlet_ground_state(self, output_dir):
        code = _run(output_dir, "modes-1d", "--m", "10", "--tau=-1", "--delta", "1", "--dirichlet")
        assert code == 0
        echo, header, rows = _read_csv(output_dir / "modes-1d.csv")
        assert header[:5] == ["m", "tau", "delta", "kind", "k"]
        assert echo["command"] == "modes-1d"
        assert "output_dir" not in echo
        assert len(rows) == 1
        x = float(rows[0][5])
        assert x / np.tanh(x) == pytest.approx(mu_of_tau(-1.0) * 10.0, rel=1e-12)

    def test_sweep_rows(self, output_dir):
        code = _run(output_dir, "modes-1d", "--m", "5,10,20", "--tau=-1,-0.5", "--delta", "1", "--c", "0.5")
        assert code == 0
        _, _, rows = _read_csv(output_dir / "modes-1d.csv")
        assert len(rows) == 6
        assert {row[3] for row in rows} == {"robin"}

    def test_output_is_reproducible(self, tmp_path):
        args = ("modes-1d", "--m", "10", "--tau=-1", "--delta", "1", "--dirichlet")
        assert _run(tmp_path / "a", *args) == 0
        assert _run(tmp_path / "b", *args) == 0
        assert (tmp_path / "a" / "modes-1d.csv").read_bytes() == (tmp_path / "b" / "modes-1d.csv").read_bytes()

    def test_missing_bound_state_is_not_an_error(self, output_dir):
        code = _run(output_dir, "modes-1d", "--m", "1", "--tau=-1", "--delta", "1", "--dirichlet")
        assert code == 0
        _, _, rows = _read_csv(output_dir / "modes-1d.csv")
        assert rows == []

    def test_strict_missing_bound_state(self, output_dir):
        code = _run(output_dir, "modes-1d", "--m", "1", "--tau=-1", "--delta", "1", "--dirichlet", "--strict")
        assert code == 3
        diagnostic = json.loads((output_dir / "diagnostic.json").read_text())
        assert diagnostic["error"] == "NoBoundState"
        assert diagnostic["category"] == "numerical"
        assert diagnostic["config"]["strict"] is True

    @pytest.mark.parametrize("args", [
        ("--m", "10", "--tau=2", "--delta", "1"),
        ("--m", "10", "--tau=1", "--delta", "1"),
        ("--m", "10", "--tau=-1"),
        ("--m", "10", "--tau=-1", "--delta", "1", "--dirichlet", "--c", "0.5"),
        ("--m", "10,10", "--tau=-1", "--delta", "1"),
    ])
    def test_invalid_parameters(self, output_dir, args):
        assert _run(output_dir, "modes-1d", *args) == 2
        assert not (output_dir / "diagnostic.json").exists()


class TestSphereCommands:

    def test_sphere_spectrum(self, output_dir):
        code = _run(output_dir, "sphere-spectrum", "--m", "10", "--tau=-1", "--kappa-max", "3")
        assert code == 0
        _, header, rows = _read_csv(output_dir / "sphere-spectrum.csv")
        assert header == ["lambda", "kappa", "multiplicity", "residual", "solver"]
        assert rows
        lams = [float(row[0]) for row in rows]
        assert lams == sorted(lams)
        summary = json.loads((output_dir / "sphere-spectrum.json").read_text())["summary"]
        assert summary["all_multiplicities_even"]
        assert summary["symmetry_defect"] < 1e-8

    def test_sphere_spectrum_same_sign_is_empty(self, output_dir):
        assert _run(output_dir, "sphere-spectrum", "--m", "10", "--tau", "1") == 0
        _, _, rows = _read_csv(output_dir / "sphere-spectrum.csv")
        assert rows == []

    def test_sphere_spectrum_needs_single_mass(self, output_dir):
        assert _run(output_dir, "sphere-spectrum", "--m", "4,6", "--tau=-1") == 2

    def test_weyl_count(self, output_dir):
        assert _run(output_dir, "weyl-count", "--m", "4,8", "--tau=-1") == 0
        _, header, rows = _read_csv(output_dir / "weyl-count.csv")
        assert header == ["m", "count", "predicted", "ratio"]
        assert [float(row[0]) for row in rows] == [4.0, 8.0]
        assert int(rows[1][1]) >= int(rows[0][1])

    @pytest.mark.slow
    def test_asymptotics_check(self, output_dir):
        code = _run(output_dir, "asymptotics-check", "--m", "60,80,120,160", "--tau=-1")
        assert code == 0
        _, header, rows = _read_csv(output_dir / "asymptotics-check.csv")
        assert header[:3] == ["m", "j", "mu"]
        assert len(rows) == 4
        payload = json.loads((output_dir / "asymptotics-check.json").read_text())
        report = payload["report"]
        assert report["ms"] == [60.0, 80.0, 120.0, 160.0]
        assert payload["effective_cross_check"]["source"] == "galerkin"
        assert payload["effective_cross_check"]["max_relative_deviation"] < 1e-6
        assert all(fit["violations"] == 0 for fit in report["envelope_carried"])

    def test_asymptotics_check_rejects_positive_tau(self, output_dir):
        assert _run(output_dir, "asymptotics-check", "--m", "6,8,12,16", "--tau", "1") == 2

    def test_effective_cross_check_on_galerkin_values(self, unit_sphere):
        grid = build_grid(unit_sphere, 8)
        spectrum = solve_pencil(assemble_upsilon(unit_sphere, grid, -1.0, 8), 12)
        check = effective_cross_check(spectrum, -1.0, 1.0)
        assert check["source"] == "galerkin"
        assert check["compared"] == 12
        assert check["max_relative_deviation"] < 1e-6

    def test_effective_cross_check_flags_deviation(self, unit_sphere):
        grid = build_grid(unit_sphere, 8)
        spectrum = solve_pencil(assemble_upsilon(unit_sphere, grid, -1.0, 8), 12)
        shifted = replace(spectrum, values=spectrum.values + 0.01)
        assert effective_cross_check(shifted, -1.0, 1.0)["max_relative_deviation"] > 1e-3


class TestSurfaceCommands:

    def test_effective_spectrum_sphere(self, output_dir):
        code = _run(output_dir, "effective-spectrum", "--tau=-1", "--order", "6", "--count", "6")
        assert code == 0
        _, header, rows = _read_csv(output_dir / "effective-spectrum.csv")
        assert header == ["tau", "index", "value", "level_multiplicity"]
        assert len(rows) == 6

    def test_effective_spectrum_ellipsoid(self, output_dir):
        code = _run(output_dir, "effective-spectrum", "--tau=-1", "--order", "4", "--count", "4",
                    "--surface", "ellipsoid", "--surface-param", "a=1.2", "--surface-param", "b=1.0",
                    "--surface-param", "c=0.8")
        assert code == 0
        echo, _, _ = _read_csv(output_dir / "effective-spectrum.csv")
        assert echo["surface"] == {"name": "ellipsoid", "params": {"a": 1.2, "b": 1.0, "c": 0.8}}

    def test_unknown_surface(self, output_dir):
        assert _run(output_dir, "effective-spectrum", "--tau=-1", "--surface", "cube") == 2

    def test_effective_spectrum_positive_tau(self, output_dir):
        assert _run(output_dir, "effective-spectrum", "--tau", "1", "--order", "4") == 2

    def test_bs_scan(self, output_dir):
        code = _run(output_dir, "bs-scan", "--m", "4", "--tau=-1", "--nodes", "100", "--steps", "5")
        assert code == 0
        _, header, rows = _read_csv(output_dir / "bs-scan.csv")
        assert header == ["lambda", "sigma_min"]
        assert len(rows) == 5
        payload = json.loads((output_dir / "bs-scan.json").read_text())
        assert payload["nodes"] >= 100

    def test_bs_scan_interval_outside_gap(self, output_dir):
        assert _run(output_dir, "bs-scan", "--m", "4", "--tau=-1", "--nodes", "100",
                    "--interval=-5,1") == 2

    def test_order_for_nodes(self, unit_sphere):
        assert order_for_nodes(unit_sphere, None, 7) == 7
        assert order_for_nodes(unit_sphere, 100, 7) == 4


class TestCommandLine:

    def test_usage_error(self):
        assert main(["no-such-command"]) == 2

    def test_version(self, capsys):
        assert main(["--version"]) == 0
        assert "shellspectra" in capsys.readouterr().out

    def test_bad_surface_param(self):
        assert main(["effective-spectrum", "--surface-param", "a"]) == 2

    def test_parser_knows_every_command(self):
        parser = build_parser()
        for name in ("modes-1d", "sphere-spectrum", "effective-spectrum", "bs-scan",
                     "asymptotics-check", "weyl-count"):
            args = parser.parse_args([name])
            assert args.command == name

    def test_config_file(self, tmp_path, output_dir):
        path = tmp_path / "run.cfg"
        path.write_text("m = 10\ntau = -1\ndelta = 1\ndirichlet = true\n")
        assert main(["modes-1d", "--config", str(path), "--output-dir", str(output_dir)]) == 0
        echo, _, rows = _read_csv(output_dir / "modes-1d.csv")
        assert echo["dirichlet"] is True
        assert len(rows) == 1

    def test_flags_override_config_file(self, tmp_path, output_dir):
        path = tmp_path / "run.cfg"
        path.write_text("m = 10\ntau = -1\ndelta = 1\ndirichlet = true\n")
        assert main(["modes-1d", "--config", str(path), "--m", "12", "--output-dir", str(output_dir)]) == 0
        echo, _, _ = _read_csv(output_dir / "modes-1d.csv")
        assert echo["m"] == [12.0]

    def test_bad_config_file(self, tmp_path, output_dir):
        path = tmp_path / "run.cfg"
        path.write_text("mass = 10\n")
        assert main(["modes-1d", "--config", str(path), "--output-dir", str(output_dir)]) == 2


class TestRunConfig:
    """Config file parsing and flag precedence."""

    def test_parse_list(self):
        assert parse_list("1, 2.5,3", "m") == [1.0, 2.5, 3.0]
        assert parse_list(4, "m") == [4.0]
        with pytest.raises(ValidationError, match="comma-separated"):
            parse_list("1,two", "m")

    def test_sections(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("tau = -1\norder = 8\n\n[surface]\nname = torus\nR_major = 2\nr_minor = 1\n\n"
                        "[tolerances]\nbs_threshold = 0.05\n")
        values = load_config_file(path)
        assert values["tau"] == [-1.0]
        assert values["order"] == 8
        assert values["surface"] == {"name": "torus", "params": {"R_major": 2.0, "r_minor": 1.0}}
        assert values["tolerances"] == {"bs_threshold": 0.05}

    @pytest.mark.parametrize("text,message", [
        ("order = many\n", "invalid value"),
        ("[mesh]\nsize = 1\n", "unknown config section"),
        ("[surface]\na = wide\n", "numeric"),
        ("strict = maybe\n", "invalid value"),
    ])
    def test_bad_files(self, tmp_path, text, message):
        path = tmp_path / "run.cfg"
        path.write_text(text)
        with pytest.raises(ValidationError, match=message):
            load_config_file(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ValidationError, match="cannot read"):
            load_config_file(tmp_path / "absent.cfg")

    def test_surface_overrides_merge(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("[surface]\nname = ellipsoid\na = 1.2\nb = 1.0\nc = 0.8\n")
        cfg = resolve_run_config("effective-spectrum", path, {"surface_params": {"c": 0.5}, "order": None})
        assert cfg.surface.params == {"a": 1.2, "b": 1.0, "c": 0.5}
        assert cfg.order == 16

    def test_sphere_radius_defaults_to_run_radius(self):
        cfg = RunConfig(command="sphere-spectrum", R=2.0)
        assert cfg.surface_params() == {"R": 2.0}

    def test_unknown_command(self):
        with pytest.raises(Exception, match="unknown command"):
            RunConfig(command="plot")
