"""Pipeline orchestration: stage composition, artifacts, and pinned results."""

from __future__ import annotations

import csv
import dataclasses
import math

import numpy as np
import pytest

from qft_forge.bounds import DisturbanceSpec
from qft_forge.lti import db
from qft_forge.pipeline import (
    COMMANDS,
    compute_bounds,
    compute_design,
    compute_templates,
    compute_verification,
    effective_plant,
    run_command,
)
from qft_forge.verify import GainAxis, OracleBox

ALL_ARTIFACTS = (
    "templates.csv",
    "bounds.csv",
    "kd_grid.csv",
    "design_report.txt",
    "envelope.csv",
    "verify_report.txt",
    "nichols.svg",
)


def read_dir(path):
    return {f.name: f.read_bytes() for f in path.iterdir()}


@pytest.fixture(scope="module")
def reduced_all_dir(tmp_path_factory, reduced_config):
    out = tmp_path_factory.mktemp("reduced_all")
    run_command(reduced_config, "all", str(out))
    return out


class TestEffectivePlant:
    def test_without_tau_is_passthrough(self, servo_config):
        plant, gain_map = effective_plant(servo_config)
        assert plant is servo_config.plant
        assert gain_map is None

    def test_with_tau_adds_filter_pole(self, reduced_config):
        cfg = dataclasses.replace(
            reduced_config,
            design=dataclasses.replace(reduced_config.design, tau=0.001),
        )
        plant, gain_map = effective_plant(cfg)
        assert len(plant.den) == len(reduced_config.plant.den) + 1
        assert gain_map is not None
        assert gain_map.tau == 0.001


class TestComputeBounds:
    def test_jobs_do_not_change_results(self, reduced_config):
        templates = compute_templates(reduced_config)
        serial = compute_bounds(reduced_config, templates, jobs=1)
        threaded = compute_bounds(reduced_config, templates, jobs=2)
        assert serial[0] == threaded[0]
        assert serial[2] == threaded[2]

    def test_delta_override_wins(self, reduced_config):
        cfg = dataclasses.replace(reduced_config, delta_hf_override=12.0)
        _, contour, delta = compute_bounds(cfg, compute_templates(cfg))
        assert delta == 12.0
        assert contour.delta_hf_db == 12.0

    def test_servo_hf_span(self, servo_stack):
        # widest-gain template: k spans a factor 100, the a-dependence shrinks
        # it by sqrt(3601/3700) at the last design frequency
        expected = db(100.0 * math.sqrt(3601.0 / 3700.0))
        assert servo_stack.delta_hf == pytest.approx(expected, rel=1e-12)
        assert servo_stack.delta_hf == pytest.approx(39.8822139730429, rel=1e-12)


class TestServoDesign:
    def test_pinned_gains(self, servo_design):
        assert servo_design.feasible
        assert servo_design.gains.kp == pytest.approx(13.021194019215578, rel=1e-12)
        assert servo_design.gains.ki == pytest.approx(0.17124145589001946, rel=1e-12)
        assert servo_design.gains.kd == pytest.approx(3.538751198568919, rel=1e-12)

    def test_search_structure(self, servo_design):
        assert servo_design.kd_grid.shape == (180, 180)
        assert int(np.isfinite(servo_design.kd_grid).sum()) == 10332
        assert servo_design.screen_rejections == 14
        assert servo_design.chosen_phases == (-120.5, -104.5)
        assert servo_design.active_frequency == 30.0
        assert servo_design.beta_db == pytest.approx(22.603184774575617, rel=1e-9)

    def test_screen_moved_the_argmin(self, servo_design):
        finite = servo_design.kd_grid[np.isfinite(servo_design.kd_grid)]
        # 14 cells with smaller kd were vetoed by the whole-curve screen
        assert servo_design.gains.kd > finite.min()

    def test_margins(self, servo_design):
        slacks = {m.omega: m.slack_db for m in servo_design.margin_report}
        assert set(slacks) == {0.5, 1.0, 2.0, 3.0, 5.0, 10.0, 30.0, 60.0}
        assert all(s >= -1e-9 for s in slacks.values())
        assert slacks[30.0] == pytest.approx(0.0, abs=1e-12)  # active frequency
        assert min(slacks.values()) == slacks[30.0]

    def test_verification(self, servo_config, servo_stack, servo_design):
        report = compute_verification(
            servo_config, servo_design.gains, servo_stack.curves, servo_stack.contour
        )
        assert not report.sweep_violations
        assert all(m.source == "performance" for m in report.per_frequency_margins)
        assert all(m.slack_db >= -1e-9 for m in report.per_frequency_margins)
        # tracking corridor breaks only at the second-to-last frequency
        assert not report.passed
        assert [r.omega for r in report.envelope_violations] == [30.0]
        row = next(r for r in report.envelope if r.omega == 30.0)
        assert row.min_db == pytest.approx(-49.4999, abs=1e-3)
        assert row.lower_db == pytest.approx(-48.3533, abs=1e-3)
        assert report.reasons == (
            "closed-loop envelope leaves the reference corridor at omega=30",
        )


class TestRunCommand:
    def test_unknown_command(self, reduced_config, tmp_path):
        with pytest.raises(ValueError, match="unknown command"):
            run_command(reduced_config, "polish", str(tmp_path))

    @pytest.mark.parametrize(
        "command, expected",
        [
            ("templates", {"templates.csv", "nichols.svg"}),
            ("bounds", {"templates.csv", "bounds.csv", "nichols.svg"}),
            (
                "design",
                {
                    "templates.csv",
                    "bounds.csv",
                    "kd_grid.csv",
                    "design_report.txt",
                    "nichols.svg",
                },
            ),
            ("verify", set(ALL_ARTIFACTS)),
        ],
    )
    def test_artifact_sets(self, reduced_config, tmp_path, command, expected):
        artifacts = run_command(reduced_config, command, str(tmp_path / command))
        assert set(artifacts.written) == expected
        assert {f.name for f in (tmp_path / command).iterdir()} == expected

    def test_artifact_order(self, reduced_all_dir, reduced_config, tmp_path):
        artifacts = run_command(reduced_config, "all", str(tmp_path / "order"))
        assert tuple(artifacts.written) == ALL_ARTIFACTS

    def test_stagewise_run_equals_all(self, reduced_config, tmp_path, reduced_all_dir):
        staged = tmp_path / "staged"
        for command in ("templates", "bounds", "design", "verify"):
            run_command(reduced_config, command, str(staged))
        assert read_dir(staged) == read_dir(reduced_all_dir)

    def test_rerun_is_byte_identical(self, reduced_config, tmp_path, reduced_all_dir):
        again = tmp_path / "again"
        run_command(reduced_config, "all", str(again))
        assert read_dir(again) == read_dir(reduced_all_dir)

    def test_jobs_are_byte_identical(self, reduced_config, tmp_path, reduced_all_dir):
        threaded = tmp_path / "threaded"
        run_command(reduced_config, "all", str(threaded), jobs=2)
        assert read_dir(threaded) == read_dir(reduced_all_dir)


class TestArtifactContents:
    def test_templates_csv(self, reduced_all_dir, reduced_stack, reduced_config):
        with open(reduced_all_dir / "templates.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["omega", "a", "k", "phase_deg", "gain_db", "on_hull"]
        body = rows[1:]
        expected_rows = sum(
            len(reduced_stack.templates[w].points) for w in reduced_config.frequencies
        )
        assert len(body) == expected_rows
        hull_rows = sum(1 for r in body if r[-1] == "1")
        expected_hull = sum(
            len(reduced_stack.templates[w].hull_indices)
            for w in reduced_config.frequencies
        )
        assert hull_rows == expected_hull
        first = body[0]
        point = reduced_stack.templates[reduced_config.frequencies[0]].points[0]
        assert float(first[0]) == reduced_config.frequencies[0]
        assert float(first[3]) == point.phase_deg
        assert float(first[4]) == point.gain_db

    def test_bounds_csv(self, reduced_all_dir, reduced_stack, reduced_config):
        with open(reduced_all_dir / "bounds.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["omega", "phase_deg", "min_gain_db"]
        assert len(rows) - 1 == len(reduced_config.frequencies) * 24
        curve = reduced_stack.curves[0]
        sample = rows[1]
        assert float(sample[0]) == curve.omega
        assert float(sample[1]) == curve.phase_grid[0]
        assert float(sample[2]) == curve.min_gain_db[0]

    def test_kd_grid_csv(self, reduced_all_dir, reduced_design):
        with open(reduced_all_dir / "kd_grid.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["phase_i_deg", "phase_j_deg", "kd"]
        assert len(rows) - 1 == 12 * 12
        finite = [r for r in rows[1:] if r[2] != "INFEASIBLE"]
        assert len(finite) == int(np.isfinite(reduced_design.kd_grid).sum())
        best = min(float(r[2]) for r in finite)
        assert best == pytest.approx(float(np.min(reduced_design.kd_grid)), rel=1e-12)

    def test_envelope_csv_header_only_without_prefilter(self, reduced_all_dir):
        content = (reduced_all_dir / "envelope.csv").read_text()
        assert content == "omega,min_db,max_db,lower_db,upper_db\n"

    def test_design_report(self, reduced_all_dir):
        text = (reduced_all_dir / "design_report.txt").read_text()
        assert "design report\n=============\n" in text
        assert "controller kind    : pid" in text
        assert "phase grid         : 24 points" in text
        assert "anchor frequencies : 3 rad/s (position 2), 1 rad/s (position 1)" in text
        assert "feasible           : yes" in text
        assert "gains              : kp=7.629752452598" in text
        assert "screen rejections  : 0" in text
        assert "candidate grid     : 12x12 cells," in text
        assert "margins (design-frequency slack over the combined bounds):" in text

    def test_verify_report(self, reduced_all_dir):
        text = (reduced_all_dir / "verify_report.txt").read_text()
        assert text.startswith("verification report\n===================\n")
        assert "verdict : PASS" in text
        assert "inside the stability contour" in text
        assert "failure reasons:" not in text

    def test_nichols_svg_shape(self, reduced_all_dir):
        text = (reduced_all_dir / "nichols.svg").read_text()
        assert text.startswith("<svg")
        assert text.endswith("\n")
        assert text.count('r="5"') == 3  # one loop marker per design frequency


class TestSpecialRuns:
    def test_oracle_section(self, reduced_config, tmp_path):
        cfg = dataclasses.replace(
            reduced_config,
            oracle=OracleBox(
                kp=GainAxis(0.0, 10.0, 0.5),
                ki=GainAxis(0.0, 5.0, 0.5),
                kd=GainAxis(0.0, 5.0, 0.5),
            ),
        )
        artifacts = run_command(cfg, "design", str(tmp_path), with_oracle=True)
        assert artifacts.oracle is not None
        assert artifacts.oracle.evaluations > 0
        text = (tmp_path / "design_report.txt").read_text()
        assert "brute-force cross-check:" in text
        assert "evaluations      : " in text
        assert "box              : kp=[0.0,10.0] step 0.5" in text

    def test_oracle_close_to_design(self, reduced_config, tmp_path):
        cfg = dataclasses.replace(
            reduced_config,
            oracle=OracleBox(
                kp=GainAxis(0.0, 10.0, 0.1),
                ki=GainAxis(0.0, 5.0, 0.1),
                kd=GainAxis(0.0, 5.0, 0.1),
            ),
        )
        artifacts = run_command(cfg, "design", str(tmp_path), with_oracle=True)
        design_kd = artifacts.design.gains.kd
        oracle_kd = artifacts.oracle.best_gains.kd
        # the full 3-D search can only improve on the pair-restricted design
        # (up to one grid step), and its winner must satisfy every bound
        assert oracle_kd <= design_kd + 0.1 + 1e-9
        from qft_forge.optimizer import loop_margins

        margins = loop_margins(artifacts.problem, artifacts.oracle.best_gains)
        assert all(m.slack_db >= -1e-9 for m in margins)

    def test_tau_reports_physical_gains(self, reduced_config, tmp_path):
        cfg = dataclasses.replace(
            reduced_config,
            design=dataclasses.replace(reduced_config.design, tau=0.001),
        )
        artifacts = run_command(cfg, "design", str(tmp_path))
        assert artifacts.physical_gains is not None
        plant, gain_map = effective_plant(cfg)
        mapped = gain_map.forward(artifacts.physical_gains)
        assert mapped.kp == pytest.approx(artifacts.design.gains.kp, rel=1e-12)
        assert mapped.ki == pytest.approx(artifacts.design.gains.ki, rel=1e-12)
        assert mapped.kd == pytest.approx(artifacts.design.gains.kd, rel=1e-12)
        text = (tmp_path / "design_report.txt").read_text()
        assert "physical gains     : " in text
        assert "(derivative filter tau=0.001)" in text

    def test_infeasible_design_stops_early(self, reduced_config, tmp_path):
        cfg = dataclasses.replace(
            reduced_config, disturbance=DisturbanceSpec(caps={3.0: 1e-6})
        )
        artifacts = run_command(cfg, "all", str(tmp_path))
        assert not artifacts.design.feasible
        assert artifacts.verification is None
        assert set(artifacts.written) == {
            "templates.csv",
            "bounds.csv",
            "kd_grid.csv",
            "design_report.txt",
            "nichols.svg",
        }
        text = (tmp_path / "design_report.txt").read_text()
        assert "feasible           : no" in text
        assert "reason             : " in text
