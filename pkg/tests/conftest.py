"""Shared fixtures: the servo example stack plus a smaller, faster variant.

The "servo" fixtures load ``configs/servo.json`` (two-parameter motor plant,
eight design frequencies, 360-point phase grid) and run the pipeline stages
once per session.  The "reduced" fixtures shrink that problem to three
frequencies and a 24-point grid so structural tests stay fast.
"""

from __future__ import annotations

import dataclasses
from pathlib import Path
from types import SimpleNamespace

import pytest

from qft_forge.config import DesignConfig, load_config
from qft_forge.optimizer import PidGains, design_pid
from qft_forge.pipeline import (
    build_problem,
    compute_bounds,
    compute_design,
    compute_templates,
)

REPO_ROOT = Path(__file__).resolve().parent.parent
SERVO_CONFIG_PATH = REPO_ROOT / "configs" / "servo.json"

# Fixed external reference controller for the servo plant; several tests
# check margins and acceptance bands against this point design.
REFERENCE_GAINS = PidGains(kp=12.6, ki=4.46, kd=3.95)


@pytest.fixture(scope="session")
def servo_config() -> DesignConfig:
    return load_config(str(SERVO_CONFIG_PATH))


@pytest.fixture(scope="session")
def servo_stack(servo_config):
    """Templates, combined bounds, stability contour and design problem."""
    templates = compute_templates(servo_config)
    curves, contour, delta_hf = compute_bounds(servo_config, templates)
    problem = build_problem(servo_config, curves)
    return SimpleNamespace(
        templates=templates,
        curves=curves,
        contour=contour,
        delta_hf=delta_hf,
        problem=problem,
    )


@pytest.fixture(scope="session")
def servo_design(servo_config, servo_stack):
    """Screened PID search result on the full servo problem."""
    result, _physical = compute_design(
        servo_config, servo_stack.problem, servo_stack.contour, servo_stack.templates
    )
    return result


@pytest.fixture(scope="session")
def reduced_config(servo_config) -> DesignConfig:
    design = dataclasses.replace(servo_config.design, pair=None)
    return dataclasses.replace(
        servo_config,
        frequencies=(1.0, 3.0, 10.0),
        phase_grid_count=24,
        design=design,
        prefilter=None,
    )


@pytest.fixture(scope="session")
def reduced_stack(reduced_config):
    templates = compute_templates(reduced_config)
    curves, contour, delta_hf = compute_bounds(reduced_config, templates)
    problem = build_problem(reduced_config, curves)
    return SimpleNamespace(
        templates=templates,
        curves=curves,
        contour=contour,
        delta_hf=delta_hf,
        problem=problem,
    )


@pytest.fixture(scope="session")
def reduced_design(reduced_stack):
    """Unscreened PID search on the reduced problem (pure grid algebra)."""
    return design_pid(reduced_stack.problem)
