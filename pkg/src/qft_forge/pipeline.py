"""Run orchestration: templates -> bounds -> design -> verify, plus artifacts.

Each stage is a pure function of the validated configuration and the outputs
of earlier stages; :func:`run_command` chains the stages a command needs,
writes that command's artifact files into the output directory, and returns
everything computed so callers (the CLI, tests) can inspect results without
re-parsing their own files.  All files are written with ``\n`` newlines and
shortest round-trip float formatting, so re-running a command on the same
configuration reproduces every artifact byte for byte.
"""

from __future__ import annotations

import cmath
import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .bounds import (
    INFEASIBLE,
    NO_CONSTRAINT,
    BoundCurve,
    UContour,
    combine_with_ucontour,
    delta_spread,
    disturbance_bound,
    disturbance_gain,
    horowitz_bound,
    horowitz_gain,
    make_phase_grid,
    performance_bound,
    u_contour,
)
from .config import DesignConfig
from .lti import db, wrap_phase
from .optimizer import (
    DesignProblem,
    DesignResult,
    GainMap,
    PidGains,
    SweepScreen,
    design_pi_pd,
    design_pid,
    filtered_derivative_transform,
    pid_frequency_response,
)
from .plant import Template, UncertainPlant, evaluate_plant, generate_template
from .svgchart import emit_nichols_svg
from .verify import (
    GainAxis,
    OracleBox,
    OracleResult,
    VerificationReport,
    brute_force_design,
    default_dense_grid,
    verify_design,
)

__all__ = [
    "COMMANDS",
    "RunArtifacts",
    "compute_templates",
    "compute_bounds",
    "build_problem",
    "compute_design",
    "compute_verification",
    "compute_oracle",
    "run_command",
    "DEFAULT_ORACLE_BOX",
]

COMMANDS = ("templates", "bounds", "design", "verify", "all")
_STAGE_DEPTH = {"templates": 0, "bounds": 1, "design": 2, "verify": 3, "all": 3}

DEFAULT_ORACLE_BOX = OracleBox(
    kp=GainAxis(0.0, 50.0, 0.05),
    ki=GainAxis(0.0, 50.0, 0.05),
    kd=GainAxis(0.0, 50.0, 0.05),
)

_DENSE_SWEEP_POINTS = 500


@dataclass
class RunArtifacts:
    """Everything a run computed, plus the files it wrote."""

    out_dir: str
    written: Tuple[str, ...] = ()
    templates: Dict[float, Template] = field(default_factory=dict)
    bound_curves: Tuple[BoundCurve, ...] = ()
    contour: Optional[UContour] = None
    delta_hf_db: Optional[float] = None
    problem: Optional[DesignProblem] = None
    design: Optional[DesignResult] = None
    physical_gains: Optional[PidGains] = None
    verification: Optional[VerificationReport] = None
    oracle: Optional[OracleResult] = None


def effective_plant(config: DesignConfig) -> Tuple[UncertainPlant, Optional[GainMap]]:
    """The plant the design actually runs against.

    With a derivative-filter time constant configured, the filter is folded
    into the plant denominator and the returned gain map converts the
    search's regrouped gains back to the physical filtered-PID gains.
    """
    if config.design.tau is None:
        return config.plant, None
    return filtered_derivative_transform(config.plant, config.design.tau)


def compute_templates(config: DesignConfig) -> Dict[float, Template]:
    """Uncertainty templates at every design frequency, ascending order."""
    plant, _ = effective_plant(config)
    return {omega: generate_template(plant, omega) for omega in config.frequencies}


def compute_bounds(
    config: DesignConfig,
    templates: Dict[float, Template],
    jobs: int = 1,
) -> Tuple[Tuple[BoundCurve, ...], UContour, float]:
    """Combined per-frequency design bounds plus the stability contour.

    Per frequency: the tracking-spread bound, optionally merged with a
    sensitivity-cap bound, then folded with the contour top over its phase
    range.  ``jobs`` > 1 computes frequencies concurrently; results are
    collected in frequency order, so the output is identical either way.
    """
    grid = make_phase_grid(config.phase_grid_count)
    if config.delta_hf_override is not None:
        delta_hf = config.delta_hf_override
    else:
        delta_hf = templates[config.frequencies[-1]].gain_span_db()
    contour = u_contour(config.m_value, delta_hf, grid)
    use_hull = config.design.use_hull
    caps = config.disturbance.caps if config.disturbance is not None else {}

    def curve_for(omega: float) -> BoundCurve:
        template = templates[omega]
        spread = delta_spread(config.tracking, omega)
        curve = horowitz_bound(template, spread, grid, use_hull=use_hull)
        if omega in caps:
            extra = disturbance_bound(template, caps[omega], grid, use_hull=use_hull)
            curve = performance_bound([curve, extra])
        return combine_with_ucontour(curve, contour)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            curves = tuple(pool.map(curve_for, config.frequencies))
    else:
        curves = tuple(curve_for(omega) for omega in config.frequencies)
    return curves, contour, delta_hf


def build_problem(
    config: DesignConfig,
    curves: Sequence[BoundCurve],
) -> DesignProblem:
    plant, _ = effective_plant(config)
    responses = tuple(
        evaluate_plant(plant, plant.nominal, 1j * omega) for omega in config.frequencies
    )
    return DesignProblem(
        frequencies=config.frequencies,
        nominal_responses=responses,
        bounds=tuple(curves),
        phase_grid=make_phase_grid(config.phase_grid_count),
        pair_indices=config.pair_indices(),
    )


def _exact_bound_fn(
    config: DesignConfig,
    templates: Dict[float, Template],
    contour: UContour,
) -> Callable[[int, float], float]:
    """Bisection-exact bound lookup, bypassing grid interpolation.

    Answers the same question as interpolating the combined curves — the
    least admissible nominal gain at this frequency and phase — but runs the
    bisections directly at the queried phase.
    """
    use_hull = config.design.use_hull
    caps = config.disturbance.caps if config.disturbance is not None else {}

    def lookup(index: int, phase_deg: float) -> float:
        omega = config.frequencies[index]
        template = templates[omega]
        value = horowitz_gain(
            template, delta_spread(config.tracking, omega), phase_deg, use_hull=use_hull
        )
        if omega in caps:
            value = max(
                value,
                disturbance_gain(template, caps[omega], phase_deg, use_hull=use_hull),
            )
        if contour.contains_phase(phase_deg):
            value = max(value, contour.upper_at(phase_deg))
        return value

    return lookup


def _stability_screen(
    config: DesignConfig,
    contour: UContour,
    plant: UncertainPlant,
) -> SweepScreen:
    grid = default_dense_grid(config.frequencies, _DENSE_SWEEP_POINTS)
    responses = tuple(
        evaluate_plant(plant, plant.nominal, 1j * float(omega)) for omega in grid
    )
    return SweepScreen(
        contour=contour,
        omegas=tuple(float(w) for w in grid),
        nominal_responses=responses,
    )


def compute_design(
    config: DesignConfig,
    problem: DesignProblem,
    contour: UContour,
    templates: Dict[float, Template],
) -> Tuple[DesignResult, Optional[PidGains]]:
    """Run the configured controller search, with the whole-curve screen on.

    The per-frequency bounds see the loop only at the design frequencies;
    the screen additionally rejects candidates whose nominal response dips
    into the stability contour anywhere on a dense grid, which is the same
    condition the verify stage would fail them on.  Returns the search
    result and, when a derivative filter is configured, the mapped-back
    physical gains (None otherwise, or when infeasible).
    """
    plant, gain_map = effective_plant(config)
    screen = _stability_screen(config, contour, plant)
    exact = (
        _exact_bound_fn(config, templates, contour)
        if config.design.exact_bound_recompute
        else None
    )
    kind = config.design.kind
    if kind == "pid":
        result = design_pid(problem, screen=screen, exact_bound=exact)
    else:
        anchor = config.pair_indices()[0]
        result = design_pi_pd(
            problem, kind, anchor_frequency_index=anchor, screen=screen, exact_bound=exact
        )
    physical = None
    if result.feasible and gain_map is not None:
        physical = gain_map.inverse(result.gains)
    return result, physical


def compute_verification(
    config: DesignConfig,
    gains: PidGains,
    curves: Sequence[BoundCurve],
    contour: UContour,
) -> VerificationReport:
    """Full post-design check; includes the tracking envelope only when the
    configuration carries a prefilter."""
    plant, _ = effective_plant(config)
    dense = default_dense_grid(config.frequencies, _DENSE_SWEEP_POINTS)
    return verify_design(
        plant,
        gains,
        curves,
        contour,
        dense,
        prefilter=config.prefilter,
        tracking=config.tracking if config.prefilter is not None else None,
    )


def compute_oracle(config: DesignConfig, problem: DesignProblem) -> OracleResult:
    box = config.oracle if config.oracle is not None else DEFAULT_ORACLE_BOX
    return brute_force_design(problem, box)


# --- artifact formatting ----------------------------------------------------

def _num(value: float) -> str:
    """Shortest round-trip decimal for a float (negative zero normalised)."""
    value = float(value)
    if value == 0.0:
        value = 0.0
    return repr(value)


def _bound_str(value: float) -> str:
    if value == NO_CONSTRAINT:
        return "NO_CONSTRAINT"
    if value == INFEASIBLE:
        return "INFEASIBLE"
    return _num(value)


def _write_text(path: str, text: str):
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(text)


def _write_csv(path: str, header: Sequence[str], rows: Sequence[Sequence[str]]):
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def write_templates_csv(path: str, config: DesignConfig, templates: Dict[float, Template]):
    names = tuple(spec.name for spec in config.plant.params)
    header = ["omega", *names, "phase_deg", "gain_db", "on_hull"]
    rows: List[List[str]] = []
    for omega in config.frequencies:
        template = templates[omega]
        hull = set(template.hull_indices)
        for i, point in enumerate(template.points):
            rows.append(
                [
                    _num(omega),
                    *(_num(v) for v in point.params),
                    _num(point.phase_deg),
                    _num(point.gain_db),
                    "1" if i in hull else "0",
                ]
            )
    _write_csv(path, header, rows)


def write_bounds_csv(path: str, curves: Sequence[BoundCurve]):
    rows = [
        [_num(curve.omega), _num(phase), _bound_str(value)]
        for curve in curves
        for phase, value in zip(curve.phase_grid, curve.min_gain_db)
    ]
    _write_csv(path, ["omega", "phase_deg", "min_gain_db"], rows)


def write_kd_grid_csv(path: str, result: DesignResult):
    rows: List[List[str]] = []
    if result.window_phases_i:
        header = ["phase_i_deg", "phase_j_deg", "kd"]
        for i, phase_i in enumerate(result.window_phases_i):
            for j, phase_j in enumerate(result.window_phases_j):
                value = result.kd_grid[i, j]
                rows.append(
                    [
                        _num(phase_i),
                        _num(phase_j),
                        "INFEASIBLE" if math.isinf(value) else _num(value),
                    ]
                )
    else:
        header = ["phase_deg", "objective"]
        for j, phase in enumerate(result.window_phases_j):
            value = result.kd_grid[0, j]
            rows.append([_num(phase), "INFEASIBLE" if math.isinf(value) else _num(value)])
    _write_csv(path, header, rows)


def write_envelope_csv(path: str, report: Optional[VerificationReport]):
    rows = []
    if report is not None:
        rows = [
            [_num(r.omega), _num(r.min_db), _num(r.max_db), _num(r.lower_db), _num(r.upper_db)]
            for r in report.envelope
        ]
    _write_csv(path, ["omega", "min_db", "max_db", "lower_db", "upper_db"], rows)


def _gains_line(gains: PidGains) -> str:
    return f"kp={_num(gains.kp)} ki={_num(gains.ki)} kd={_num(gains.kd)}"


def render_design_report(
    config: DesignConfig,
    result: DesignResult,
    physical: Optional[PidGains],
    delta_hf: float,
    oracle: Optional[OracleResult],
) -> str:
    lines: List[str] = []
    lines.append("design report")
    lines.append("=============")
    lines.append(f"controller kind    : {config.design.kind}")
    lines.append(f"phase grid         : {config.phase_grid_count} points")
    pair = config.pair_indices()
    lines.append(
        "anchor frequencies : "
        + ", ".join(f"{config.frequencies[i]:g} rad/s (position {i + 1})" for i in pair)
    )
    lines.append(f"hf gain span       : {delta_hf:.6f} dB")
    lines.append(f"feasible           : {'yes' if result.feasible else 'no'}")
    if not result.feasible:
        lines.append(f"reason             : {result.reason}")
    if result.gains is not None:
        lines.append(f"gains              : {_gains_line(result.gains)}")
    if physical is not None:
        lines.append(
            f"physical gains     : {_gains_line(physical)} "
            f"(derivative filter tau={_num(config.design.tau)})"
        )
    if result.chosen_phases:
        lines.append(
            "chosen loop phases : "
            + ", ".join(f"{p:.4f} deg" for p in result.chosen_phases)
        )
    if result.beta_db is not None:
        lines.append(f"scaling lift       : {result.beta_db:.6f} dB")
    if result.active_frequency is not None:
        lines.append(f"active frequency   : {result.active_frequency:g} rad/s")
    lines.append(f"screen rejections  : {result.screen_rejections}")
    finite = int((~np.isinf(result.kd_grid)).sum())
    lines.append(
        f"candidate grid     : {result.kd_grid.shape[0]}x{result.kd_grid.shape[1]} "
        f"cells, {finite} feasible"
    )
    if result.margin_report:
        lines.append("margins (design-frequency slack over the combined bounds):")
        for entry in result.margin_report:
            lines.append(
                f"  omega={entry.omega:<8g} phase={entry.phase_deg:10.4f} deg  "
                f"gain={entry.gain_db:10.4f} dB  bound={_bound_str(entry.bound_db):>14}  "
                f"slack={entry.slack_db:10.4f} dB"
            )
    if oracle is not None:
        lines.append("brute-force cross-check:")
        lines.append(f"  best gains       : {_gains_line(oracle.best_gains)}")
        lines.append(f"  evaluations      : {oracle.evaluations}")
        lines.append(
            "  box              : "
            + " ".join(
                f"{name}=[{_num(axis.lo)},{_num(axis.hi)}] step {_num(axis.step)}"
                for name, axis in (
                    ("kp", oracle.box.kp),
                    ("ki", oracle.box.ki),
                    ("kd", oracle.box.kd),
                )
            )
        )
    return "\n".join(lines) + "\n"


def render_verify_report(report: VerificationReport) -> str:
    lines: List[str] = []
    lines.append("verification report")
    lines.append("===================")
    lines.append(f"verdict : {'PASS' if report.passed else 'FAIL'}")
    lines.append("margins:")
    for m in report.per_frequency_margins:
        lines.append(
            f"  omega={m.omega:<8g} phase={m.phase_deg:10.4f} deg  "
            f"gain={m.gain_db:10.4f} dB  bound={_bound_str(m.bound_db):>14}  "
            f"slack={m.slack_db:10.4f} dB  source={m.source}"
        )
    inside = report.sweep_violations
    lines.append(
        f"dense sweep : {len(report.dense_sweep)} points, "
        f"{len(inside)} inside the stability contour"
    )
    for point in inside[:10]:
        lines.append(
            f"  omega={point.omega:.4f} phase={point.phase_deg:.4f} deg "
            f"gain={point.gain_db:.4f} dB"
        )
    if len(inside) > 10:
        lines.append(f"  ... {len(inside) - 10} more")
    if report.envelope:
        lines.append("closed-loop envelope vs reference corridor:")
        for row in report.envelope:
            lines.append(
                f"  omega={row.omega:<8g} family=[{row.min_db:9.4f}, {row.max_db:9.4f}] dB  "
                f"corridor=[{row.lower_db:9.4f}, {row.upper_db:9.4f}] dB  "
                f"inside={'yes' if row.inside() else 'NO'}"
            )
    if report.reasons:
        lines.append("failure reasons:")
        for reason in report.reasons:
            lines.append(f"  - {reason}")
    return "\n".join(lines) + "\n"


# --- figure assembly --------------------------------------------------------

def _nichols_layers(
    config: DesignConfig,
    artifacts: RunArtifacts,
) -> Dict[str, object]:
    plant, _ = effective_plant(config)
    layers: Dict[str, object] = {}

    template_layers = []
    for omega in config.frequencies:
        template = artifacts.templates.get(omega)
        if template is None:
            continue
        nominal = evaluate_plant(plant, plant.nominal, 1j * omega)
        base_phase = wrap_phase(math.degrees(cmath.phase(nominal)))
        base_gain = db(abs(nominal))
        points = [
            (wrap_phase(base_phase + p.phase_deg), base_gain + p.gain_db)
            for p in template.points
        ]
        template_layers.append((f"w={omega:g}", points))
    layers["templates"] = template_layers

    bound_layers = []
    for curve in artifacts.bound_curves:
        segments: List[List[Tuple[float, float]]] = []
        run: List[Tuple[float, float]] = []
        for phase, value in zip(curve.phase_grid, curve.min_gain_db):
            if math.isfinite(value):
                run.append((phase, value))
            elif run:
                segments.append(run)
                run = []
        if run:
            segments.append(run)
        bound_layers.append((f"w={curve.omega:g}", segments))
    layers["bound_curves"] = bound_layers

    contour = artifacts.contour
    if contour is not None and contour.phases:
        polygon = list(zip(contour.phases, contour.upper_db))
        polygon.extend(
            (phase, low) for phase, low in zip(reversed(contour.phases), reversed(contour.lower_db))
        )
        layers["u_contour"] = polygon
    else:
        layers["u_contour"] = []

    dense = default_dense_grid(config.frequencies, _DENSE_SWEEP_POINTS)
    plant_points = []
    for omega in dense:
        response = evaluate_plant(plant, plant.nominal, 1j * float(omega))
        if response == 0:
            continue
        plant_points.append(
            (wrap_phase(math.degrees(cmath.phase(response))), db(abs(response)))
        )
    layers["plant_curve"] = plant_points

    loop_points: List[Tuple[float, float]] = []
    markers: List[Tuple[float, float, str]] = []
    if artifacts.design is not None and artifacts.design.gains is not None:
        gains = artifacts.design.gains
        for omega in dense:
            response = evaluate_plant(plant, plant.nominal, 1j * float(omega))
            loop = response * pid_frequency_response(gains, float(omega))
            if loop == 0:
                continue
            loop_points.append(
                (wrap_phase(math.degrees(cmath.phase(loop))), db(abs(loop)))
            )
        for omega in config.frequencies:
            response = evaluate_plant(plant, plant.nominal, 1j * omega)
            loop = response * pid_frequency_response(gains, omega)
            if loop == 0:
                continue
            markers.append(
                (
                    wrap_phase(math.degrees(cmath.phase(loop))),
                    db(abs(loop)),
                    f"{omega:g}",
                )
            )
    layers["loop_curve"] = loop_points
    layers["loop_markers"] = markers
    return layers


# --- orchestration ---------------------------------------------------------

def run_command(
    config: DesignConfig,
    command: str,
    out_dir: str,
    jobs: int = 1,
    with_oracle: bool = False,
) -> RunArtifacts:
    """Execute one CLI command: the requested stage plus its prerequisites.

    Writes the artifact files of every stage that ran, so ``all`` and the
    four stages run in sequence leave identical directories.  The chart is
    (re)written by every command with whatever layers exist at that depth.
    Design infeasibility and verification failure are reported in the
    returned artifacts, not raised.
    """
    if command not in COMMANDS:
        raise ValueError(f"unknown command {command!r}; expected one of {COMMANDS}")
    depth = _STAGE_DEPTH[command]
    os.makedirs(out_dir, exist_ok=True)
    artifacts = RunArtifacts(out_dir=out_dir)
    written: List[str] = []

    def emit(name: str, writer: Callable[[str], None]):
        path = os.path.join(out_dir, name)
        writer(path)
        written.append(name)

    artifacts.templates = compute_templates(config)
    emit("templates.csv", lambda p: write_templates_csv(p, config, artifacts.templates))

    if depth >= 1:
        curves, contour, delta_hf = compute_bounds(config, artifacts.templates, jobs=jobs)
        artifacts.bound_curves = curves
        artifacts.contour = contour
        artifacts.delta_hf_db = delta_hf
        emit("bounds.csv", lambda p: write_bounds_csv(p, curves))

    if depth >= 2:
        artifacts.problem = build_problem(config, artifacts.bound_curves)
        result, physical = compute_design(
            config, artifacts.problem, artifacts.contour, artifacts.templates
        )
        artifacts.design = result
        artifacts.physical_gains = physical
        if with_oracle:
            artifacts.oracle = compute_oracle(config, artifacts.problem)
        emit("kd_grid.csv", lambda p: write_kd_grid_csv(p, result))
        emit(
            "design_report.txt",
            lambda p: _write_text(
                p,
                render_design_report(
                    config, result, physical, artifacts.delta_hf_db, artifacts.oracle
                ),
            ),
        )

    if depth >= 3 and artifacts.design is not None and artifacts.design.feasible:
        report = compute_verification(
            config, artifacts.design.gains, artifacts.bound_curves, artifacts.contour
        )
        artifacts.verification = report
        emit("envelope.csv", lambda p: write_envelope_csv(p, report))
        emit("verify_report.txt", lambda p: _write_text(p, render_verify_report(report)))

    layers = _nichols_layers(config, artifacts)
    emit(
        "nichols.svg",
        lambda p: _write_text(
            p,
            emit_nichols_svg(
                templates=layers["templates"],
                bound_curves=layers["bound_curves"],
                u_contour=layers["u_contour"],
                plant_curve=layers["plant_curve"],
                loop_curve=layers["loop_curve"],
                loop_markers=layers["loop_markers"],
            ),
        ),
    )

    artifacts.written = tuple(written)
    return artifacts
