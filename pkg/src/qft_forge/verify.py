"""Post-design checks: margins, dense stability sweep, tracking envelope,
and an exhaustive gain-box search used to cross-examine the optimizer.

Everything here reports; nothing raises on a failed check.  A design that
misses a bound produces a report with ``passed = False`` and the offending
rows, which the CLI turns into a non-zero exit code.
"""

from __future__ import annotations

import cmath
import itertools
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .bounds import (
    INFEASIBLE,
    NO_CONSTRAINT,
    BoundCurve,
    TrackingSpec,
    UContour,
    interpolate_bound,
    interpolate_bound_array,
)
from .errors import CriticalPoint, NoFeasiblePoint
from .lti import RationalTransferFunction, db, eval_tf, wrap_phase
from .optimizer import (
    INTERPOLATION_TOLERANCE_DB,
    DesignProblem,
    PidGains,
    pid_frequency_response,
)
from .plant import UncertainPlant, evaluate_plant

__all__ = [
    "SLACK_TOLERANCE_DB",
    "VerifyMargin",
    "SweepPoint",
    "EnvelopeRow",
    "VerificationReport",
    "GainAxis",
    "OracleBox",
    "OracleResult",
    "default_prefilter",
    "default_dense_grid",
    "closed_loop_envelope",
    "verify_design",
    "brute_force_design",
]

# One tolerance for the whole reporting chain, shared with the optimizer's
# margin invariants so design and verification agree on what "violated" means.
SLACK_TOLERANCE_DB = INTERPOLATION_TOLERANCE_DB


def default_prefilter(cutoff_a: float = 3.5, cutoff_b: float = 7.5) -> RationalTransferFunction:
    """Unity-dc two-pole prefilter used to centre the tracking band."""
    product = cutoff_a * cutoff_b
    return RationalTransferFunction([product], [1.0, cutoff_a + cutoff_b, product])


def default_dense_grid(frequencies: Sequence[float], points: int = 500) -> np.ndarray:
    """Log-spaced sweep a decade past both ends of the design frequencies.

    The design frequencies themselves are merged into the grid, so callers
    can hand the result straight to :func:`verify_design`, whose sweep is
    expected to cover every design point.
    """
    lo = min(frequencies) / 10.0
    hi = max(frequencies) * 10.0
    sweep = np.logspace(math.log10(lo), math.log10(hi), points)
    return np.unique(np.concatenate([sweep, np.asarray(frequencies, dtype=float)]))


@dataclass(frozen=True)
class VerifyMargin:
    omega: float
    phase_deg: float
    gain_db: float
    bound_db: float
    slack_db: float
    source: str  # 'performance' | 'ucontour' | 'none'


@dataclass(frozen=True)
class SweepPoint:
    """One stop of the dense sweep: where the loop sits and whether it has
    strayed into the forbidden stability region."""

    omega: float
    phase_deg: float
    gain_db: float
    inside_ucontour: bool


@dataclass(frozen=True)
class EnvelopeRow:
    omega: float
    min_db: float
    max_db: float
    lower_db: float
    upper_db: float

    def inside(self) -> bool:
        return self.min_db >= self.lower_db - 1e-9 and self.max_db <= self.upper_db + 1e-9


@dataclass(frozen=True)
class VerificationReport:
    per_frequency_margins: Tuple[VerifyMargin, ...]
    dense_sweep: Tuple[SweepPoint, ...]
    envelope: Tuple[EnvelopeRow, ...]
    passed: bool
    reasons: Tuple[str, ...]

    @property
    def sweep_violations(self) -> Tuple[SweepPoint, ...]:
        return tuple(p for p in self.dense_sweep if p.inside_ucontour)

    @property
    def envelope_violations(self) -> Tuple[EnvelopeRow, ...]:
        return tuple(row for row in self.envelope if not row.inside())


def closed_loop_envelope(
    plant: UncertainPlant,
    gains: PidGains,
    prefilter: RationalTransferFunction,
    tracking: TrackingSpec,
    omegas: Sequence[float],
    samples_per_parameter: Optional[int] = None,
) -> Tuple[EnvelopeRow, ...]:
    """Extremes of |F L / (1 + L)| over the sampled plant family, next to the
    reference-model corridor (orientation-normalised per frequency).

    The nominal parameter point is always part of the sample, so the nominal
    closed loop is bracketed by every row.  A family member that lands the
    loop exactly on -1 raises CriticalPoint — that sample is marginally
    unstable and no finite envelope describes it.
    """
    axes = [spec.grid(samples_per_parameter) for spec in plant.params]
    names = [spec.name for spec in plant.params]
    combos = [dict(zip(names, combo)) for combo in itertools.product(*axes)]
    if not any(
        all(env[n] == plant.nominal[n] for n in names) for env in combos
    ):
        combos.append(dict(plant.nominal))
    rows: List[EnvelopeRow] = []
    for omega in omegas:
        s = 1j * float(omega)
        k_resp = pid_frequency_response(gains, float(omega))
        f_mag = abs(eval_tf(prefilter, s))
        mags: List[float] = []
        for env in combos:
            loop = evaluate_plant(plant, env, s) * k_resp
            denom = 1.0 + loop
            if denom == 0.0:
                raise CriticalPoint(
                    f"family member {env} drives the loop onto -1 at omega={omega}"
                )
            mags.append(f_mag * abs(loop / denom))
        with np.errstate(divide="ignore"):
            mags_db = 20.0 * np.log10(np.asarray(mags))
        lo_model = db(abs(eval_tf(tracking.lower, s)))
        hi_model = db(abs(eval_tf(tracking.upper, s)))
        rows.append(
            EnvelopeRow(
                omega=float(omega),
                min_db=float(mags_db.min()),
                max_db=float(mags_db.max()),
                lower_db=min(lo_model, hi_model),
                upper_db=max(lo_model, hi_model),
            )
        )
    return tuple(rows)


def verify_design(
    plant: UncertainPlant,
    gains: PidGains,
    bound_curves: Sequence[BoundCurve],
    u: UContour,
    dense_grid: Sequence[float],
    prefilter: Optional[RationalTransferFunction] = None,
    tracking: Optional[TrackingSpec] = None,
    envelope_samples: Optional[int] = None,
) -> VerificationReport:
    """Re-examine a finished design against everything it promised.

    Margins are recomputed from scratch (plant response times controller
    response against the interpolated bound), the nominal loop is swept
    densely through the stability contour, and — when a prefilter and the
    tracking models are supplied — the family envelope is checked against the
    reference corridor at the design frequencies.  The sweep always covers
    the design frequencies, whether or not the caller's grid included them.
    """
    margins: List[VerifyMargin] = []
    for curve in bound_curves:
        omega = curve.omega
        loop = evaluate_plant(plant, plant.nominal, 1j * omega) * pid_frequency_response(gains, omega)
        if loop == 0:
            # Zero loop gain has no phase to look a bound up at; it clears a
            # curve only when that curve constrains nothing at all.
            vacuous = all(v == NO_CONSTRAINT for v in curve.min_gain_db)
            margins.append(
                VerifyMargin(
                    omega=omega,
                    phase_deg=0.0,
                    gain_db=float("-inf"),
                    bound_db=NO_CONSTRAINT if vacuous else INFEASIBLE,
                    slack_db=float("inf") if vacuous else float("-inf"),
                    source="none",
                )
            )
            continue
        phase = wrap_phase(math.degrees(cmath.phase(loop)))
        gain = db(abs(loop))
        bound = interpolate_bound(curve, phase)
        if bound == NO_CONSTRAINT:
            source = "none"
        elif u.contains_phase(phase) and math.isfinite(bound) and abs(bound - u.upper_at(phase)) <= 1e-9:
            source = "ucontour"
        else:
            source = "performance"
        margins.append(
            VerifyMargin(
                omega=omega,
                phase_deg=phase,
                gain_db=gain,
                bound_db=bound,
                slack_db=gain - bound if bound != NO_CONSTRAINT else float("inf"),
                source=source,
            )
        )

    design_freqs = [c.omega for c in bound_curves]
    sweep_omegas = np.unique(
        np.concatenate([np.asarray(dense_grid, dtype=float), np.asarray(design_freqs)])
    )
    sweep: List[SweepPoint] = []
    for omega in sweep_omegas:
        loop = evaluate_plant(plant, plant.nominal, 1j * float(omega)) * pid_frequency_response(
            gains, float(omega)
        )
        phase = wrap_phase(math.degrees(cmath.phase(loop)))
        gain = db(abs(loop)) if loop != 0 else float("-inf")
        sweep.append(
            SweepPoint(
                omega=float(omega),
                phase_deg=phase,
                gain_db=gain,
                inside_ucontour=u.inside(phase, gain, tol_db=SLACK_TOLERANCE_DB),
            )
        )

    envelope: Tuple[EnvelopeRow, ...] = ()
    if prefilter is not None and tracking is not None:
        envelope = closed_loop_envelope(
            plant,
            gains,
            prefilter,
            tracking,
            design_freqs,
            samples_per_parameter=envelope_samples,
        )

    reasons: List[str] = []
    for m in margins:
        if m.slack_db < -SLACK_TOLERANCE_DB:
            reasons.append(
                f"margin at omega={m.omega:g}: slack {m.slack_db:.3f} dB below -{SLACK_TOLERANCE_DB} dB"
            )
    n_inside = sum(1 for p in sweep if p.inside_ucontour)
    if n_inside:
        worst = next(p for p in sweep if p.inside_ucontour)
        reasons.append(
            f"loop enters the stability contour at {n_inside} swept frequencies "
            f"(first at omega={worst.omega:.4g})"
        )
    for row in envelope:
        if not row.inside():
            reasons.append(
                f"closed-loop envelope leaves the reference corridor at omega={row.omega:g}"
            )

    return VerificationReport(
        per_frequency_margins=tuple(margins),
        dense_sweep=tuple(sweep),
        envelope=envelope,
        passed=not reasons,
        reasons=tuple(reasons),
    )


# --- exhaustive cross-check ------------------------------------------------

@dataclass(frozen=True)
class GainAxis:
    """Inclusive sampling axis for one gain: lo, hi, step."""

    lo: float
    hi: float
    step: float

    def __post_init__(self):
        if self.lo < 0.0 or self.hi < self.lo or self.step <= 0.0:
            raise ValueError(f"bad gain axis ({self.lo}, {self.hi}, {self.step})")

    def values(self) -> np.ndarray:
        count = int(round((self.hi - self.lo) / self.step)) + 1
        return self.lo + self.step * np.arange(count)


@dataclass(frozen=True)
class OracleBox:
    kp: GainAxis
    ki: GainAxis
    kd: GainAxis


@dataclass(frozen=True)
class OracleResult:
    best_gains: PidGains
    best_kd: float
    evaluations: int
    box: OracleBox


def brute_force_design(problem: DesignProblem, box: OracleBox) -> OracleResult:
    """Exhaustive search of the gain box for the least-kd feasible triple.

    Feasibility is the same test the optimizer answers to: at every design
    frequency the open-loop gain must clear the interpolated bound at the
    loop's own phase.  kd slices are visited in ascending order and each
    slice is scanned as a (ki, kp) mesh; the first feasible hit is the
    lexicographic (kd, ki, kp) minimum, so later slices cannot win and are
    skipped.  Shares only the bound interpolation with the optimizer — no
    kernels, no scaling step.
    """
    kp_vals = box.kp.values()
    ki_vals = box.ki.values()
    kd_vals = box.kd.values()
    responses = np.asarray(problem.nominal_responses)
    mesh_size = len(ki_vals) * len(kp_vals)

    examined = 0
    for kd in kd_vals:
        feasible = np.ones((len(ki_vals), len(kp_vals)), dtype=bool)
        for k, omega in enumerate(problem.frequencies):
            ctrl = kp_vals[None, :] + 1j * (kd * omega - ki_vals[:, None] / omega)
            loop = responses[k] * ctrl
            with np.errstate(divide="ignore"):
                gain_db = 20.0 * np.log10(np.abs(loop))
            phase = np.degrees(np.angle(loop))
            phase = np.where(phase > 0.0, phase - 360.0, phase)
            bound = interpolate_bound_array(problem.bounds[k], phase)
            # A zero controller response has no phase, so no bound can be
            # looked up for it; treat it as failing this frequency outright
            # (otherwise the all-zero triple passes vacuously).
            feasible &= (gain_db >= bound) & (np.abs(ctrl) > 0.0)
            if not feasible.any():
                break
        examined += mesh_size
        if feasible.any():
            flat = int(np.argmax(feasible.reshape(-1)))
            i_ki, i_kp = divmod(flat, len(kp_vals))
            gains = PidGains(kp=float(kp_vals[i_kp]), ki=float(ki_vals[i_ki]), kd=float(kd))
            return OracleResult(
                best_gains=gains,
                best_kd=float(kd),
                evaluations=examined,
                box=box,
            )
    raise NoFeasiblePoint(
        f"no feasible gain triple in the {len(kd_vals)}x{len(ki_vals)}x{len(kp_vals)} box"
    )
