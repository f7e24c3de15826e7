"""Minimal-derivative PID search over Nichols-plane bounds.

A PID controller evaluated on the imaginary axis is

    K(j w) = kp + j (kd w - ki / w)

so its phase at any frequency is psi = atan((kd w - ki / w) / kp).  Fixing the
controller phase at two distinct frequencies puts the gain triple
(kd, ki, kp) in the kernel of a 2x3 matrix whose rows are

    [ 1,  -1/w^2,  -tan(psi)/w ]

The kernel is one-dimensional, so each phase pair proposes a gain *direction*;
a scalar multiplier then lifts the open loop until the tightest bound is met
with equality.  Scanning phase pairs over a grid and keeping the candidate
with the smallest derivative gain gives the design.  Directions whose
components mix signs cannot be scaled into non-negative gains and are
rejected outright.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .bounds import (
    INFEASIBLE,
    NO_CONSTRAINT,
    BoundCurve,
    UContour,
    interpolate_bound,
)
from .errors import (
    EmptyWindow,
    NegativeMappedGain,
    RankDeficient,
    ZeroController,
)
from .expr import add_expressions, scale_expression
from .lti import RationalTransferFunction, db, wrap_phase
from .plant import UncertainPlant

__all__ = [
    "PidGains",
    "KernelDirection",
    "DesignProblem",
    "MarginEntry",
    "DesignResult",
    "GainMap",
    "pid_frequency_response",
    "pid_gain_phase",
    "pid_transfer_function",
    "phase_window",
    "kernel_direction",
    "beta_scaling",
    "candidate_from_kernel",
    "loop_margins",
    "design_pid",
    "design_pi_pd",
    "filtered_derivative_transform",
    "SweepScreen",
    "INTERPOLATION_TOLERANCE_DB",
]

PHASE_WINDOW_HALF_DEG = 90.0
_SIGN_EPS = 1e-12

# Slack allowed against interpolated bounds throughout the package: margins
# may dip this far below zero, and boundary-riding loops may graze the
# stability contour by this much, before anything is reported as a violation.
INTERPOLATION_TOLERANCE_DB = 0.05


@dataclass(frozen=True)
class PidGains:
    """Proportional / integral / derivative gains, all non-negative."""

    kp: float
    ki: float
    kd: float

    def __post_init__(self):
        for name in ("kp", "ki", "kd"):
            value = getattr(self, name)
            if value < 0.0 or not math.isfinite(value):
                raise ValueError(f"{name} must be finite and non-negative, got {value}")

    def as_tuple(self) -> Tuple[float, float, float]:
        return (self.kp, self.ki, self.kd)


def pid_frequency_response(gains: PidGains, omega: float) -> complex:
    """K(j*omega); only defined for omega > 0 (the integrator blows up at 0)."""
    if omega <= 0.0:
        raise ValueError("omega must be positive")
    return complex(gains.kp, gains.kd * omega - gains.ki / omega)


def pid_gain_phase(gains: PidGains, omega: float) -> Tuple[float, float]:
    """(linear gain, phase deg) of the controller at one frequency.

    Phase lands in (-90, 90) for kp > 0 and hits exactly +/-90 for a pure
    integral/derivative pair.
    """
    if gains.kp == 0.0 and gains.ki == 0.0 and gains.kd == 0.0:
        raise ZeroController("zero controller has no gain/phase")
    response = pid_frequency_response(gains, omega)
    magnitude = abs(response)
    if magnitude == 0.0:
        raise ZeroController(f"controller response vanishes at omega={omega}")
    phase = math.degrees(math.atan2(response.imag, response.real))
    return magnitude, phase


def pid_transfer_function(gains: PidGains) -> RationalTransferFunction:
    """(kd s^2 + kp s + ki) / s."""
    return RationalTransferFunction([gains.kd, gains.kp, gains.ki], [1.0, 0.0])


def phase_window(nominal_phase_deg: float, phase_grid: Sequence[float]) -> Tuple[float, ...]:
    """Grid phases strictly within 90 deg of the nominal plant phase.

    The nominal phase is wrapped onto (-360, 0] first; distances are then
    measured on that single sheet, so a window never leaks through the
    0/-360 seam.  The +/-90 endpoints themselves are excluded — there the
    controller phase would need an unbounded tangent.
    """
    centre = wrap_phase(nominal_phase_deg)
    window = tuple(p for p in phase_grid if abs(p - centre) < PHASE_WINDOW_HALF_DEG)
    if not window:
        raise EmptyWindow(
            f"no grid phase within {PHASE_WINDOW_HALF_DEG} deg of {centre:.2f} deg"
        )
    return window


@dataclass(frozen=True)
class KernelDirection:
    """Unit vector spanning the kernel of the two-frequency phase constraint.

    Components are ordered (derivative, integral, proportional); the phases
    (degrees) and frequencies (rad/s) that generated the constraint matrix
    ride along so the residual stays checkable after the fact.
    """

    v21: float
    v22: float
    v23: float
    psi_i: float
    psi_j: float
    omega_i: float
    omega_j: float

    def as_array(self) -> np.ndarray:
        return np.array([self.v21, self.v22, self.v23])

    def constraint_residual(self) -> float:
        """Norm of A @ v for the generating constraint matrix (ideally 0)."""
        a = _constraint_matrix(self.psi_i, self.psi_j, self.omega_i, self.omega_j)
        return float(np.linalg.norm(a @ self.as_array()))


def _constraint_matrix(
    psi_i_deg: float, psi_j_deg: float, omega_i: float, omega_j: float
) -> np.ndarray:
    rows = []
    for psi, omega in ((psi_i_deg, omega_i), (psi_j_deg, omega_j)):
        if not (abs(psi) < 90.0):
            raise ValueError(f"controller phase {psi} deg outside (-90, 90)")
        if omega <= 0.0:
            raise ValueError("frequencies must be positive")
        t = math.tan(math.radians(psi))
        rows.append([1.0, -1.0 / (omega * omega), -t / omega])
    return np.array(rows)


def kernel_direction(
    psi_i_deg: float,
    psi_j_deg: float,
    omega_i: float,
    omega_j: float,
) -> KernelDirection:
    """Direction of gain triples realising the two requested phases.

    Computed from the SVD of the constraint matrix; the right singular vector
    of the smallest singular value spans the kernel.  Normalised to unit
    length with the largest-magnitude component positive so equal inputs give
    identical output regardless of SVD sign conventions.  Components below
    machine-noise size are snapped to exactly zero, keeping downstream sign
    tests deterministic when a phase pair degenerates onto a two-gain ray.
    """
    if omega_i == omega_j:
        raise ValueError("kernel needs two distinct frequencies")
    a = _constraint_matrix(psi_i_deg, psi_j_deg, omega_i, omega_j)
    _, singular, vt = np.linalg.svd(a)
    if singular[1] < 1e-12 * max(singular[0], 1.0):
        raise RankDeficient("phase-constraint matrix is rank deficient")
    v = vt[2]
    pivot = int(np.argmax(np.abs(v)))
    if v[pivot] < 0.0:
        v = -v
    v = np.where(np.abs(v) <= _SIGN_EPS, 0.0, v)
    v = v / np.linalg.norm(v)
    return KernelDirection(
        v21=float(v[0]),
        v22=float(v[1]),
        v23=float(v[2]),
        psi_i=float(psi_i_deg),
        psi_j=float(psi_j_deg),
        omega_i=float(omega_i),
        omega_j=float(omega_j),
    )


@dataclass(frozen=True)
class DesignProblem:
    """Everything the search needs: frequencies, nominal responses, bounds."""

    frequencies: Tuple[float, ...]
    nominal_responses: Tuple[complex, ...]
    bounds: Tuple[BoundCurve, ...]
    phase_grid: Tuple[float, ...]
    pair_indices: Tuple[int, int]

    def __post_init__(self):
        n = len(self.frequencies)
        if len(self.nominal_responses) != n or len(self.bounds) != n:
            raise ValueError("frequencies, responses and bounds must align")
        if any(b <= a for a, b in zip(self.frequencies, self.frequencies[1:])):
            raise ValueError("frequencies must be strictly increasing")
        if self.frequencies and self.frequencies[0] <= 0.0:
            raise ValueError("frequencies must be positive")
        k, l = self.pair_indices
        if not (0 <= k < n and 0 <= l < n):
            raise ValueError(f"pair indices {self.pair_indices} out of range")
        if k == l:
            raise ValueError("pair indices must differ")

    def nominal_phase_deg(self, index: int) -> float:
        return wrap_phase(math.degrees(cmath.phase(self.nominal_responses[index])))

    def nominal_gain_db(self, index: int) -> float:
        return db(abs(self.nominal_responses[index]))


def beta_scaling(direction: KernelDirection, problem: DesignProblem, exact_bound=None):
    """Smallest dB lift making a gain direction clear every bound.

    For a direction v and multiplier lam the open-loop gain at frequency w_k is
    |G0| + 20 log10(lam) + 10 log10(v23^2 + (v21 w - v22 / w)^2) dB at the
    phase the direction dictates there.  The required lift is the worst bound
    shortfall over frequencies; returns (beta_db, active_index), or
    (INFEASIBLE, None) when a bound is infeasible at the induced phase or no
    bound constrains the direction at all.

    ``exact_bound``, when given, replaces grid interpolation: it is called as
    ``exact_bound(k, phase_deg)`` and must return a dB bound or a sentinel —
    the hook behind the config switch that re-bisects bounds at the exact
    candidate phases instead of interpolating between grid phases.
    """
    beta = None
    active = None
    for k, omega in enumerate(problem.frequencies):
        nu = direction.v21 * omega - direction.v22 / omega
        g2 = direction.v23 * direction.v23 + nu * nu
        phi = wrap_phase(
            problem.nominal_phase_deg(k) + math.degrees(math.atan2(nu, direction.v23))
        )
        if exact_bound is not None:
            bound = exact_bound(k, phi)
        else:
            bound = interpolate_bound(problem.bounds[k], phi)
        if bound == NO_CONSTRAINT:
            continue
        if bound == INFEASIBLE or g2 == 0.0:
            return INFEASIBLE, None
        term = bound - problem.nominal_gain_db(k) - 10.0 * math.log10(g2)
        if beta is None or term > beta:
            beta = term
            active = k
    if beta is None:
        return INFEASIBLE, None
    return beta, active


def candidate_from_kernel(direction: KernelDirection, beta_db: float) -> Optional[PidGains]:
    """Scale a kernel direction into actual gains; None when signs mix.

    A direction with strictly positive and strictly negative components can
    never be scaled into the non-negative octant, whatever the multiplier's
    sign.  Zero components are neutral, which keeps pure-P/PI/PD rays
    admissible.
    """
    v = direction.as_array()
    has_pos = bool(np.any(v > 0.0))
    has_neg = bool(np.any(v < 0.0))
    if has_pos and has_neg:
        return None
    q = 1.0 if has_pos else -1.0
    lam = q * 10.0 ** (beta_db / 20.0)
    scaled = lam * v
    return PidGains(kp=float(scaled[2]), ki=float(scaled[1]), kd=float(scaled[0]))


@dataclass(frozen=True)
class MarginEntry:
    """Where the open loop sits relative to its bound at one frequency."""

    omega: float
    phase_deg: float
    gain_db: float
    bound_db: float
    slack_db: float


def loop_margins(problem: DesignProblem, gains: PidGains) -> Tuple[MarginEntry, ...]:
    """Per-frequency slack of the designed loop over its bounds.

    Slack is +inf where no bound applies and -inf against an infeasible
    entry, falling straight out of the sentinel arithmetic.
    """
    entries = []
    for k, omega in enumerate(problem.frequencies):
        loop = problem.nominal_responses[k] * pid_frequency_response(gains, omega)
        phase = wrap_phase(math.degrees(cmath.phase(loop)))
        gain = db(abs(loop))
        bound = interpolate_bound(problem.bounds[k], phase)
        entries.append(
            MarginEntry(
                omega=omega,
                phase_deg=phase,
                gain_db=gain,
                bound_db=bound,
                slack_db=gain - bound,
            )
        )
    return tuple(entries)


@dataclass(frozen=True)
class SweepScreen:
    """Whole-curve stability veto applied between candidate and answer.

    The phase-pair search constrains the loop only at the design
    frequencies, so it happily proposes gain rays whose response dives into
    the stability contour *between* or *beyond* those frequencies (nearly
    proportional-integral rays with enormous kp are the classic case: they
    meet every per-frequency bound yet cut straight through the contour
    around the high-frequency cap).  The screen evaluates each candidate's
    nominal loop on a dense frequency grid and vetoes any that enters the
    contour interior by more than the shared tolerance; the search then
    settles on the smallest-kd candidate that survives.

    ``omegas`` and ``nominal_responses`` are the dense grid and the plant's
    nominal response on it — precomputed by the caller, which is the party
    holding the plant.
    """

    contour: UContour
    omegas: Tuple[float, ...]
    nominal_responses: Tuple[complex, ...]
    tolerance_db: float = INTERPOLATION_TOLERANCE_DB

    def __post_init__(self):
        if len(self.omegas) != len(self.nominal_responses):
            raise ValueError("omegas and nominal_responses must pair up")
        if any(w <= 0.0 for w in self.omegas):
            raise ValueError("screen frequencies must be positive")

    def admits(self, gains: PidGains) -> bool:
        """True when the candidate's nominal loop stays out of the contour."""
        for omega, response in zip(self.omegas, self.nominal_responses):
            loop = response * pid_frequency_response(gains, omega)
            if loop == 0:
                continue
            phase = wrap_phase(math.degrees(cmath.phase(loop)))
            if self.contour.inside(phase, db(abs(loop)), tol_db=self.tolerance_db):
                return False
        return True


@dataclass(frozen=True)
class DesignResult:
    """Outcome of a loop-shaping search."""

    feasible: bool
    gains: Optional[PidGains]
    chosen_phases: Tuple[float, ...]
    active_frequency: Optional[float]
    beta_db: Optional[float]
    direction: Optional[KernelDirection]
    kd_grid: np.ndarray
    window_phases_i: Tuple[float, ...]
    window_phases_j: Tuple[float, ...]
    margin_report: Tuple[MarginEntry, ...]
    reason: str = ""
    screen_rejections: int = 0


def _all_unconstrained(problem: DesignProblem) -> bool:
    return all(
        entry == NO_CONSTRAINT for curve in problem.bounds for entry in curve.min_gain_db
    )


def design_pid(
    problem: DesignProblem,
    screen: Optional[SweepScreen] = None,
    exact_bound=None,
) -> DesignResult:
    """Grid search over phase pairs for the least derivative gain.

    Fills an (m, n) grid of candidate kd values (inf where the direction is
    sign-mixed or unscalable) and returns the argmin; ties resolve to the
    lexicographically first cell.  An all-inf grid comes back infeasible
    instead of raising so the caller can report and exit cleanly.

    With a ``screen``, candidates are visited in ascending (kd, i, j) order
    and the first one whose dense nominal sweep stays out of the stability
    contour wins; the grid itself is unchanged (it documents the raw
    search), and the number of vetoed lower-kd candidates is reported in
    ``screen_rejections``.  ``exact_bound`` is forwarded to the scaling step
    (see :func:`beta_scaling`).
    """
    k_idx, l_idx = problem.pair_indices
    omega_i = problem.frequencies[k_idx]
    omega_j = problem.frequencies[l_idx]
    phase_i = problem.nominal_phase_deg(k_idx)
    phase_j = problem.nominal_phase_deg(l_idx)
    window_i = phase_window(phase_i, problem.phase_grid)
    window_j = phase_window(phase_j, problem.phase_grid)

    kd_grid = np.full((len(window_i), len(window_j)), np.inf)
    if _all_unconstrained(problem):
        return DesignResult(
            feasible=False,
            gains=None,
            chosen_phases=(),
            active_frequency=None,
            beta_db=None,
            direction=None,
            kd_grid=kd_grid,
            window_phases_i=window_i,
            window_phases_j=window_j,
            margin_report=(),
            reason="no binding constraint",
        )

    candidates = []  # (kd, i, j, gains, beta, active, direction)
    for i, phi_i in enumerate(window_i):
        psi_i = phi_i - phase_i
        for j, phi_j in enumerate(window_j):
            psi_j = phi_j - phase_j
            direction = kernel_direction(psi_i, psi_j, omega_i, omega_j)
            v = direction.as_array()
            if np.any(v > 0.0) and np.any(v < 0.0):
                continue
            beta, active = beta_scaling(direction, problem, exact_bound=exact_bound)
            if beta == INFEASIBLE:
                continue
            gains = candidate_from_kernel(direction, beta)
            if gains is None:
                continue
            kd_grid[i, j] = gains.kd
            candidates.append((gains.kd, i, j, gains, beta, active, direction))

    candidates.sort(key=lambda c: (c[0], c[1], c[2]))
    vetoed = 0
    chosen = None
    for cand in candidates:
        if screen is not None and not screen.admits(cand[3]):
            vetoed += 1
            continue
        chosen = cand
        break

    if chosen is None:
        reason = (
            "every phase pair is sign-mixed or blocked by an infeasible bound"
            if not candidates
            else "every feasible candidate crosses the stability contour between design frequencies"
        )
        return DesignResult(
            feasible=False,
            gains=None,
            chosen_phases=(),
            active_frequency=None,
            beta_db=None,
            direction=None,
            kd_grid=kd_grid,
            window_phases_i=window_i,
            window_phases_j=window_j,
            margin_report=(),
            reason=reason,
            screen_rejections=vetoed,
        )

    _, i_star, j_star, gains, beta, active, direction = chosen
    return DesignResult(
        feasible=True,
        gains=gains,
        chosen_phases=(window_i[i_star], window_j[j_star]),
        active_frequency=problem.frequencies[active] if active is not None else None,
        beta_db=beta,
        direction=direction,
        kd_grid=kd_grid,
        window_phases_i=window_i,
        window_phases_j=window_j,
        margin_report=loop_margins(problem, gains),
        screen_rejections=vetoed,
    )


def design_pi_pd(
    problem: DesignProblem,
    kind: str,
    anchor_frequency_index: int = 0,
    screen: Optional[SweepScreen] = None,
    exact_bound=None,
) -> DesignResult:
    """One-parameter specialisations: PI (kd = 0) or PD (ki = 0).

    A single anchor frequency fixes the controller phase; PI candidates use
    the lagging half of the window (psi in (-90, 0]), PD the leading half
    (psi in [0, 90)).  PI minimises kp — its derivative gain is identically
    zero — while PD minimises kd.  The 1-D candidate grid is returned in
    ``kd_grid`` with one row, holding the objective values.  Ties resolve to
    the smallest phase index.  A ``screen`` works as in :func:`design_pid`:
    ascending-objective candidates are vetoed until one's dense sweep clears
    the stability contour.
    """
    if kind not in ("pi", "pd"):
        raise ValueError("kind must be 'pi' or 'pd'")
    omega_a = problem.frequencies[anchor_frequency_index]
    phase_a = problem.nominal_phase_deg(anchor_frequency_index)
    window = phase_window(phase_a, problem.phase_grid)
    if kind == "pi":
        window = tuple(p for p in window if -90.0 < p - phase_a <= 0.0)
    else:
        window = tuple(p for p in window if 0.0 <= p - phase_a < 90.0)
    if not window:
        raise EmptyWindow(f"no grid phase in the {kind.upper()} half-window")

    objective_grid = np.full((1, len(window)), np.inf)
    if _all_unconstrained(problem):
        return DesignResult(
            feasible=False,
            gains=None,
            chosen_phases=(),
            active_frequency=None,
            beta_db=None,
            direction=None,
            kd_grid=objective_grid,
            window_phases_i=(),
            window_phases_j=window,
            margin_report=(),
            reason="no binding constraint",
        )

    candidates = []  # (objective, j, gains, beta, active, direction)
    for j, phi in enumerate(window):
        psi = phi - phase_a
        t = math.tan(math.radians(psi))
        if kind == "pi":
            raw = np.array([0.0, -omega_a * t, 1.0])
        else:
            raw = np.array([t / omega_a, 0.0, 1.0])
        raw = raw / np.linalg.norm(raw)
        direction = KernelDirection(
            v21=float(raw[0]),
            v22=float(raw[1]),
            v23=float(raw[2]),
            psi_i=float(psi),
            psi_j=float(psi),
            omega_i=float(omega_a),
            omega_j=float(omega_a),
        )
        beta, active = beta_scaling(direction, problem, exact_bound=exact_bound)
        if beta == INFEASIBLE:
            continue
        gains = candidate_from_kernel(direction, beta)
        if gains is None:
            continue
        objective = gains.kp if kind == "pi" else gains.kd
        objective_grid[0, j] = objective
        candidates.append((objective, j, gains, beta, active, direction))

    candidates.sort(key=lambda c: (c[0], c[1]))
    vetoed = 0
    chosen = None
    for cand in candidates:
        if screen is not None and not screen.admits(cand[2]):
            vetoed += 1
            continue
        chosen = cand
        break

    if chosen is None:
        reason = (
            f"no feasible {kind.upper()} phase in the half-window"
            if not candidates
            else "every feasible candidate crosses the stability contour between design frequencies"
        )
        return DesignResult(
            feasible=False,
            gains=None,
            chosen_phases=(),
            active_frequency=None,
            beta_db=None,
            direction=None,
            kd_grid=objective_grid,
            window_phases_i=(),
            window_phases_j=window,
            margin_report=(),
            reason=reason,
            screen_rejections=vetoed,
        )

    _, j_star, gains, beta, active, direction = chosen
    return DesignResult(
        feasible=True,
        gains=gains,
        chosen_phases=(window[j_star],),
        active_frequency=problem.frequencies[active] if active is not None else None,
        beta_db=beta,
        direction=direction,
        kd_grid=objective_grid,
        window_phases_i=(),
        window_phases_j=window,
        margin_report=loop_margins(problem, gains),
        screen_rejections=vetoed,
    )


@dataclass(frozen=True)
class GainMap:
    """Bijection between ideal-form gains and the regrouped gains obtained
    after pushing a first-order derivative filter into the plant."""

    tau: float

    def forward(self, gains: PidGains) -> PidGains:
        return PidGains(
            kp=gains.kp + gains.ki * self.tau,
            ki=gains.ki,
            kd=gains.kd + gains.kp * self.tau,
        )

    def inverse(self, primed: PidGains) -> PidGains:
        kp = primed.kp - primed.ki * self.tau
        ki = primed.ki
        kd = primed.kd - kp * self.tau
        if kp < 0.0 or kd < 0.0:
            raise NegativeMappedGain(
                f"regrouped gains map back to kp={kp}, kd={kd}; physical gains must stay non-negative"
            )
        return PidGains(kp=kp, ki=ki, kd=kd)


def filtered_derivative_transform(plant: UncertainPlant, tau: float):
    """Absorb a derivative filter 1/(1 + tau s) into the plant.

    Returns the augmented plant (denominator multiplied by 1 + tau s) and the
    gain bijection between the two controller forms, so the standard search
    runs unchanged on the augmented problem and its result maps back to an
    implementable filtered PID.
    """
    if tau <= 0.0:
        raise ValueError("tau must be positive")
    old = list(plant.den)
    # multiply the denominator polynomial by (tau s + 1), coefficients descending
    new_den = [scale_expression(old[0], tau)]
    for k in range(1, len(old)):
        new_den.append(add_expressions(scale_expression(old[k], tau), old[k - 1]))
    new_den.append(old[-1])
    modified = UncertainPlant(
        num=plant.num,
        den=tuple(new_den),
        params=plant.params,
        nominal=dict(plant.nominal),
    )
    return modified, GainMap(tau=float(tau))
