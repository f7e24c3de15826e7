"""Nichols-plane bound computation.

For each design frequency the plant template is swept along a vertical line of
candidate nominal gains at every grid phase.  The least gain that keeps the
closed-loop magnitude spread within the tracking allowance (or the sensitivity
under its cap) is located by an upward 5 dB scan from a -100 dB floor followed
by bisection of the first feasible bracket.  Two sentinels extend the real
line:

* ``NO_CONSTRAINT`` (-inf): already feasible at the scan floor;
* ``INFEASIBLE``    (+inf): still infeasible at the +100 dB ceiling.

Encoding them as infinities makes ``max`` implement the combination rules for
stacking bound families directly.
"""

from __future__ import annotations

import bisect as _bisect
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np

from .errors import (
    BoundBelowUContour,
    CriticalPoint,
    DegenerateSpread,
    GridMismatch,
)
from .lti import (
    MCircleSection,
    RationalTransferFunction,
    db,
    eval_tf,
    m_circle_gains,
    undb,
)
from .plant import Template

__all__ = [
    "NO_CONSTRAINT",
    "INFEASIBLE",
    "SCAN_FLOOR_DB",
    "SCAN_CEILING_DB",
    "SCAN_STEP_DB",
    "DEFAULT_TOL_DB",
    "TrackingSpec",
    "DisturbanceSpec",
    "BoundCurve",
    "UContour",
    "make_phase_grid",
    "delta_spread",
    "horowitz_gain",
    "horowitz_bound",
    "disturbance_gain",
    "disturbance_bound",
    "performance_bound",
    "u_contour",
    "combine_with_ucontour",
    "interpolate_bound",
    "interpolate_bound_array",
]

NO_CONSTRAINT = float("-inf")
INFEASIBLE = float("inf")

SCAN_FLOOR_DB = -100.0
SCAN_CEILING_DB = 100.0
SCAN_STEP_DB = 5.0
DEFAULT_TOL_DB = 0.01

_MIN_SPREAD_DB = 0.05


def _assert_stable_strictly_proper(tf: RationalTransferFunction, label: str):
    num = np.trim_zeros(np.asarray(tf.num, dtype=float), "f")
    den = np.trim_zeros(np.asarray(tf.den, dtype=float), "f")
    if len(num) >= len(den):
        raise ValueError(f"{label} model must be strictly proper")
    roots = np.roots(den)
    if len(roots) and np.max(roots.real) >= 0.0:
        raise ValueError(f"{label} model must have all poles in the open left half-plane")


@dataclass(frozen=True)
class TrackingSpec:
    """Pair of reference models bracketing the acceptable closed-loop band."""

    lower: RationalTransferFunction
    upper: RationalTransferFunction

    def __post_init__(self):
        _assert_stable_strictly_proper(self.lower, "lower tracking")
        _assert_stable_strictly_proper(self.upper, "upper tracking")


@dataclass(frozen=True)
class DisturbanceSpec:
    """Sensitivity magnitude caps keyed by frequency."""

    caps: Dict[float, float]

    def __post_init__(self):
        for omega, cap in self.caps.items():
            if not (cap > 0.0):
                raise ValueError(f"sensitivity cap at omega={omega} must be positive")


@dataclass(frozen=True)
class BoundCurve:
    """Least admissible nominal gain versus phase, for one frequency."""

    omega: float
    phase_grid: Tuple[float, ...]
    min_gain_db: Tuple[float, ...]

    def __post_init__(self):
        grid = tuple(float(p) for p in self.phase_grid)
        object.__setattr__(self, "phase_grid", grid)
        object.__setattr__(self, "min_gain_db", tuple(float(v) for v in self.min_gain_db))
        if len(grid) != len(self.min_gain_db):
            raise ValueError("phase grid and entries differ in length")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("phase grid must be strictly increasing")
        for v in self.min_gain_db:
            if math.isnan(v):
                raise ValueError("bound entries must be real or a sentinel infinity")


def make_phase_grid(count: int) -> Tuple[float, ...]:
    """``count`` equally spaced phases strictly inside (-360, 0).

    The points are the midpoints of a uniform ``count``-cell partition of the
    interval, so the spacing is exactly ``360 / count`` and both endpoints
    stay clear of the grid (``count=360`` gives the 1-degree grid
    -359.5, -358.5, ..., -0.5).  Midpoint placement also keeps the grid off
    the -180-degree axis for even counts, where loop phases pinned exactly to
    the axis can collapse a two-frequency phase pair into a degenerate
    one-parameter ray.
    """
    if count < 2:
        raise ValueError("phase grid needs at least two points")
    step = 360.0 / count
    return tuple(-360.0 + step * (k - 0.5) for k in range(1, count + 1))


def delta_spread(spec: TrackingSpec, omega: float) -> float:
    """Allowed dB spread between the two reference models at one frequency.

    Taken as max - min of the two model gains, so the result stays positive
    even on bands where the models swap order.
    """
    lower_db = db(abs(eval_tf(spec.lower, 1j * omega)))
    upper_db = db(abs(eval_tf(spec.upper, 1j * omega)))
    spread = max(lower_db, upper_db) - min(lower_db, upper_db)
    if spread < _MIN_SPREAD_DB:
        raise DegenerateSpread(
            f"model spread {spread:.4f} dB at omega={omega} is below {_MIN_SPREAD_DB} dB"
        )
    return spread


# --- scan + bisection machinery -------------------------------------------

def _closed_loop_spread_db(ratios: np.ndarray, gain_db: float, phase_rad: float) -> float:
    loop = undb(gain_db) * complex(math.cos(phase_rad), math.sin(phase_rad)) * ratios
    denom = 1.0 + loop
    if np.any(denom == 0):
        raise CriticalPoint("template member landed exactly on -1")
    mags = np.abs(loop / denom)
    vals = 20.0 * np.log10(mags)
    return float(vals.max() - vals.min())


def _worst_sensitivity(ratios: np.ndarray, gain_db: float, phase_rad: float) -> float:
    loop = undb(gain_db) * complex(math.cos(phase_rad), math.sin(phase_rad)) * ratios
    denom = 1.0 + loop
    if np.any(denom == 0):
        raise CriticalPoint("template member landed exactly on -1")
    return float(np.max(np.abs(1.0 / denom)))


def _least_feasible_gain(feasible: Callable[[float], bool], tol_db: float) -> float:
    """Upward scan then bisection for the smallest gain passing ``feasible``."""

    def probe(c: float) -> bool:
        try:
            return feasible(c)
        except CriticalPoint:
            # nudge off the critical point once; a second hit is a real error
            return feasible(c + tol_db / 10.0)

    if probe(SCAN_FLOOR_DB):
        return NO_CONSTRAINT
    lo = SCAN_FLOOR_DB
    hi = None
    c = SCAN_FLOOR_DB + SCAN_STEP_DB
    while c <= SCAN_CEILING_DB + 1e-12:
        if probe(c):
            hi = c
            break
        lo = c
        c += SCAN_STEP_DB
    if hi is None:
        return INFEASIBLE
    while hi - lo > tol_db:
        mid = 0.5 * (lo + hi)
        if probe(mid):
            hi = mid
        else:
            lo = mid
    return hi


def horowitz_gain(
    template: Template,
    delta_db: float,
    phase_deg: float,
    tol_db: float = DEFAULT_TOL_DB,
    use_hull: bool = True,
) -> float:
    """Least nominal gain keeping the family's closed-loop spread <= delta_db
    when the nominal sits at ``phase_deg``."""
    ratios = template.ratio_array(use_hull)
    if len(ratios) <= 1:
        return NO_CONSTRAINT
    phase_rad = math.radians(phase_deg)
    return _least_feasible_gain(
        lambda c: _closed_loop_spread_db(ratios, c, phase_rad) <= delta_db,
        tol_db,
    )


def horowitz_bound(
    template: Template,
    delta_db: float,
    phase_grid: Sequence[float],
    tol_db: float = DEFAULT_TOL_DB,
    use_hull: bool = True,
) -> BoundCurve:
    entries = [
        horowitz_gain(template, delta_db, phi, tol_db=tol_db, use_hull=use_hull)
        for phi in phase_grid
    ]
    return BoundCurve(omega=template.omega, phase_grid=tuple(phase_grid), min_gain_db=tuple(entries))


def disturbance_gain(
    template: Template,
    cap: float,
    phase_deg: float,
    tol_db: float = DEFAULT_TOL_DB,
    use_hull: bool = True,
) -> float:
    """Least nominal gain holding |1/(1+L)| <= cap over the whole template."""
    ratios = template.ratio_array(use_hull)
    phase_rad = math.radians(phase_deg)
    return _least_feasible_gain(
        lambda c: _worst_sensitivity(ratios, c, phase_rad) <= cap,
        tol_db,
    )


def disturbance_bound(
    template: Template,
    cap: float,
    phase_grid: Sequence[float],
    tol_db: float = DEFAULT_TOL_DB,
    use_hull: bool = True,
) -> BoundCurve:
    entries = [
        disturbance_gain(template, cap, phi, tol_db=tol_db, use_hull=use_hull)
        for phi in phase_grid
    ]
    return BoundCurve(omega=template.omega, phase_grid=tuple(phase_grid), min_gain_db=tuple(entries))


def performance_bound(curves: Sequence[BoundCurve]) -> BoundCurve:
    """Pointwise max of several bound families at one frequency.

    The sentinel encoding does the bookkeeping: anything beats NO_CONSTRAINT,
    INFEASIBLE beats everything.
    """
    if not curves:
        raise ValueError("need at least one curve")
    first = curves[0]
    for other in curves[1:]:
        if other.phase_grid != first.phase_grid:
            raise GridMismatch("bound curves sampled on different phase grids")
        if other.omega != first.omega:
            raise GridMismatch(
                f"cannot merge bounds for omega={other.omega} into omega={first.omega}"
            )
    merged = [max(vals) for vals in zip(*(c.min_gain_db for c in curves))]
    return BoundCurve(omega=first.omega, phase_grid=first.phase_grid, min_gain_db=tuple(merged))


# --- high-frequency stability contour -------------------------------------

@dataclass(frozen=True)
class UContour:
    """Closed stability region: constant-M locus on top, the same locus
    dropped by the high-frequency template span underneath."""

    m_value: float
    delta_hf_db: float
    phases: Tuple[float, ...]
    upper_db: Tuple[float, ...]
    lower_db: Tuple[float, ...]
    phase_min_deg: float
    phase_max_deg: float

    def __post_init__(self):
        if self.delta_hf_db < 0.0:
            raise ValueError("delta_hf_db must be non-negative")

    def contains_phase(self, phase_deg: float) -> bool:
        return self.phase_min_deg <= phase_deg <= self.phase_max_deg

    def upper_at(self, phase_deg: float) -> float:
        pair = m_circle_gains(self.m_value, phase_deg)
        if pair is None:
            raise ValueError(f"phase {phase_deg} outside the contour span")
        return pair[0]

    def lower_at(self, phase_deg: float) -> float:
        pair = m_circle_gains(self.m_value, phase_deg)
        if pair is None:
            raise ValueError(f"phase {phase_deg} outside the contour span")
        return pair[1] - self.delta_hf_db

    def inside(self, phase_deg: float, gain_db: float, tol_db: float = 0.0) -> bool:
        """Strict interior test, used by the dense stability sweep.

        A positive ``tol_db`` shrinks the region: points within ``tol_db``
        of either edge count as outside.  This keeps points that ride a
        boundary (where the combined design bounds equal the contour top)
        from being flagged over sub-0.01 dB arithmetic noise.
        """
        if not self.contains_phase(phase_deg):
            return False
        pair = m_circle_gains(self.m_value, phase_deg)
        if pair is None:
            return False
        return pair[1] - self.delta_hf_db + tol_db < gain_db < pair[0] - tol_db


def u_contour(m_value: float, delta_hf_db: float, phase_grid: Sequence[float]) -> UContour:
    """Sample the stability contour on the grid phases it covers."""
    section = MCircleSection.for_m(m_value)
    phases: List[float] = []
    upper: List[float] = []
    lower: List[float] = []
    for phi in phase_grid:
        if not section.contains(phi):
            continue
        pair = m_circle_gains(m_value, phi)
        if pair is None:
            continue
        phases.append(float(phi))
        upper.append(pair[0])
        lower.append(pair[1] - delta_hf_db)
    return UContour(
        m_value=float(m_value),
        delta_hf_db=float(delta_hf_db),
        phases=tuple(phases),
        upper_db=tuple(upper),
        lower_db=tuple(lower),
        phase_min_deg=section.phase_min_deg,
        phase_max_deg=section.phase_max_deg,
    )


def combine_with_ucontour(curve: BoundCurve, u: UContour) -> BoundCurve:
    """Fold the stability contour's top into a performance bound.

    Aborts (BoundBelowUContour) when a finite performance entry sits below the
    contour's bottom edge: taking the max there would quietly forbid a region
    the performance spec allows, and the conflict deserves eyes on it.
    """
    merged: List[float] = []
    for phi, entry in zip(curve.phase_grid, curve.min_gain_db):
        if not u.contains_phase(phi):
            merged.append(entry)
            continue
        pair = m_circle_gains(u.m_value, phi)
        if pair is None:
            merged.append(entry)
            continue
        top = pair[0]
        bottom = pair[1] - u.delta_hf_db
        if math.isfinite(entry) and entry < bottom - 1e-9:
            raise BoundBelowUContour(
                f"performance bound {entry:.3f} dB at phase {phi:.1f} deg sits below "
                f"the stability contour bottom {bottom:.3f} dB (omega={curve.omega})"
            )
        merged.append(max(entry, top))
    return BoundCurve(omega=curve.omega, phase_grid=curve.phase_grid, min_gain_db=tuple(merged))


# --- interpolation ---------------------------------------------------------

def interpolate_bound(curve: BoundCurve, phase_deg: float) -> float:
    """Bound value at an arbitrary phase.

    Linear between finite nodes; INFEASIBLE wins over any neighbour; a
    NO_CONSTRAINT neighbour defers to the finite one (conservative); queries
    beyond the grid ends are unconstrained.
    """
    grid = curve.phase_grid
    vals = curve.min_gain_db
    if phase_deg < grid[0] or phase_deg > grid[-1]:
        return NO_CONSTRAINT
    idx = _bisect.bisect_left(grid, phase_deg)
    if idx < len(grid) and grid[idx] == phase_deg:
        return vals[idx]
    a, b = vals[idx - 1], vals[idx]
    if a == INFEASIBLE or b == INFEASIBLE:
        return INFEASIBLE
    if a == NO_CONSTRAINT and b == NO_CONSTRAINT:
        return NO_CONSTRAINT
    if a == NO_CONSTRAINT:
        return b
    if b == NO_CONSTRAINT:
        return a
    t = (phase_deg - grid[idx - 1]) / (grid[idx] - grid[idx - 1])
    return a + t * (b - a)


def interpolate_bound_array(curve: BoundCurve, phases: np.ndarray) -> np.ndarray:
    """Vectorised twin of :func:`interpolate_bound` for bulk feasibility tests."""
    grid = np.asarray(curve.phase_grid)
    vals = np.asarray(curve.min_gain_db)
    phases = np.asarray(phases, dtype=float)
    out = np.full(phases.shape, NO_CONSTRAINT)
    inside = (phases >= grid[0]) & (phases <= grid[-1])
    if not np.any(inside):
        return out
    p = phases[inside]
    idx = np.searchsorted(grid, p, side="left")
    exact = (idx < len(grid)) & (grid[np.minimum(idx, len(grid) - 1)] == p)
    idx_hi = np.clip(idx, 1, len(grid) - 1)
    a = vals[idx_hi - 1]
    b = vals[idx_hi]
    t = (p - grid[idx_hi - 1]) / (grid[idx_hi] - grid[idx_hi - 1])
    with np.errstate(invalid="ignore"):
        linear = a + t * (b - a)
    res = np.where(
        (a == INFEASIBLE) | (b == INFEASIBLE),
        INFEASIBLE,
        np.where(
            (a == NO_CONSTRAINT) & (b == NO_CONSTRAINT),
            NO_CONSTRAINT,
            np.where(a == NO_CONSTRAINT, b, np.where(b == NO_CONSTRAINT, a, linear)),
        ),
    )
    res = np.where(exact, vals[np.minimum(idx, len(grid) - 1)], res)
    out[inside] = res
    return out
