"""Parametric plant families and their frequency-response templates.

A plant is a rational function of s whose coefficients are arithmetic
expressions in box-bounded parameters.  At each design frequency the family
traces out a template: the set of responses, held as ratios to the nominal
response so the nominal member always sits at (0 deg, 0 dB).  Ratios use the
principal phase branch (-180, 180] centred on the nominal; a family whose
ratios spread wider than 180 degrees has no single-branch template and is
rejected.
"""

from __future__ import annotations

import cmath
import itertools
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import OutOfBox, TemplateTooWide, ZeroMagnitude
from .expr import CoefficientExpression
from .lti import NicholsPoint, PoleOnAxis, db, to_nichols, wrap_phase

__all__ = [
    "ParameterSpec",
    "UncertainPlant",
    "TemplatePoint",
    "Template",
    "evaluate_plant",
    "generate_template",
    "convex_hull_nichols",
    "nominal_point",
]


@dataclass(frozen=True)
class ParameterSpec:
    """One uncertain parameter: closed interval plus its sampling density."""

    name: str
    minimum: float
    maximum: float
    grid_points: int = 10

    def __post_init__(self):
        if self.minimum > self.maximum:
            raise ValueError(f"parameter '{self.name}': min {self.minimum} > max {self.maximum}")
        if self.grid_points < 1:
            raise ValueError(f"parameter '{self.name}': grid_points must be >= 1")

    def grid(self, override: Optional[int] = None) -> np.ndarray:
        count = override if override is not None else self.grid_points
        if count == 1 or self.minimum == self.maximum:
            return np.array([self.minimum])
        return np.linspace(self.minimum, self.maximum, count)


@dataclass(frozen=True)
class UncertainPlant:
    """Rational plant with expression-valued coefficients over a parameter box."""

    num: Tuple[CoefficientExpression, ...]
    den: Tuple[CoefficientExpression, ...]
    params: Tuple[ParameterSpec, ...]
    nominal: Dict[str, float]

    def __post_init__(self):
        object.__setattr__(self, "num", tuple(self.num))
        object.__setattr__(self, "den", tuple(self.den))
        object.__setattr__(self, "params", tuple(self.params))
        declared = {p.name for p in self.params}
        used = set()
        for coeff in (*self.num, *self.den):
            used |= coeff.names()
        stray = used - declared
        if stray:
            raise ValueError(f"expressions reference undeclared parameters: {sorted(stray)}")
        for spec in self.params:
            if spec.name not in self.nominal:
                raise ValueError(f"nominal value missing for parameter '{spec.name}'")
        self._check_in_box(self.nominal)

    def _check_in_box(self, point: Dict[str, float]):
        for spec in self.params:
            value = point[spec.name]
            if not (spec.minimum <= value <= spec.maximum):
                raise OutOfBox(
                    f"parameter '{spec.name}' = {value} outside [{spec.minimum}, {spec.maximum}]"
                )

    def coefficients_at(self, point: Dict[str, float]) -> Tuple[List[float], List[float]]:
        num = [c.evaluate(point) for c in self.num]
        den = [c.evaluate(point) for c in self.den]
        return num, den


def evaluate_plant(plant: UncertainPlant, point: Dict[str, float], s: complex) -> complex:
    """Frequency response of one family member.  OutOfBox for stray points."""
    for spec in plant.params:
        if spec.name not in point:
            raise OutOfBox(f"parameter '{spec.name}' missing from evaluation point")
    plant._check_in_box(point)
    num, den = plant.coefficients_at(point)
    den_val = complex(np.polyval(den, s))
    if den_val == 0:
        raise PoleOnAxis(f"plant denominator vanishes at s = {s} for {point}")
    return complex(np.polyval(num, s)) / den_val


@dataclass(frozen=True)
class TemplatePoint:
    """One sampled family member at a fixed frequency, as a ratio to nominal."""

    params: Tuple[float, ...]
    ratio: complex
    phase_deg: float  # relative to nominal, principal branch (-180, 180]
    gain_db: float


@dataclass(frozen=True)
class Template:
    """All sampled responses of the family at one frequency."""

    omega: float
    param_names: Tuple[str, ...]
    points: Tuple[TemplatePoint, ...]
    hull: Tuple[Tuple[float, float], ...]  # CCW (phase_deg, gain_db) vertices
    hull_indices: Tuple[int, ...]

    def ratio_array(self, use_hull: bool = True) -> np.ndarray:
        if use_hull and len(self.hull_indices) >= 1:
            return np.array([self.points[i].ratio for i in self.hull_indices])
        return np.array([p.ratio for p in self.points])

    def gain_span_db(self) -> float:
        gains = [self.hull[i][1] for i in range(len(self.hull))]
        return max(gains) - min(gains)


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull_nichols(points: Sequence[Tuple[float, float]]) -> List[Tuple[float, float]]:
    """Convex hull of planar (phase_deg, gain_db) points, monotone-chain style.

    Returns vertices in counter-clockwise order starting from the
    lexicographically smallest point.  Collinear interior points are dropped,
    so no three consecutive vertices are collinear; degenerate inputs (one
    point, or an entirely collinear set) come back as the minimal vertex list.
    """
    unique = sorted(set((float(x), float(y)) for x, y in points))
    if len(unique) <= 2:
        return unique
    lower: List[Tuple[float, float]] = []
    for p in unique:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: List[Tuple[float, float]] = []
    for p in reversed(unique):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 2:  # fully collinear input collapses to its extremes
        return [unique[0], unique[-1]]
    return hull


def nominal_point(plant: UncertainPlant, omega: float) -> NicholsPoint:
    """Nominal response at j*omega in absolute Nichols coordinates."""
    return to_nichols(evaluate_plant(plant, plant.nominal, 1j * omega))


def generate_template(
    plant: UncertainPlant,
    omega: float,
    grid_override: Optional[int] = None,
) -> Template:
    """Sample the family over its parameter grid at one frequency.

    The nominal member is always included (appended when the grid misses it),
    ratios are formed against it, and the convex hull is taken in relative
    Nichols coordinates.
    """
    nominal_response = evaluate_plant(plant, plant.nominal, 1j * omega)
    names = tuple(spec.name for spec in plant.params)
    axes = [spec.grid(grid_override) for spec in plant.params]
    combos = [tuple(float(v) for v in combo) for combo in itertools.product(*axes)]
    nominal_combo = tuple(float(plant.nominal[name]) for name in names)
    if nominal_combo not in combos:
        combos.append(nominal_combo)

    points: List[TemplatePoint] = []
    for combo in combos:
        env = dict(zip(names, combo))
        response = evaluate_plant(plant, env, 1j * omega)
        ratio = response / nominal_response
        magnitude = abs(ratio)
        if magnitude == 0.0:
            raise ZeroMagnitude(f"family member at {env} has zero response at omega={omega}")
        points.append(
            TemplatePoint(
                params=combo,
                ratio=ratio,
                phase_deg=math.degrees(cmath.phase(ratio)),
                gain_db=db(magnitude),
            )
        )

    phases = [p.phase_deg for p in points]
    span = max(phases) - min(phases)
    if span > 180.0 + 1e-9:
        raise TemplateTooWide(
            f"template at omega={omega} spans {span:.2f} deg of phase (> 180)"
        )

    coords = [(p.phase_deg, p.gain_db) for p in points]
    hull = convex_hull_nichols(coords)
    # map hull vertices back onto sample indices (first match wins)
    index_of = {}
    for i, c in enumerate(coords):
        index_of.setdefault(c, i)
    hull_indices = tuple(index_of[v] for v in hull)
    return Template(
        omega=float(omega),
        param_names=names,
        points=tuple(points),
        hull=tuple(hull),
        hull_indices=hull_indices,
    )
