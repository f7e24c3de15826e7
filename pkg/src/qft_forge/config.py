"""Run-configuration loading, validation, and round-trip serialization.

A run is described by a single JSON file: the uncertain plant (coefficient
expressions over declared parameters), the design frequencies, the two
tracking models, optional per-frequency sensitivity caps, the stability
margin, the phase-grid density, design options, an optional prefilter, and
an optional brute-force oracle box.  Validation failures name the offending
field by its JSON path so a config typo is a one-line fix.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

from .bounds import DisturbanceSpec, TrackingSpec
from .errors import ConfigError, InvalidM, QftError
from .expr import parse_coefficient_expr
from .lti import RationalTransferFunction
from .plant import ParameterSpec, UncertainPlant
from .verify import GainAxis, OracleBox

__all__ = [
    "DesignOptions",
    "DesignConfig",
    "load_config",
    "parse_config_dict",
    "config_to_dict",
]

_KINDS = ("pid", "pi", "pd")


@dataclass(frozen=True)
class DesignOptions:
    """Controller-search options.

    ``pair`` selects the two anchor frequencies by 1-based position in the
    frequency list (matching the subscript convention used everywhere else
    in this package's reports); ``None`` means the default rule: the second
    frequency and the second-from-last-but-one, i.e. positions (2, N-2).
    """

    kind: str = "pid"
    tau: Optional[float] = None
    pair: Optional[Tuple[int, int]] = None
    use_hull: bool = True
    exact_bound_recompute: bool = False

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConfigError(f"design.kind: must be one of {_KINDS}, got {self.kind!r}")
        if self.tau is not None and not self.tau > 0.0:
            raise ConfigError(f"design.tau: must be positive, got {self.tau}")

    def pair_indices(self, n_frequencies: int) -> Tuple[int, int]:
        """Resolve to 0-based indices against a frequency list of length n."""
        if self.pair is None:
            if n_frequencies < 2:
                raise ConfigError("frequencies: need at least two for a phase-pair design")
            k, l = 2, max(n_frequencies - 2, 1)
            if k == l:
                l = n_frequencies
        else:
            k, l = self.pair
        for label, idx in (("design.pair[0]", k), ("design.pair[1]", l)):
            if not 1 <= idx <= n_frequencies:
                raise ConfigError(
                    f"{label}: position {idx} outside 1..{n_frequencies}"
                )
        if k == l:
            raise ConfigError("design.pair: the two positions must differ")
        return (k - 1, l - 1)


@dataclass(frozen=True)
class DesignConfig:
    """Everything one run needs, fully validated."""

    plant: UncertainPlant
    frequencies: Tuple[float, ...]
    tracking: TrackingSpec
    disturbance: Optional[DisturbanceSpec]
    m_value: float
    delta_hf_override: Optional[float]
    phase_grid_count: int
    design: DesignOptions
    prefilter: Optional[RationalTransferFunction]
    oracle: Optional[OracleBox]

    def pair_indices(self) -> Tuple[int, int]:
        return self.design.pair_indices(len(self.frequencies))


def _expect(obj: Mapping, key: str, path: str) -> Any:
    if key not in obj:
        raise ConfigError(f"{path}.{key}: required field is missing")
    return obj[key]


def _as_number(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {type(value).__name__}")
    return float(value)


def _as_positive_int(value: Any, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path}: expected an integer, got {type(value).__name__}")
    if value <= 0:
        raise ConfigError(f"{path}: must be positive, got {value}")
    return value


def _as_list(value: Any, path: str) -> List[Any]:
    if not isinstance(value, list):
        raise ConfigError(f"{path}: expected a list, got {type(value).__name__}")
    return value


def _as_object(value: Any, path: str) -> Mapping[str, Any]:
    if not isinstance(value, dict):
        raise ConfigError(f"{path}: expected an object, got {type(value).__name__}")
    return value


def _parse_tf(obj: Any, path: str) -> RationalTransferFunction:
    mapping = _as_object(obj, path)
    num = [_as_number(c, f"{path}.num[{i}]") for i, c in enumerate(_as_list(_expect(mapping, "num", path), f"{path}.num"))]
    den = [_as_number(c, f"{path}.den[{i}]") for i, c in enumerate(_as_list(_expect(mapping, "den", path), f"{path}.den"))]
    try:
        return RationalTransferFunction(num, den)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _parse_plant(obj: Any, path: str) -> UncertainPlant:
    mapping = _as_object(obj, path)
    raw_params = _as_list(_expect(mapping, "parameters", path), f"{path}.parameters")
    params: List[ParameterSpec] = []
    for i, entry in enumerate(raw_params):
        p_path = f"{path}.parameters[{i}]"
        entry = _as_object(entry, p_path)
        name = _expect(entry, "name", p_path)
        if not isinstance(name, str) or not name:
            raise ConfigError(f"{p_path}.name: expected a non-empty string")
        try:
            params.append(
                ParameterSpec(
                    name=name,
                    minimum=_as_number(_expect(entry, "min", p_path), f"{p_path}.min"),
                    maximum=_as_number(_expect(entry, "max", p_path), f"{p_path}.max"),
                    grid_points=_as_positive_int(entry.get("grid", 10), f"{p_path}.grid"),
                )
            )
        except ValueError as exc:
            raise ConfigError(f"{p_path}: {exc}") from exc
    names = [p.name for p in params]
    if len(set(names)) != len(names):
        raise ConfigError(f"{path}.parameters: duplicate parameter name")

    def coeffs(key: str) -> Tuple:
        texts = _as_list(_expect(mapping, key, path), f"{path}.{key}")
        out = []
        for i, text in enumerate(texts):
            c_path = f"{path}.{key}[{i}]"
            if isinstance(text, (int, float)) and not isinstance(text, bool):
                text = repr(float(text))
            if not isinstance(text, str):
                raise ConfigError(f"{c_path}: expected an expression string or number")
            try:
                out.append(parse_coefficient_expr(text, names))
            except QftError as exc:
                raise ConfigError(f"{c_path}: {exc}") from exc
        return tuple(out)

    nominal_obj = _as_object(_expect(mapping, "nominal", path), f"{path}.nominal")
    nominal = {
        key: _as_number(value, f"{path}.nominal.{key}") for key, value in nominal_obj.items()
    }
    missing = set(names) - set(nominal)
    if missing:
        raise ConfigError(f"{path}.nominal: missing value for {sorted(missing)}")
    try:
        return UncertainPlant(
            num=coeffs("numerator"),
            den=coeffs("denominator"),
            params=tuple(params),
            nominal=nominal,
        )
    except (ValueError, QftError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _parse_axis(obj: Any, path: str) -> GainAxis:
    triple = _as_list(obj, path)
    if len(triple) != 3:
        raise ConfigError(f"{path}: expected [lo, hi, step]")
    lo, hi, step = (_as_number(v, f"{path}[{i}]") for i, v in enumerate(triple))
    try:
        return GainAxis(lo, hi, step)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def parse_config_dict(raw: Mapping[str, Any]) -> DesignConfig:
    """Validate a parsed JSON object into a DesignConfig."""
    root = _as_object(raw, "config")

    plant = _parse_plant(_expect(root, "plant", "config"), "config.plant")

    freq_list = _as_list(_expect(root, "frequencies", "config"), "config.frequencies")
    if len(freq_list) < 1:
        raise ConfigError("config.frequencies: must not be empty")
    frequencies: List[float] = []
    for i, value in enumerate(freq_list):
        omega = _as_number(value, f"config.frequencies[{i}]")
        if omega <= 0.0:
            raise ConfigError(f"config.frequencies[{i}]: must be positive, got {omega:g}")
        if frequencies and omega <= frequencies[-1]:
            raise ConfigError(
                f"config.frequencies[{i}]: must exceed frequencies[{i - 1}] "
                f"({omega:g} vs {frequencies[-1]:g})"
            )
        frequencies.append(omega)

    tracking_obj = _as_object(_expect(root, "tracking", "config"), "config.tracking")
    try:
        tracking = TrackingSpec(
            lower=_parse_tf(_expect(tracking_obj, "lower", "config.tracking"), "config.tracking.lower"),
            upper=_parse_tf(_expect(tracking_obj, "upper", "config.tracking"), "config.tracking.upper"),
        )
    except (ValueError, QftError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"config.tracking: {exc}") from exc

    disturbance = None
    if root.get("disturbance") is not None:
        entries = _as_list(root["disturbance"], "config.disturbance")
        caps: Dict[float, float] = {}
        for i, entry in enumerate(entries):
            d_path = f"config.disturbance[{i}]"
            entry = _as_object(entry, d_path)
            omega = _as_number(_expect(entry, "omega", d_path), f"{d_path}.omega")
            cap = _as_number(_expect(entry, "cap", d_path), f"{d_path}.cap")
            if omega not in frequencies:
                raise ConfigError(f"{d_path}.omega: {omega:g} is not a design frequency")
            if not cap > 0.0:
                raise ConfigError(f"{d_path}.cap: must be positive, got {cap:g}")
            caps[omega] = cap
        disturbance = DisturbanceSpec(caps=caps)

    stability = _as_object(_expect(root, "stability", "config"), "config.stability")
    m_value = _as_number(_expect(stability, "m", "config.stability"), "config.stability.m")
    if not m_value > 1.0:
        raise InvalidM(f"config.stability.m: must exceed 1, got {m_value:g}")
    delta_hf_override = None
    if stability.get("delta_hf_db") is not None:
        delta_hf_override = _as_number(stability["delta_hf_db"], "config.stability.delta_hf_db")
        if delta_hf_override < 0.0:
            raise ConfigError("config.stability.delta_hf_db: must be non-negative")

    phase_grid_count = _as_positive_int(
        _expect(root, "phase_grid_count", "config"), "config.phase_grid_count"
    )
    if phase_grid_count < 10:
        raise ConfigError(
            f"config.phase_grid_count: must be at least 10, got {phase_grid_count}"
        )

    design = DesignOptions()
    if root.get("design") is not None:
        d = _as_object(root["design"], "config.design")
        pair = None
        if d.get("pair") is not None:
            pair_list = _as_list(d["pair"], "config.design.pair")
            if len(pair_list) != 2:
                raise ConfigError("config.design.pair: expected two 1-based positions")
            pair = (
                _as_positive_int(pair_list[0], "config.design.pair[0]"),
                _as_positive_int(pair_list[1], "config.design.pair[1]"),
            )
        tau = None
        if d.get("tau") is not None:
            tau = _as_number(d["tau"], "config.design.tau")
        kind = d.get("kind", "pid")
        if not isinstance(kind, str):
            raise ConfigError("config.design.kind: expected a string")
        use_hull = d.get("use_hull", True)
        exact = d.get("exact_bound_recompute", False)
        for flag_name, flag in (("use_hull", use_hull), ("exact_bound_recompute", exact)):
            if not isinstance(flag, bool):
                raise ConfigError(f"config.design.{flag_name}: expected true/false")
        design = DesignOptions(
            kind=kind.lower(),
            tau=tau,
            pair=pair,
            use_hull=use_hull,
            exact_bound_recompute=exact,
        )
    # Resolve the pair eagerly so bad overrides fail at load time.
    design.pair_indices(len(frequencies))

    prefilter = None
    if root.get("prefilter") is not None:
        prefilter = _parse_tf(root["prefilter"], "config.prefilter")

    oracle = None
    if root.get("oracle") is not None:
        o = _as_object(root["oracle"], "config.oracle")
        oracle = OracleBox(
            kp=_parse_axis(_expect(o, "kp", "config.oracle"), "config.oracle.kp"),
            ki=_parse_axis(_expect(o, "ki", "config.oracle"), "config.oracle.ki"),
            kd=_parse_axis(_expect(o, "kd", "config.oracle"), "config.oracle.kd"),
        )

    return DesignConfig(
        plant=plant,
        frequencies=tuple(frequencies),
        tracking=tracking,
        disturbance=disturbance,
        m_value=m_value,
        delta_hf_override=delta_hf_override,
        phase_grid_count=phase_grid_count,
        design=design,
        prefilter=prefilter,
        oracle=oracle,
    )


def load_config(path: str) -> DesignConfig:
    """Read and validate a JSON run configuration."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            raw = json.load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config_dict(raw)


def config_to_dict(config: DesignConfig) -> Dict[str, Any]:
    """Serialize back into the JSON structure load_config accepts.

    parse_config_dict(config_to_dict(c)) reproduces an equivalent config,
    which is what the round-trip check in the test suite asserts.
    """
    out: Dict[str, Any] = {
        "plant": {
            "numerator": [c.source for c in config.plant.num],
            "denominator": [c.source for c in config.plant.den],
            "parameters": [
                {"name": p.name, "min": p.minimum, "max": p.maximum, "grid": p.grid_points}
                for p in config.plant.params
            ],
            "nominal": dict(sorted(config.plant.nominal.items())),
        },
        "frequencies": list(config.frequencies),
        "tracking": {
            "lower": {"num": list(config.tracking.lower.num), "den": list(config.tracking.lower.den)},
            "upper": {"num": list(config.tracking.upper.num), "den": list(config.tracking.upper.den)},
        },
        "stability": {"m": config.m_value},
        "phase_grid_count": config.phase_grid_count,
        "design": {
            "kind": config.design.kind,
            "use_hull": config.design.use_hull,
            "exact_bound_recompute": config.design.exact_bound_recompute,
        },
    }
    if config.delta_hf_override is not None:
        out["stability"]["delta_hf_db"] = config.delta_hf_override
    if config.design.tau is not None:
        out["design"]["tau"] = config.design.tau
    if config.design.pair is not None:
        out["design"]["pair"] = list(config.design.pair)
    if config.disturbance is not None:
        out["disturbance"] = [
            {"omega": omega, "cap": cap}
            for omega, cap in sorted(config.disturbance.caps.items())
        ]
    if config.prefilter is not None:
        out["prefilter"] = {
            "num": list(config.prefilter.num),
            "den": list(config.prefilter.den),
        }
    if config.oracle is not None:
        out["oracle"] = {
            name: [axis.lo, axis.hi, axis.step]
            for name, axis in (
                ("kp", config.oracle.kp),
                ("ki", config.oracle.ki),
                ("kd", config.oracle.kd),
            )
        }
    return out
