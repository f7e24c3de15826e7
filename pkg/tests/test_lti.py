"""Frequency-response primitives: dB scale, Nichols mapping, M-circles."""

from __future__ import annotations

import cmath
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qft_forge.errors import CriticalPoint, InvalidM, PoleOnAxis, ZeroMagnitude
from qft_forge.lti import (
    MCircleSection,
    NicholsPoint,
    RationalTransferFunction,
    closed_loop_gain,
    db,
    eval_tf,
    m_circle_gains,
    m_circle_phase_range,
    pole_zero_excess,
    sensitivity_gain,
    to_nichols,
    undb,
    wrap_phase,
)

# Strict tracking model bound and servo plant reused across cases.
UPPER_MODEL = RationalTransferFunction(
    [8400.0], [1.0, 87.0, 1272.0, 5860.0, 8400.0]
)
SERVO_NOMINAL = RationalTransferFunction([1.0], [1.0, 1.0, 0.0])


class TestDbScale:
    def test_fixed_points(self):
        assert db(1.0) == 0.0
        assert db(10.0) == 20.0
        assert db(100.0) == pytest.approx(40.0, abs=1e-12)
        assert undb(20.0) == pytest.approx(10.0, abs=1e-12)
        assert undb(0.0) == 1.0

    def test_round_trip(self):
        for magnitude in (1e-6, 0.25, 1.0, 3.0, 1e4):
            assert undb(db(magnitude)) == pytest.approx(magnitude, rel=1e-12)

    def test_zero_and_negative_have_no_db(self):
        with pytest.raises(ValueError):
            db(0.0)
        with pytest.raises(ValueError):
            db(-2.0)


class TestRationalTransferFunction:
    def test_coerces_to_float_tuples(self):
        tf = RationalTransferFunction([1, 2], [1, 0])
        assert tf.num == (1.0, 2.0)
        assert tf.den == (1.0, 0.0)

    def test_rejects_empty_polynomials(self):
        with pytest.raises(ValueError):
            RationalTransferFunction([], [1.0])
        with pytest.raises(ValueError):
            RationalTransferFunction([1.0], [])

    def test_rejects_zero_leading_denominator(self):
        with pytest.raises(ValueError):
            RationalTransferFunction([1.0], [0.0, 1.0])

    def test_multiply_convolves(self):
        a = RationalTransferFunction([1.0, 1.0], [1.0, 0.0])
        b = RationalTransferFunction([2.0], [1.0, 3.0])
        prod = a.multiply(b)
        assert prod.num == (2.0, 2.0)
        assert prod.den == (1.0, 3.0, 0.0)

    def test_call_matches_eval(self):
        s = 0.3 + 1.7j
        assert SERVO_NOMINAL(s) == eval_tf(SERVO_NOMINAL, s)


class TestEvalTf:
    def test_upper_model_dc_gain_is_exactly_one(self):
        assert eval_tf(UPPER_MODEL, 0j) == 1.0 + 0.0j

    def test_integrator_at_j1(self):
        integ = RationalTransferFunction([1.0], [1.0, 0.0])
        assert eval_tf(integ, 1j) == -1j

    def test_servo_nominal_at_j1(self):
        value = eval_tf(SERVO_NOMINAL, 1j)
        assert value == pytest.approx(-0.5 - 0.5j, abs=1e-15)

    def test_pole_on_axis(self):
        integ = RationalTransferFunction([1.0], [1.0, 0.0])
        with pytest.raises(PoleOnAxis):
            eval_tf(integ, 0j)

    def test_conjugate_symmetry(self):
        for s in (1j, 0.5 + 2j, -0.3 + 7j):
            fwd = eval_tf(UPPER_MODEL, s)
            rev = eval_tf(UPPER_MODEL, s.conjugate())
            assert rev == pytest.approx(fwd.conjugate(), rel=1e-12)


class TestWrapPhase:
    @pytest.mark.parametrize(
        "raw, wrapped",
        [
            (0.0, 0.0),
            (-360.0, 0.0),
            (360.0, 0.0),
            (-90.0, -90.0),
            (270.0, -90.0),
            (-450.0, -90.0),
            (45.0, -315.0),
            (-359.9, -359.9),
            (720.0, 0.0),
            # regression: tiny positive angles must not round onto -360
            (1e-300, 0.0),
            (5e-14, -360.0 + 5e-14),
        ],
    )
    def test_examples(self, raw, wrapped):
        assert wrap_phase(raw) == pytest.approx(wrapped, abs=1e-9)

    def test_never_returns_negative_zero(self):
        assert math.copysign(1.0, wrap_phase(-360.0)) == 1.0
        assert math.copysign(1.0, wrap_phase(0.0)) == 1.0

    @given(st.floats(min_value=-1e6, max_value=1e6, allow_nan=False))
    @settings(max_examples=300)
    def test_range_idempotence_and_equivalence(self, raw):
        wrapped = wrap_phase(raw)
        assert -360.0 < wrapped <= 0.0
        assert wrap_phase(wrapped) == wrapped
        diff = math.fmod(wrapped - raw, 360.0)
        assert min(abs(diff), 360.0 - abs(diff)) < 1e-6


class TestNicholsPoint:
    def test_bounds(self):
        NicholsPoint(phase_deg=0.0, gain_db=3.0)
        NicholsPoint(phase_deg=-359.999, gain_db=-100.0)
        with pytest.raises(ValueError):
            NicholsPoint(phase_deg=-360.0, gain_db=0.0)
        with pytest.raises(ValueError):
            NicholsPoint(phase_deg=0.1, gain_db=0.0)
        with pytest.raises(ValueError):
            NicholsPoint(phase_deg=-90.0, gain_db=math.inf)
        with pytest.raises(ValueError):
            NicholsPoint(phase_deg=-90.0, gain_db=math.nan)


class TestToNichols:
    def test_servo_nominal_point(self):
        point = to_nichols(eval_tf(SERVO_NOMINAL, 1j))
        assert point.phase_deg == pytest.approx(-135.0, abs=1e-9)
        assert point.gain_db == pytest.approx(db(1.0 / math.sqrt(2.0)), abs=1e-12)

    def test_positive_imaginary_axis_maps_to_minus_270(self):
        point = to_nichols(1j)
        assert point.phase_deg == pytest.approx(-270.0, abs=1e-12)
        assert point.gain_db == 0.0

    def test_unit_real_response(self):
        point = to_nichols(1.0 + 0.0j)
        assert point.phase_deg == 0.0
        assert point.gain_db == 0.0

    def test_zero_response(self):
        with pytest.raises(ZeroMagnitude):
            to_nichols(0j)


class TestClosedLoopGains:
    def test_open_loop_zero(self):
        assert closed_loop_gain(0j) == 0.0
        assert sensitivity_gain(0j) == 1.0

    def test_real_axis_examples(self):
        # L = -6/11 puts |L/(1+L)| exactly at 1.2.
        assert closed_loop_gain(-6.0 / 11.0 + 0j) == pytest.approx(1.2, abs=1e-12)
        assert closed_loop_gain(-2.0 + 0j) == pytest.approx(2.0, abs=1e-12)
        assert sensitivity_gain(-2.0 + 0j) == pytest.approx(1.0, abs=1e-12)

    def test_large_loop_tends_to_unity(self):
        assert closed_loop_gain(1e9 + 0j) == pytest.approx(1.0, rel=1e-8)

    def test_critical_point(self):
        with pytest.raises(CriticalPoint):
            closed_loop_gain(-1.0 + 0j)
        with pytest.raises(CriticalPoint):
            sensitivity_gain(-1.0 + 0j)

    def test_complementarity(self):
        loop = -0.4 + 0.9j
        t = closed_loop_gain(loop)
        s = sensitivity_gain(loop)
        # T + S = 1 as complex functions; magnitudes obey |T| = |L| |S|.
        assert t == pytest.approx(abs(loop) * s, rel=1e-12)


class TestMCircle:
    M = 1.2

    def test_gains_at_minus_180(self):
        hi, lo = m_circle_gains(self.M, -180.0)
        assert hi == pytest.approx(db(6.0), abs=1e-12)
        assert lo == pytest.approx(db(6.0 / 11.0), abs=1e-12)
        assert hi == pytest.approx(15.563025007672873, abs=1e-9)
        assert lo == pytest.approx(-5.264828695491629, abs=1e-9)

    @pytest.mark.parametrize("phase", [-0.5, -60.0, -90.0, -123.0, -270.0, -359.5])
    def test_no_crossing_phases(self, phase):
        assert m_circle_gains(self.M, phase) is None

    def test_closure_with_closed_loop_gain(self):
        for phase in (-130.0, -160.0, -180.0, -200.0, -230.0):
            hi, lo = m_circle_gains(self.M, phase)
            for gain_db in (hi, lo):
                loop = undb(gain_db) * cmath.exp(1j * math.radians(phase))
                assert closed_loop_gain(loop) == pytest.approx(self.M, abs=1e-9)

    def test_symmetry_about_minus_180(self):
        for delta in (5.0, 20.0, 45.0):
            left = m_circle_gains(self.M, -180.0 - delta)
            right = m_circle_gains(self.M, -180.0 + delta)
            assert left[0] == pytest.approx(right[0], abs=1e-9)
            assert left[1] == pytest.approx(right[1], abs=1e-9)

    def test_branches_order(self):
        for phase in (-125.0, -150.0, -180.0, -210.0, -235.0):
            hi, lo = m_circle_gains(self.M, phase)
            assert hi > lo

    def test_phase_range(self):
        lo, hi = m_circle_phase_range(self.M)
        assert lo == pytest.approx(-236.44269023807928, abs=1e-9)
        assert hi == pytest.approx(-123.55730976192072, abs=1e-9)
        # Edge condition: cos(phase) = -sqrt(M^2-1)/M at both ends.
        limit = math.sqrt(self.M**2 - 1.0) / self.M
        assert math.cos(math.radians(hi)) == pytest.approx(-limit, abs=1e-12)

    def test_gains_exist_only_inside_range(self):
        lo, hi = m_circle_phase_range(self.M)
        assert m_circle_gains(self.M, hi - 0.5) is not None
        assert m_circle_gains(self.M, hi + 0.5) is None
        assert m_circle_gains(self.M, lo + 0.5) is not None
        assert m_circle_gains(self.M, lo - 0.5) is None

    @pytest.mark.parametrize("bad", [1.0, 0.8, 0.0, -2.0, math.inf, math.nan])
    def test_invalid_m(self, bad):
        with pytest.raises(InvalidM):
            m_circle_gains(bad, -180.0)
        with pytest.raises(InvalidM):
            m_circle_phase_range(bad)


class TestMCircleSection:
    def test_for_m_span(self):
        section = MCircleSection.for_m(1.2)
        lo, hi = m_circle_phase_range(1.2)
        assert section.phase_min_deg == lo
        assert section.phase_max_deg == hi

    def test_contains(self):
        section = MCircleSection.for_m(1.2)
        assert section.contains(-180.0)
        assert section.contains(section.phase_max_deg)
        assert not section.contains(section.phase_max_deg + 1e-6)
        assert not section.contains(-237.0)

    def test_gains_match_free_function(self):
        section = MCircleSection.for_m(1.2)
        assert section.gains(-180.0) == m_circle_gains(1.2, -180.0)

    def test_gains_outside_is_none(self):
        section = MCircleSection.for_m(1.2)
        assert section.gains(-100.0) is None

    def test_gains_at_tangent_endpoint(self):
        section = MCircleSection.for_m(1.2)
        pair = section.gains(section.phase_max_deg)
        assert pair is not None
        hi, lo = pair
        # The two branches meet at the tangent; allow clamp rounding.
        assert hi >= lo
        assert hi - lo < 1e-3


class TestPoleZeroExcess:
    def test_upper_model(self):
        excess, ratio = pole_zero_excess(UPPER_MODEL)
        assert excess == 4
        assert ratio == pytest.approx(8400.0, abs=1e-12)

    def test_strips_leading_zeros(self):
        tf = RationalTransferFunction([0.0, 2.0], [1.0, 0.0])
        excess, ratio = pole_zero_excess(tf)
        assert excess == 1
        assert ratio == pytest.approx(2.0)

    def test_additive_over_products(self):
        a = RationalTransferFunction([3.0], [1.0, 1.0])
        b = RationalTransferFunction([1.0, 2.0], [2.0, 0.0, 1.0])
        ea, ra = pole_zero_excess(a)
        eb, rb = pole_zero_excess(b)
        ep, rp = pole_zero_excess(a.multiply(b))
        assert ep == ea + eb
        assert rp == pytest.approx(ra * rb, rel=1e-12)

    def test_zero_numerator_rejected(self):
        tf = RationalTransferFunction([0.0], [1.0, 1.0])
        with pytest.raises(ValueError):
            pole_zero_excess(tf)
