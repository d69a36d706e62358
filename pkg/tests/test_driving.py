import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from handspin.driving import (
    AccelRamp,
    DirectionalThrow,
    Driver,
    PerturbationConfig,
    PeriodicInjection,
    advance_drive,
    build_drive_springs,
    drive_signal,
    initial_drive,
    strategy_from_dict,
    strategy_to_dict,
    with_revolutions,
)

RAMP = AccelRamp(R0=0.03, R_T=0.06, V0=2.0, V_T=20.0, T_k=1.5)
THROW = DirectionalThrow(R0=0.01, R_T=0.1, V_T=2 * math.pi, T_k=0.5)
INJECT = PeriodicInjection(R=0.06, V_m=4 * math.pi, V_a=3 * math.pi, T_m=1.0)


def test_accel_ramp_values():
    assert drive_signal(RAMP, 0.0) == (0.03, 2.0)
    assert drive_signal(RAMP, 1.5) == pytest.approx((0.06, 20.0))
    assert drive_signal(RAMP, 7.0) == pytest.approx((0.06, 20.0))
    assert drive_signal(RAMP, 0.75) == pytest.approx((0.045, 11.0))


def test_throw_profile():
    assert drive_signal(THROW, 0.0) == pytest.approx((0.01, 2 * math.pi))
    assert THROW.radius(0.5) == pytest.approx(0.1)
    # quarter ellipse: R(s) = R0 + (R_T - R0) sqrt(1 - (1 - s)^2)
    assert THROW.radius(0.25) == pytest.approx(0.01 + 0.09 * math.sqrt(0.75))
    # arrives flat
    assert (THROW.radius(0.5) - THROW.radius(0.5 - 1e-6)) / 1e-6 < 1e-2


def test_injection_profile():
    assert INJECT.radius(3.3) == 0.06
    assert INJECT.speed(0.25) == pytest.approx(7 * math.pi)
    t = np.arange(1000) / 1000.0
    assert np.mean([INJECT.speed(x) for x in t]) == pytest.approx(4 * math.pi, abs=1e-9)
    assert INJECT.speed(0.37) == pytest.approx(INJECT.speed(1.37))


@pytest.mark.parametrize("s", [RAMP, THROW, INJECT])
def test_signals_continuous(s):
    t = np.linspace(0.0, 3.0, 30001)
    R = np.array([s.radius(x) for x in t])
    V = np.array([s.speed(x) for x in t])
    assert np.max(np.abs(np.diff(R))) < 2e-3
    assert np.max(np.abs(np.diff(V))) < 1e-2


@pytest.mark.parametrize("s", [RAMP, THROW])
def test_constant_after_rise(s):
    assert drive_signal(s, s.T_k) == pytest.approx(drive_signal(s, s.T_k + 10.0))
    assert s.period == pytest.approx(2 * math.pi / s.V_T)


def test_negative_time_rejected():
    with pytest.raises(ValueError):
        drive_signal(RAMP, -0.1)


def test_validation():
    with pytest.raises(ValueError):
        PeriodicInjection(R=0.05, V_m=1.0, V_a=1.0, T_m=1.0)
    with pytest.raises(ValueError):
        AccelRamp(R0=0.0, R_T=0.06, V0=0.0, V_T=1.0, T_k=1.0)
    with pytest.raises(ValueError):
        DirectionalThrow(R0=0.01, R_T=0.1, V_T=1.0, T_k=-1.0)


def test_with_revolutions():
    s = with_revolutions(RAMP, 4)
    assert s.T_k == pytest.approx(4 * 2 * math.pi / 20.0)
    with pytest.raises(ValueError):
        with_revolutions(INJECT, 2)


@pytest.mark.parametrize("s", [RAMP, THROW, INJECT])
def test_dict_roundtrip(s):
    assert strategy_from_dict(strategy_to_dict(s)) == s


def test_dict_errors():
    with pytest.raises(ValueError, match="unknown strategy"):
        strategy_from_dict({"type": "wobble"})
    with pytest.raises(ValueError, match="unknown keys"):
        strategy_from_dict({**strategy_to_dict(INJECT), "extra": 1.0})
    with pytest.raises(ValueError, match="missing keys"):
        strategy_from_dict({"type": "periodic_injection", "R": 0.1})


@given(st.floats(0.01, 0.2), st.floats(0.5, 40.0), st.floats(1e-4, 1e-2))
def test_constant_circle(R, V, dt):
    s = AccelRamp(R0=R, R_T=R, V0=V, V_T=V, T_k=1.0)
    d = initial_drive(s, center=(0.1, -0.2, 0.0))
    for _ in range(50):
        d = advance_drive(d, s, dt)
        assert np.linalg.norm(d.position - d.center) == pytest.approx(R, rel=1e-14)
        assert np.linalg.norm(d.velocity) == pytest.approx(R * V, abs=1e-9)
        assert d.position[2] == 0.0


def test_phase_advance():
    d = initial_drive(RAMP)
    d1 = advance_drive(d, RAMP, 0.01)
    assert d1.phi == pytest.approx(2.0 * 0.01)
    assert d1.t == pytest.approx(0.01)


def test_perturbation_bounded():
    s = AccelRamp(R0=0.05, R_T=0.05, V0=10.0, V_T=10.0, T_k=1.0)
    rng = np.random.default_rng(3)
    d = initial_drive(s)
    for _ in range(2000):
        d = advance_drive(d, s, 1e-3, amplitude=0.002, rng=rng)
        assert np.all(np.abs(d.position - d.nominal_position()) <= 0.002)
        # velocity stays on the nominal circle
        assert np.linalg.norm(d.velocity) == pytest.approx(0.5, abs=1e-12)


def test_driver_requires_rng_when_perturbed():
    with pytest.raises(ValueError):
        Driver(RAMP, initial_drive(RAMP), PerturbationConfig(amplitude=0.01))


def test_perturbation_validation():
    with pytest.raises(ValueError):
        PerturbationConfig(amplitude=-1.0)


def _octagon(R=1.0):
    ang = 2 * np.pi * np.arange(8) / 8
    return np.column_stack((R * np.cos(ang), R * np.sin(ang), np.zeros(8)))


def test_drive_springs_at_centre():
    pos = np.vstack((_octagon(), [0.0, 0.0, 0.0]))
    springs = build_drive_springs(8, range(8), pos, 10.0, 1.0, 0.1)
    assert [s.rest for s in springs] == pytest.approx([1.0] * 8)
    assert all(s.i == 8 for s in springs)


def test_drive_springs_at_vertex():
    pos = np.vstack((_octagon(), _octagon()[0]))
    rest = [s.rest for s in build_drive_springs(8, range(1, 8), pos, 10.0, 1.0, 0.0)]
    assert min(rest) == pytest.approx(2 * math.sin(math.pi / 8))
    assert max(rest) == pytest.approx(2.0)


def test_drive_springs_empty():
    assert build_drive_springs(0, [], np.zeros((1, 3)), 1.0, 1.0, 0.0) == []
