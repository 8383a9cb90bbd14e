import math

import numpy as np
import pytest

from finslerlab import jets
from finslerlab.curves import FunctionTrack, PiecewiseCurve, SampledTrack, VectorFieldAlongCurve
from finslerlab.errors import BreakAmbiguityError, BreakMismatchError


def test_function_track_derivatives():
    c = FunctionTrack(lambda t: [jets.sin(t), t * t * t], 0, 2)
    d = c.eval(0.7, 3)
    assert d[:, 0] == pytest.approx([math.sin(0.7), math.cos(0.7), -math.sin(0.7), -math.cos(0.7)])
    assert d[:, 1] == pytest.approx([0.343, 1.47, 4.2, 6.0])


def test_breaks_need_a_side():
    c = PiecewiseCurve.polyline([[0, 0], [1, 0], [1, 2]], [0, 1, 2])
    assert c(1.0) == pytest.approx([1, 0])
    with pytest.raises(BreakAmbiguityError):
        c.derivative(1.0)
    assert c.derivative(1.0, "left") == pytest.approx([1, 0])
    assert c.derivative(1.0, "right") == pytest.approx([0, 2])
    assert c.segments == [(0.0, 1.0), (1.0, 2.0)]


def test_sampled_track_reproduces_cubics():
    ts = np.linspace(0, 1, 9)
    tr = SampledTrack(ts, np.column_stack([ts**2, 1 - ts]))
    assert tr.eval(0.33, 1)[1] == pytest.approx([0.66, -1.0], abs=1e-2)
    assert tr(0.5) == pytest.approx([0.25, 0.5], abs=1e-12)
    with pytest.raises(ValueError):
        SampledTrack([0, 0.5, 0.4, 1], np.zeros((4, 2)))


def test_sampled_track_with_break_and_jump():
    ts = np.linspace(0, 2, 21)
    vals = np.column_stack([np.abs(ts - 1), 0 * ts])
    tr = SampledTrack(ts, vals, breaks=[1.0])
    assert tr.derivative(1.0, "left") == pytest.approx([-1, 0], abs=1e-10)
    assert tr.derivative(1.0, "right") == pytest.approx([1, 0], abs=1e-10)


def test_arithmetic_and_scaling():
    c = FunctionTrack(lambda t: [t, 0 * t], 0, 1)
    W = VectorFieldAlongCurve.constant(c, [0, 1])
    s = c + W * 2.0
    assert s.eval(0.5, 1) == pytest.approx(np.array([[0.5, 2.0], [1.0, 0.0]]))
    sc = W.scaled(lambda t: t * t)
    assert sc.eval(0.5, 1) == pytest.approx(np.array([[0, 0.25], [0, 1.0]]))
    other = FunctionTrack(lambda t: [t, t], 0, 1, breaks=[0.5])
    with pytest.raises(BreakMismatchError):
        c + other


def test_velocity_field():
    c = FunctionTrack(lambda t: [t, t * t], 0, 1)
    V = VectorFieldAlongCurve.velocity(c)
    assert V.eval(0.5, 1) == pytest.approx(np.array([[1, 1], [0, 2]]))


def test_interval_checks():
    with pytest.raises(ValueError):
        FunctionTrack(lambda t: [t], 1, 0)
    with pytest.raises(ValueError):
        FunctionTrack(lambda t: [t], 0, 1, breaks=[1.5])
