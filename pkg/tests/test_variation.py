import math

import numpy as np
import pytest

from finslerlab import catalog, fd, jets
from finslerlab.curves import FunctionTrack, PiecewiseCurve, VectorFieldAlongCurve
from finslerlab.errors import BreakMismatchError, NotGeodesicError, OrthogonalityError
from finslerlab.geodesic import integrate_geodesic
from finslerlab.metric import evaluate_L
from finslerlab.submanifold import SubmanifoldPatch
from finslerlab.variation import (
    critical_point_test,
    energy,
    first_variation,
    index_form,
    legendre,
    legendre_jumps,
    second_variation,
)

PI = math.pi


def sin_pi(t):
    return jets.sin(PI * t)


def test_energy_examples():
    e = catalog.euclidean()
    assert energy(e, FunctionTrack(lambda t: [t, 0 * t], 0, 1)) == pytest.approx(0.5, abs=1e-13)
    assert energy(e, FunctionTrack(lambda t: [t, t * t], 0, 1)) == pytest.approx(7 / 6, abs=1e-13)
    assert energy(catalog.pseudo_euclidean(), FunctionTrack(lambda t: [t, t], 0, 1)) == pytest.approx(0.0, abs=1e-14)


def test_energy_matches_direct_quadrature_on_randers():
    from scipy.integrate import quad

    m = catalog.randers()
    c = FunctionTrack(lambda t: [0.3 * t, 0.2 * t * t - 0.1], 0, 1)
    ref = 0.5 * quad(lambda t: evaluate_L(m, c(t), c.derivative(t)), 0, 1, epsabs=1e-14)[0]
    assert energy(m, c) == pytest.approx(ref, abs=1e-12)


def test_legendre_examples():
    assert legendre(catalog.euclidean(), [0, 0], [1, 2]) @ [3, 4] == pytest.approx(11.0)
    assert legendre(catalog.quartic(), [0, 0], [1, 1]) @ [1, 0] == pytest.approx(math.sqrt(2) / 2, abs=1e-12)
    rng = np.random.default_rng(0)
    for mid in catalog.CATALOG_IDS:
        m = catalog.from_spec(mid)
        x, v = m.sample(rng)
        assert legendre(m, x, v) @ v == pytest.approx(evaluate_L(m, x, v), abs=1e-10)
        assert legendre(m, x, 3.0 * v) == pytest.approx(3.0 * legendre(m, x, v), rel=1e-10)


def test_first_variation_parabola():
    e = catalog.euclidean()
    c = FunctionTrack(lambda t: [t, t * t], 0, 1)
    W = VectorFieldAlongCurve.from_function(c, lambda t: [0 * t, sin_pi(t)])
    val = first_variation(e, c, W)
    assert val == pytest.approx(-4 / PI, abs=1e-12)
    oracle = fd.central_first(lambda s: energy(e, FunctionTrack(lambda t: [t, t * t + s * jets.sin(PI * t)], 0, 1)), 1e-4)
    assert val == pytest.approx(oracle, abs=1e-8)


def test_first_variation_vanishes_on_geodesics():
    e = catalog.euclidean()
    c = FunctionTrack(lambda t: [t, 2 * t], 0, 1)
    W = VectorFieldAlongCurve.from_function(c, lambda t: [sin_pi(t), t * (1 - t)])
    assert abs(first_variation(e, c, W)) <= 1e-13


def test_corner_jump():
    e = catalog.euclidean()
    c = PiecewiseCurve.polyline([[0, 0], [1, 0], [1, 1]], [0, 1, 2])
    jumps = legendre_jumps(e, c)
    assert jumps[0] @ [0, 1] == pytest.approx(1.0)
    # hat field: zero at the endpoints, (0, 1) at the corner
    W = VectorFieldAlongCurve.from_function(c, [lambda t: [0 * t, t], lambda t: [0 * t, 2 - t]])
    val = first_variation(e, c, W)

    def E(s):
        return energy(e, c + W * s)

    assert val == pytest.approx(fd.central_first(E, 1e-3), abs=1e-9)
    # the corner is the only contribution: the straight pieces are geodesics
    assert val == pytest.approx(-1.0, abs=1e-12)


def test_break_mismatch():
    e = catalog.euclidean()
    c = FunctionTrack(lambda t: [t, 0 * t], 0, 1)
    W = FunctionTrack(lambda t: [t, t], 0, 1, breaks=[0.5])
    with pytest.raises(BreakMismatchError):
        first_variation(e, c, W)


def test_second_variation_euclidean():
    e = catalog.euclidean()
    c = FunctionTrack(lambda t: [t, 0 * t], 0, 1)
    W = VectorFieldAlongCurve.from_function(c, lambda t: [0 * t, sin_pi(t)])
    val = second_variation(e, c, W)
    assert val == pytest.approx(PI**2 / 2, abs=1e-9)
    assert val == pytest.approx(fd.central_second(lambda s: energy(e, c + W * s), 1e-3), abs=1e-7)


def test_second_variation_needs_geodesic():
    e = catalog.euclidean()
    c = FunctionTrack(lambda t: [t, t * t], 0, 1)
    with pytest.raises(NotGeodesicError):
        second_variation(e, c, VectorFieldAlongCurve.constant(c, [0, 1]))


def _equator(length):
    return FunctionTrack(lambda t: [PI / 2 + 0 * t, t], 0.0, length)


@pytest.mark.parametrize("length", [PI - 0.1, PI + 0.1])
def test_second_variation_sign_change_on_sphere(length):
    s = catalog.sphere()
    c = _equator(length)
    W = VectorFieldAlongCurve.from_function(c, lambda t: [jets.sin(PI * t / length), 0 * t])
    val = second_variation(s, c, W)
    closed = 0.5 * length * ((PI / length) ** 2 - 1.0)
    assert val == pytest.approx(closed, abs=1e-9)
    assert (val > 0) == (length < PI)


def test_second_variation_fd_randers():
    m = catalog.randers()
    rec = integrate_geodesic(m, [0.1, -0.1], [0.4, 0.3], (0, 1))
    W = VectorFieldAlongCurve.from_function(rec, lambda t: [t * (1 - t), 0.5 * t * t])
    val = second_variation(m, rec, W)

    def E(s):
        return energy(m, rec + W * s, tol=1e-12)

    d1, d2 = fd.central_second(E, 1e-2), fd.central_second(E, 5e-3)
    assert val == pytest.approx(d2 + (d2 - d1) / 15, abs=1e-6)


def test_critical_point_examples():
    e = catalog.euclidean()
    seg = FunctionTrack(lambda t: [t, 0 * t], 0, 1)
    P = SubmanifoldPatch.line([0, 0], [0, 1])
    Q = SubmanifoldPatch.line([1, 0], [0, 1])
    assert critical_point_test(e, seg, P, Q).critical
    a = math.radians(10)
    tilted = FunctionTrack(lambda t: [math.cos(a) * t, math.sin(a) * t], 0, 1)
    Q2 = SubmanifoldPatch.line([math.cos(a), math.sin(a)], [0, 1])
    rep = critical_point_test(e, tilted, P, Q2)
    assert not rep.critical
    assert rep.orthogonality_P == pytest.approx(math.sin(a), abs=1e-12) and rep.orthogonality_P > 0.1
    pts = critical_point_test(e, seg, SubmanifoldPatch.at_point([0, 0]), SubmanifoldPatch.at_point([1, 0]))
    assert pts.critical
    corner = PiecewiseCurve.polyline([[0, 0], [1, 0], [1, 1]], [0, 1, 2])
    rep = critical_point_test(e, corner, SubmanifoldPatch.at_point([0, 0]), SubmanifoldPatch.at_point([1, 1]))
    assert not rep.critical and rep.legendre_jump == pytest.approx(1.0)


def test_index_form_examples():
    e = catalog.euclidean()
    seg = FunctionTrack(lambda t: [t, 0 * t], 0, 1)
    P, Q = SubmanifoldPatch.at_point([0, 0]), SubmanifoldPatch.at_point([1, 0])
    V = VectorFieldAlongCurve.from_function(seg, lambda t: [0 * t, sin_pi(t)])
    assert index_form(e, seg, P, Q, V, V) == pytest.approx(PI**2 / 2, abs=1e-9)

    s = catalog.sphere()
    eq = _equator(PI)
    P, Q = SubmanifoldPatch.at_point([PI / 2, 0]), SubmanifoldPatch.at_point([PI / 2, PI])
    J = VectorFieldAlongCurve.from_function(eq, lambda t: [jets.sin(t), 0 * t])
    assert abs(index_form(s, eq, P, Q, J, J)) <= 1e-6
    # J is a Jacobi field vanishing at both ends, so it lies in the kernel
    rng = np.random.default_rng(3)
    for _ in range(3):
        c1, c2 = rng.normal(size=2)
        W = VectorFieldAlongCurve.from_function(eq, lambda t: [c1 * t * (PI - t), c2 * jets.sin(2 * t) + t * t * (PI - t)])
        assert abs(index_form(s, eq, P, Q, J, W)) <= 1e-6
        assert index_form(s, eq, P, Q, W, J) == pytest.approx(index_form(s, eq, P, Q, J, W), abs=1e-7)
    # a non-Jacobi perturbation leaves the kernel
    K = VectorFieldAlongCurve.from_function(eq, lambda t: [jets.sin(t) + 0.3 * t * t * (PI - t), 0 * t])
    Wc = VectorFieldAlongCurve.from_function(eq, lambda t: [t * (PI - t), 0 * t])
    assert abs(index_form(s, eq, P, Q, K, Wc)) > 1e-3


def test_index_form_with_lines_is_symmetric():
    e = catalog.euclidean()
    seg = FunctionTrack(lambda t: [t, 0 * t], 0, 1)
    P = SubmanifoldPatch.line([0, 0], [0, 1])
    Q = SubmanifoldPatch.circle([2, 0], 1.0, u0=PI)
    V = VectorFieldAlongCurve.from_function(seg, lambda t: [0 * t, 1 + t])
    W = VectorFieldAlongCurve.from_function(seg, lambda t: [0 * t, 2 - t * t])
    a, b = index_form(e, seg, P, Q, V, W), index_form(e, seg, P, Q, W, V)
    assert a == pytest.approx(b, abs=1e-10)
    # int V'W' = -1, plus V(1) W(1) / R = 2 from the circle curving towards the segment
    assert a == pytest.approx(1.0, abs=1e-9)

    # I(V, V) is E'' of segments from (0, s) on P to the circle point at arc 2 s
    def E(s):
        q = np.array([2 - math.cos(2 * s), math.sin(2 * s)])
        return 0.5 * float(np.sum((q - [0, s]) ** 2))

    assert index_form(e, seg, P, Q, V, V) == pytest.approx(fd.central_second(E, 1e-3), abs=1e-7)


def test_index_form_checks_orthogonality():
    e = catalog.euclidean()
    seg = FunctionTrack(lambda t: [t, 0 * t], 0, 1)
    P = SubmanifoldPatch.line([0, 0], [1, 1])
    Q = SubmanifoldPatch.at_point([1, 0])
    V = VectorFieldAlongCurve.constant(seg, [0, 0])
    with pytest.raises(OrthogonalityError):
        index_form(e, seg, P, Q, V, V)
