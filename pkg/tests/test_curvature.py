import math

import numpy as np
import pytest

from finslerlab import catalog, jets
from finslerlab.curvature import (
    flag_curvature,
    jacobi_operator_spray,
    jacobi_operator_variational,
    random_flags,
)
from finslerlab.curves import FunctionTrack, VectorFieldAlongCurve
from finslerlab.errors import DegenerateFlagError
from finslerlab.geodesic import integrate_geodesic
from finslerlab.metric import fundamental_tensor
from finslerlab.validation import _random_curve, _sampled_field


def test_flat_operators_vanish():
    rng = np.random.default_rng(0)
    for m in (catalog.euclidean(), catalog.quartic()):
        x, v = m.sample(rng)
        assert np.all(np.abs(jacobi_operator_spray(m, x, v)) <= 1e-12)
        for _ in range(3):
            _, v, w = random_flags(m, 1, seed=int(rng.integers(1 << 30)))[0]
            assert abs(flag_curvature(m, x, v, w)) <= 1e-12
    m = catalog.euclidean()
    curve = FunctionTrack(lambda t: [t, t * t], 0.0, 1.0)
    W = VectorFieldAlongCurve.from_function(curve, lambda t: [jets.sin(t), t])
    assert jacobi_operator_variational(m, curve, W, W, 0.4) == pytest.approx([0, 0], abs=1e-14)


def test_sphere_operator_closed_form():
    s = catalog.sphere()
    rng = np.random.default_rng(1)
    for _ in range(5):
        th = rng.uniform(0.4, 2.7)
        x = np.array([th, rng.uniform(-3, 3)])
        # orthonormal pair in g = diag(1, sin^2)
        a = rng.uniform(0, 2 * math.pi)
        v = np.array([math.cos(a), math.sin(a) / math.sin(th)])
        w = np.array([-math.sin(a), math.cos(a) / math.sin(th)])
        assert jacobi_operator_spray(s, x, v, w) == pytest.approx(-w, abs=1e-10)
        assert jacobi_operator_spray(s, x, v, v) == pytest.approx([0, 0], abs=1e-10)


@pytest.mark.parametrize("mid", catalog.CATALOG_IDS)
def test_operator_is_g_orthogonal_to_velocity(mid):
    m = catalog.from_spec(mid)
    for x, v, w in random_flags(m, 10, seed=3):
        g = fundamental_tensor(m, x, v).g
        Rw = jacobi_operator_spray(m, x, v, w)
        assert Rw @ g @ v == pytest.approx(0.0, abs=1e-9 * max(1.0, np.abs(Rw).max() * np.abs(v).max()))


@pytest.mark.parametrize("mid,K", [("sphere", 1.0), ("hyperbolic", -1.0), ("funk", -0.25)])
def test_constant_flag_curvature(mid, K):
    m = catalog.from_spec(mid)
    tol = 1e-5 if mid == "funk" else 1e-6
    for x, v, w in random_flags(m, 20, seed=5):
        for route in ("spray", "variational"):
            assert flag_curvature(m, x, v, w, route=route) == pytest.approx(K, abs=tol)


@pytest.mark.parametrize("mid", ["randers", "funk", "pseudo_euclidean"])
def test_flag_scale_invariance(mid):
    m = catalog.from_spec(mid)
    for x, v, w in random_flags(m, 5, seed=6):
        K = flag_curvature(m, x, v, w)
        assert flag_curvature(m, x, v, -2.5 * w) == pytest.approx(K, rel=1e-8, abs=1e-10)
        assert flag_curvature(m, x, v, w + 0.7 * v) == pytest.approx(K, rel=1e-6, abs=1e-8)


def test_degenerate_flag():
    s = catalog.sphere()
    with pytest.raises(DegenerateFlagError):
        flag_curvature(s, [1.0, 0.0], [1.0, 0.5], [2.0, 1.0])


@pytest.mark.parametrize("mid", catalog.CATALOG_IDS)
def test_routes_agree_along_geodesics(mid):
    m = catalog.from_spec(mid)
    rng = np.random.default_rng(7)
    x, v = m.sample(rng)
    v = 0.4 * v / np.linalg.norm(v)
    rec = integrate_geodesic(m, x, v, (0, 1))
    W = _sampled_field(rng, rec)
    V = VectorFieldAlongCurve.velocity(rec)
    for t in (0.2, 0.5, 0.8):
        xt, vt = rec.state(t)
        a = jacobi_operator_variational(m, rec, W, V, t)
        b = jacobi_operator_spray(m, xt, vt, W(t))
        assert a == pytest.approx(b, abs=1e-6 * max(1.0, np.abs(b).max()))
        q = jacobi_operator_variational(m, rec, W, V, t, variation="quadratic")
        assert q == pytest.approx(a, abs=1e-12)


@pytest.mark.parametrize("mid", ["sphere", "randers", "funk", "quartic"])
def test_antisymmetry_pairing_along_any_curve(mid):
    m = catalog.from_spec(mid)
    rng = np.random.default_rng(11)
    curve = _random_curve(m, rng)
    U, P = _sampled_field(rng, curve), _sampled_field(rng, curve)
    V = VectorFieldAlongCurve.velocity(curve)
    for t in (0.1, 0.2):
        x, v = curve.eval(t, 1)[:2]
        g = fundamental_tensor(m, x, v).g
        lhs = jacobi_operator_variational(m, curve, U, V, t) @ g @ P(t)
        rhs = -(jacobi_operator_variational(m, curve, U, P, t) @ g @ v)
        assert lhs == pytest.approx(rhs, abs=1e-6 * max(1.0, abs(lhs)))


def test_tensoriality_and_vanishing_on_velocity():
    m = catalog.randers()
    rng = np.random.default_rng(12)
    curve = _random_curve(m, rng)
    W = _sampled_field(rng, curve)
    V = VectorFieldAlongCurve.velocity(curve)
    f = lambda t: 1.0 + t * t
    t = 0.15
    a = jacobi_operator_variational(m, curve, W.scaled(f), V, t)
    b = f(t) * jacobi_operator_variational(m, curve, W, V, t)
    assert a == pytest.approx(b, abs=1e-6 * max(1.0, np.abs(b).max()))
    assert jacobi_operator_variational(m, curve, V, V, t) == pytest.approx([0, 0], abs=1e-9)
