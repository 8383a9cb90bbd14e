import math

import numpy as np
import pytest

from finslerlab import catalog
from finslerlab.curves import FunctionTrack
from finslerlab.errors import DomainExitError, ExpDomainError
from finslerlab.geodesic import exponential_map, integrate_geodesic, parallel_transport
from finslerlab.metric import fundamental_tensor


def test_euclidean_lines():
    rec = integrate_geodesic(catalog.euclidean(), [0, 0], [1, 2], (0, 1))
    for t in (0.0, 0.3, 1.0):
        assert rec(t) == pytest.approx([t, 2 * t], abs=1e-14)
    assert exponential_map(catalog.euclidean(), [1, 1], [0.5, -2]) == pytest.approx([1.5, -1])


def test_sphere_meridian_and_exp():
    s = catalog.sphere()
    rec = integrate_geodesic(s, [math.pi / 2, 0], [-1, 0], (0, math.pi / 4))
    assert rec.endpoint()[0] == pytest.approx([math.pi / 4, 0], abs=1e-8)
    assert exponential_map(s, [math.pi / 2, 0], [-math.pi / 4, 0]) == pytest.approx([math.pi / 4, 0], abs=1e-8)


def test_great_circle_closed_form():
    s = catalog.sphere()
    # equator-crossing great circle tilted by 45 degrees, unit speed
    rec = integrate_geodesic(s, [math.pi / 2, 0], [-math.sqrt(0.5), math.sqrt(0.5)], (0, 1.2))
    for t in (0.4, 1.2):
        theta, phi = rec(t)
        # points of the great circle satisfy cos(theta) = -tan(i) sin(phi) sin(i)... check with Cartesian form
        p = np.array([math.sin(theta) * math.cos(phi), math.sin(theta) * math.sin(phi), math.cos(theta)])
        ref = math.cos(t) * np.array([1, 0, 0]) + math.sin(t) * np.array([0, math.sqrt(0.5), math.sqrt(0.5)])
        assert p == pytest.approx(ref, abs=1e-9)


@pytest.mark.parametrize("mid", catalog.CATALOG_IDS)
def test_energy_and_flow_homogeneity(mid):
    m = catalog.from_spec(mid)
    rng = np.random.default_rng(21)
    x, v = m.sample(rng)
    v = 0.5 * v / np.linalg.norm(v)
    rec = integrate_geodesic(m, x, v, (0, 1))
    assert rec.drift <= 1e-8 * max(1, abs(rec.L0))
    for lam in (0.5, 2.0):
        other = integrate_geodesic(m, x, lam * v, (0, 1 / lam))
        for t in (0.25, 1 / lam):
            assert other(t) == pytest.approx(rec(lam * t), abs=1e-8)


def test_domain_exit_at_pole():
    with pytest.raises(DomainExitError) as e:
        integrate_geodesic(catalog.sphere(), [1.5708, 0], [-1, 0], (0, 3.5))
    assert e.value.t_exit == pytest.approx(1.5708, abs=1e-4)
    with pytest.raises(ExpDomainError):
        exponential_map(catalog.sphere(), [1.5708, 0], [-3.0, 0.0])


@pytest.mark.parametrize("mid", ["sphere", "randers", "funk"])
def test_transport_along_geodesic(mid):
    m = catalog.from_spec(mid)
    rng = np.random.default_rng(9)
    x, v = m.sample(rng)
    v = 0.5 * v / np.linalg.norm(v)
    rec = integrate_geodesic(m, x, v, (0, 1))
    w = rng.normal(size=(2, 2))
    X, Y = parallel_transport(m, rec, w)
    V = parallel_transport(m, rec, v)
    g0 = fundamental_tensor(m, x, v).g
    for t in (0.33, 0.77, 1.0):
        xt, vt = rec.state(t)
        g = fundamental_tensor(m, xt, vt).g
        assert X(t) @ g @ Y(t) == pytest.approx(w[0] @ g0 @ w[1], abs=1e-7)
        assert V(t) == pytest.approx(vt, abs=1e-7)


def test_latitude_holonomy():
    s = catalog.sphere()
    th = math.pi / 3
    circle = FunctionTrack(lambda t: [th + 0 * t, t], 0.0, 2 * math.pi)
    X = parallel_transport(s, circle, [1.0, 0.0])
    # rotation by 2 pi cos(theta) relative to the orthonormal frame (e_theta, e_phi / sin theta)
    ang = 2 * math.pi * math.cos(th)
    w = X(2 * math.pi)
    assert [w[0], w[1] * math.sin(th)] == pytest.approx([math.cos(ang), -math.sin(ang)], abs=1e-8)


def test_euclidean_transport_is_constant():
    m = catalog.euclidean()
    curve = FunctionTrack(lambda t: [t, t * t], 0.0, 1.0)
    X = parallel_transport(m, curve, [0.3, -1.0])
    assert X(0.7) == pytest.approx([0.3, -1.0], abs=1e-12)
