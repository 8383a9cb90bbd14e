import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from finslerlab import _jetcore_py, _kernels, catalog, fd, jets
from finslerlab.errors import JetDomainError
from finslerlab.validation import _poly_taylor

finite = st.floats(-3, 3, allow_nan=False)


def _space_vars(space, vals):
    return [jets.Jet.variable(space, v, i) for i, v in enumerate(vals)]


def test_square_of_velocity_component(kernel_backend):
    J = jets.lift(lambda x, v: v[0] * v[0], [0.0], [3.0], [("v", 0)], 2)
    assert J.value == 9.0
    assert J.coefficient((1,)) == 6.0
    assert J.coefficient((2,)) == 1.0


def test_constant_has_no_derivatives(kernel_backend):
    J = jets.lift(lambda x, v: 2.5 + 0 * v[0], [1.0, 2.0], [0.3, 0.4], [("x", 0), ("v", 1)], 3)
    assert J.value == 2.5
    assert np.all(J.c[1:] == 0.0)


def test_random_polynomials_are_exact(kernel_backend):
    rng = np.random.default_rng(7)
    for _ in range(20):
        nvar = int(rng.integers(2, 5))
        exps = [tuple(int(e) for e in rng.multinomial(int(rng.integers(0, 5)), [1 / nvar] * nvar)) for _ in range(4)]
        coeffs = rng.normal(size=4)
        y0 = rng.normal(size=nvar)
        space = jets.JetSpace.get(nvar, 4)
        ys = _space_vars(space, y0)
        total = 0.0
        for c, e in zip(coeffs, exps):
            term = c
            for i, k in enumerate(e):
                term = term * ys[i] ** k if k else term
            total = total + term
        total = total if jets.is_jet(total) else jets.Jet.constant(space, total)
        assert np.max(np.abs(total.c - _poly_taylor(coeffs, exps, y0, space))) <= 1e-12


@pytest.mark.parametrize("mid", catalog.CATALOG_IDS)
def test_catalog_derivatives_match_finite_differences(mid):
    m = catalog.from_spec(mid)
    rng = np.random.default_rng(3)
    for _ in range(10):
        x, v = m.sample(rng)
        d = rng.normal(size=2 * m.dim)
        d /= np.linalg.norm(d)
        lift = jets.lift(m.lagrangian, x, v, [(d[: m.dim], d[m.dim :])], 4)
        f = lambda t: m.lagrangian(x + t * d[: m.dim], v + t * d[m.dim :])
        for k in range(1, 5):
            ref, _ = fd.adaptive_derivative(f, k, 0.2 * min(1.0, np.linalg.norm(v)))
            assert abs(lift.partial(*([0] * k)) - ref) <= 1e-6 * max(1.0, abs(ref))


def test_elementary_functions_against_closed_forms(kernel_backend):
    sp = jets.JetSpace.get(1, 4)
    t = jets.Jet.variable(sp, 0.7, 0)
    for fn, ref in [
        (jets.sin, lambda k: math.sin(0.7 + k * math.pi / 2)),
        (jets.cos, lambda k: math.cos(0.7 + k * math.pi / 2)),
        (jets.exp, lambda k: math.exp(0.7)),
    ]:
        J = fn(t)
        for k in range(5):
            assert J.partial(*([0] * k)) == pytest.approx(ref(k), rel=1e-13, abs=1e-14)
    L = jets.log(t)
    assert L.partial(0, 0, 0) == pytest.approx(2 / 0.7**3, rel=1e-13)
    S = jets.sqrt(t)
    assert (S * S - t).c == pytest.approx(np.zeros(sp.size), abs=1e-15)


def test_sqrt_of_negative_raises():
    sp = jets.JetSpace.get(1, 2)
    with pytest.raises(JetDomainError):
        jets.sqrt(jets.Jet.variable(sp, -1.0, 0))


def test_order_zero_jets():
    sp = jets.JetSpace.get(2, 0)
    j = jets.Jet.variable(sp, 3.0, 1)
    assert j.value == 3.0 and sp.size == 1


def test_solve_inverts_jet_matrix(kernel_backend):
    sp = jets.JetSpace.get(2, 3)
    a, b = jets.Jet.variable(sp, 2.0, 0), jets.Jet.variable(sp, 0.5, 1)
    A = [[a, b], [b * b, a + 1.0]]
    inv = jets.inverse(A)
    for i in range(2):
        for j in range(2):
            e = sum((A[i][k] * inv[k][j] for k in range(2)), jets.Jet.constant(sp, 0.0))
            assert e.c == pytest.approx(np.eye(2)[i, j] * np.eye(1, sp.size, 0)[0], abs=1e-14)


def test_univariate_returns_derivatives():
    d = jets.univariate(lambda t: [t * t * t, jets.sin(t)], 0.5, 3)
    assert d.shape == (4, 2)
    assert d[:, 0] == pytest.approx([0.125, 0.75, 3.0, 6.0])
    assert d[3, 1] == pytest.approx(-math.cos(0.5))


@pytest.mark.skipif(_kernels.compiled_kernels is None, reason="compiled kernels not built")
def test_backends_agree_bitwise_on_random_data():
    rng = np.random.default_rng(0)
    for ndir, order in ((1, 4), (3, 3), (8, 4)):
        sp = jets.JetSpace.get(ndir, order)
        a, b = rng.normal(size=(2, sp.size))
        b[0] = 0.0
        args = (sp.ti, sp.tj, sp.tk, sp.size)
        assert np.allclose(_kernels.compiled_kernels.mul(a, b, *args), _jetcore_py.mul(a, b, *args), rtol=0, atol=1e-13)
        co = rng.normal(size=order + 1)
        assert np.allclose(
            _kernels.compiled_kernels.horner(co, b, *args), _jetcore_py.horner(co, b, *args), rtol=0, atol=1e-12
        )


@settings(max_examples=60, deadline=None)
@given(st.lists(finite, min_size=9, max_size=9))
def test_product_is_commutative_and_associative(vals):
    sp = jets.JetSpace.get(2, 3)
    mk = lambda a, b, c: jets.Jet.constant(sp, a) + b * jets.Jet.variable(sp, 0.0, 0) + c * jets.Jet.variable(sp, 0.0, 1) ** 2
    p, q, r = mk(*vals[:3]), mk(*vals[3:6]), mk(*vals[6:])
    assert np.allclose((p * q).c, (q * p).c, atol=1e-12)
    assert np.allclose(((p * q) * r).c, (p * (q * r)).c, atol=1e-10)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.2, 5.0), st.floats(-2, 2))
def test_division_inverts_multiplication(a, b):
    sp = jets.JetSpace.get(1, 4)
    x = jets.Jet.variable(sp, a, 0)
    y = x * x + b * x + 3.0
    assert np.allclose(((y / x) * x).c, y.c, atol=1e-10)
