"""The Jacobi operator by two independent routes, and flag curvature.

Sign convention: the Jacobi equation reads ``J'' = R(gamma', J) gamma'``, so
on the unit sphere ``R(v, w) v = -w`` for unit ``v`` and ``w`` orthonormal.
The spray curvature ``R^i_k`` below is the usual (positive on the sphere)
one, hence the operator returned is its negative.
"""

import numpy as np

from . import jets
from .connection import LagrangianExpansion
from .errors import DegenerateFlagError
from .metric import check_point

FLAG_TOL = 1e-12


def jacobi_operator_spray(m, x, v, w=None):
    """Matrix of ``w -> R(v, w) v`` from the spray curvature, or its value at ``w``."""
    x, v = check_point(m, x, v)
    M = -LagrangianExpansion(m, x, v, order=4).spray_curvature()
    return M if w is None else M @ np.asarray(w, dtype=float)


def _as_field_values(F, t, side, nderiv):
    if F is None:
        return None
    if callable(getattr(F, "eval", None)):
        return F.eval(t, nderiv, side)
    arr = np.asarray(F, dtype=float)
    out = np.zeros((nderiv + 1, arr.shape[-1]))
    out[0] = arr
    return out


def commutator_from_jets(m, x, lam_t, lam_s, lam_tt, lam_ts, Z):
    """``D_t D_s Z - D_s D_t Z`` at ``s = 0`` from the second-order data of a variation.

    Derivatives of ``Z`` cancel identically, so only its value enters.  The
    covariant derivatives use the reference ``Lambda_t``.
    """
    e = LagrangianExpansion(m, x, lam_t, order=4)
    gam = e.gamma_value()
    dgx, dgv = e.gamma_derivatives()
    d_t = np.einsum("kijm,m->kij", dgx, lam_t) + np.einsum("kijm,m->kij", dgv, lam_tt)
    d_s = np.einsum("kijm,m->kij", dgx, lam_s) + np.einsum("kijm,m->kij", dgv, lam_ts)

    def G(A, X, Y):
        return np.einsum("kij,i,j->k", A, X, Y)

    return G(d_t, Z, lam_s) - G(d_s, Z, lam_t) + G(gam, G(gam, Z, lam_s), lam_t) - G(gam, G(gam, Z, lam_t), lam_s)


def variation_data(variation, t):
    """``(Lambda, Lambda_t, Lambda_s, Lambda_tt, Lambda_ts)`` at ``(t, 0)`` of a jet-evaluable ``variation(t, s)``."""
    sp = jets.JetSpace.get(2, 2)
    tj = jets.Jet.variable(sp, float(t), 0)
    sj = jets.Jet.variable(sp, 0.0, 1)
    lam = variation(tj, sj)
    n = len(lam)
    out = np.zeros((5, n))
    for i, comp in enumerate(lam):
        if not jets.is_jet(comp):
            out[0, i] = float(comp)
            continue
        out[0, i] = comp.value
        out[1, i] = comp.partial(0)
        out[2, i] = comp.partial(1)
        out[3, i] = comp.partial(0, 0)
        out[4, i] = comp.partial(0, 1)
    return out


def jacobi_operator_variational(m, curve, W, Z, t, variation="linear", side=None):
    """``R(curve', W) Z`` as the commutator of covariant derivatives along a variation.

    ``variation`` is ``"linear"`` for ``x(t) + s W(t)``, ``"quadratic"`` for
    ``x(t) + s W(t) + s^2 W(t)``, or a jet-evaluable callable ``(t, s) -> x``
    whose ``s``-derivative at ``s = 0`` should be ``W``.  ``Z`` is extended
    constantly in ``s``.
    """
    Zv = _as_field_values(Z, t, side, 0)[0]
    if callable(variation):
        data = variation_data(variation, t)
        x, lam_t, lam_s, lam_tt, lam_ts = data
    else:
        if variation not in ("linear", "quadratic"):
            raise ValueError(f"unknown variation kind {variation!r}")
        c = curve.eval(t, 2, side)
        w = _as_field_values(W, t, side, 1)
        # the s^2 term only enters Lambda_ss, which the commutator never reads
        x, lam_t, lam_tt = c[0], c[1], c[2]
        lam_s, lam_ts = w[0], w[1]
    check_point(m, x, lam_t)
    return commutator_from_jets(m, x, lam_t, lam_s, lam_tt, lam_ts, Zv)


def _geodesic_commutator(m, x, v, w, z):
    """Variational route at a point, along the geodesic through ``(x, v)``, chart-constant ``W``."""
    acc = -2.0 * LagrangianExpansion(m, x, v, order=2).G_value()
    n = len(x)
    return commutator_from_jets(m, np.asarray(x, float), np.asarray(v, float), np.asarray(w, float), acc, np.zeros(n), z)


def flag_curvature(m, x, v, w, route="spray"):
    """``K_v(w) = g_v(R(v, w) w, v) / (L(v) g_v(w, w) - g_v(v, w)^2)``.

    ``route="spray"`` uses ``-g_v(R(v, w) v, w)`` from the spray curvature;
    ``route="variational"`` evaluates ``R(v, w) w`` as a commutator.
    """
    x, v = check_point(m, x, v)
    w = np.asarray(w, dtype=float)
    e = LagrangianExpansion(m, x, v, order=4)
    g = e.g_value()
    Lv = v @ g @ v
    gww, gvw = w @ g @ w, v @ g @ w
    den = Lv * gww - gvw**2
    scale = max(abs(Lv * gww), gvw**2, 1e-300)
    if abs(den) < FLAG_TOL * scale:
        raise DegenerateFlagError(
            f"flag (v={v.tolist()}, w={w.tolist()}) is degenerate", x=x.tolist(), v=v.tolist(), w=w.tolist()
        )
    if route == "spray":
        num = w @ g @ (e.spray_curvature() @ w)
    elif route == "variational":
        num = v @ g @ _geodesic_commutator(m, x, v, w, w)
    else:
        raise ValueError(f"unknown route {route!r}")
    return float(num / den)


def random_flags(m, count, seed=0):
    """``count`` seeded ``(x, v, w)`` triples with nondegenerate flags."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        x, v = m.sample(rng)
        w = rng.normal(size=m.dim)
        g = LagrangianExpansion(m, x, v, order=2).g_value()
        den = (v @ g @ v) * (w @ g @ w) - (v @ g @ w) ** 2
        if abs(den) > 1e-3 * abs(v @ g @ v) * np.dot(w, w):
            out.append((x, v, w))
    return out
