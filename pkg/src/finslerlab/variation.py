"""Energy, Legendre transform, first and second variation, criticality and the index form."""

from dataclasses import dataclass, field

import numpy as np

from .connection import LagrangianExpansion, christoffel
from .curvature import commutator_from_jets
from .errors import (
    BreakMismatchError,
    DegenerateRestrictionError,
    FinslerError,
    InadmissibleVectorError,
    NotGeodesicError,
    OrthogonalityError,
)
from .metric import evaluate_L, fundamental_tensor
from .submanifold import _restricted_gram, is_normal, second_fundamental_form

GL_ORDER = 8
_GL_X, _GL_W = np.polynomial.legendre.leggauss(GL_ORDER)
QUAD_TOL = 1e-13
# integrands built on integrated geodesics and Jacobi fields are only as
# smooth as the dense output; asking for more makes the quadrature chase seams
ODE_QUAD_TOL = 1e-10
GEODESIC_TOL = 1e-6


def _gl(f, lo, hi):
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    return half * sum(w * f(mid + half * x) for x, w in zip(_GL_X, _GL_W))


def quadrature(f, lo, hi, tol=QUAD_TOL, panels=4, max_depth=12):
    """Adaptive composite Gauss-Legendre (order 8) of a scalar or array integrand."""
    edges = np.linspace(lo, hi, panels + 1)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        total = total + _adaptive(f, a, b, _gl(f, a, b), tol, max_depth)
    return total


def _adaptive(f, a, b, whole, tol, depth):
    m = 0.5 * (a + b)
    left, right = _gl(f, a, m), _gl(f, m, b)
    err = np.max(np.abs(left + right - whole))
    if depth == 0 or err <= tol * max(1.0, float(np.max(np.abs(whole)))):
        return left + right
    return _adaptive(f, a, m, left, tol, depth - 1) + _adaptive(f, m, b, right, tol, depth - 1)


def _segment_integral(curve, f, tol):
    return sum(quadrature(f, lo, hi, tol) for lo, hi in curve.segments)


def energy(m, curve, tol=QUAD_TOL):
    """``E = 1/2 int_a^b L(curve') dt``."""

    def integrand(t):
        d = curve.eval(t, 1)
        try:
            return evaluate_L(m, d[0], d[1])
        except InadmissibleVectorError as exc:
            raise InadmissibleVectorError(f"velocity not admissible at t={t:.12g}: {exc}", t=t) from exc

    return 0.5 * _segment_integral(curve, integrand, tol)


def legendre(m, x, v):
    """The covector ``w -> g_v(v, w)``."""
    return fundamental_tensor(m, x, v).g @ np.asarray(v, dtype=float)


def _check_breaks(curve, W):
    extra = [t for t in W.breaks if all(abs(t - tb) > 1e-12 for tb in curve.breaks)]
    if extra or (W.a, W.b) != (curve.a, curve.b):
        raise BreakMismatchError("the variational field must live on the curve's interval and breaks")


def acceleration(m, x, xdot, xddot):
    """``D^{x'}_{x} x' = x'' + 2 G(x, x')``."""
    return np.asarray(xddot) + 2.0 * LagrangianExpansion(m, x, xdot, order=2).G_value()


def first_variation(m, curve, W, tol=QUAD_TOL):
    """``dE/ds`` for a variation with field ``W``.

    Evaluates ``-int g(W, D x') + [g(W, x')]_a^b - sum_i (Leg(x'(t_i+)) - Leg(x'(t_i-)))(W(t_i))``.
    The jump sum enters with a minus sign: it collects the interior
    endpoint terms ``g(W, x'(t_i-)) - g(W, x'(t_i+))`` of the segments.
    """
    _check_breaks(curve, W)

    def integrand(t):
        c = curve.eval(t, 2)
        e = LagrangianExpansion(m, c[0], c[1], order=2)
        acc = c[2] + 2.0 * e.G_value()
        return W(t) @ e.g_value() @ acc

    integral = _segment_integral(curve, integrand, tol)
    xa, va = curve.eval(curve.a, 1)[:2]
    xb, vb = curve.eval(curve.b, 1)[:2]
    boundary = legendre(m, xb, vb) @ W(curve.b) - legendre(m, xa, va) @ W(curve.a)
    jumps = 0.0
    for tb in curve.breaks:
        x = curve(tb)
        jumps += (legendre(m, x, curve.eval(tb, 1, "right")[1]) - legendre(m, x, curve.eval(tb, 1, "left")[1])) @ W(tb)
    return -integral + boundary - jumps


def legendre_jumps(m, curve):
    """``Leg(x'(t_i+)) - Leg(x'(t_i-))`` at every break."""
    out = []
    for tb in curve.breaks:
        x = curve(tb)
        out.append(legendre(m, x, curve.eval(tb, 1, "right")[1]) - legendre(m, x, curve.eval(tb, 1, "left")[1]))
    return out


def geodesic_residual(m, curve, samples=32):
    """Max of ``|D x'| / max(1, |x'|^2)`` over Gauss nodes of every segment."""
    worst = 0.0
    for lo, hi in curve.segments:
        edges = np.linspace(lo, hi, max(2, samples // GL_ORDER) + 1)
        for a, b in zip(edges[:-1], edges[1:]):
            for xg in _GL_X:
                t = 0.5 * (a + b) + 0.5 * (b - a) * xg
                c = curve.eval(t, 2)
                acc = acceleration(m, c[0], c[1], c[2])
                worst = max(worst, float(np.linalg.norm(acc)) / max(1.0, float(c[1] @ c[1])))
    return worst


def _field_values(F, t, nderiv=1):
    return F.eval(t, nderiv)


def _cov(m_gamma, Fd, xdot):
    return Fd[1] + np.einsum("kij,i,j->k", m_gamma, Fd[0], xdot)


def _require_geodesic(m, curve, tol):
    from .geodesic import GeodesicRecord

    if isinstance(curve, GeodesicRecord):
        return
    res = geodesic_residual(m, curve)
    if res > tol:
        raise NotGeodesicError(f"curve is not a geodesic (max |D x'| = {res:.3e})", residual=res)


def _curvature_term(m, c, Vd, Wd):
    """``g(R(x', V) W, x')`` from the commutator along the chart-linear variation of ``V``."""
    R = commutator_from_jets(m, c[0], c[1], Vd[0], c[2], Vd[1], Wd[0])
    return R


def second_variation(m, geodesic, W, transverse_acc=None, tol=ODE_QUAD_TOL, geodesic_tol=GEODESIC_TOL):
    """``E''(0) = int (-g(R(x', W) W, x') + g(W', W')) dt + [g(A, x')]_a^b``.

    ``transverse_acc`` is the transverse acceleration ``A`` of the variation
    (a track or a constant vector).  By default the chart-linear variation
    ``x + s W`` is assumed, whose transverse acceleration is
    ``Gamma_{x'}(W, W)``.
    """
    _require_geodesic(m, geodesic, geodesic_tol)
    _check_breaks(geodesic, W)
    if geodesic.breaks:
        raise NotGeodesicError("second variation needs a smooth geodesic")

    def integrand(t):
        c = geodesic.eval(t, 2)
        Wd = W.eval(t, 1)
        e = LagrangianExpansion(m, c[0], c[1], order=3)
        g = e.g_value()
        Wp = _cov(e.gamma_value(), Wd, c[1])
        R = _curvature_term(m, c, Wd, Wd)
        return -(R @ g @ c[1]) + Wp @ g @ Wp

    integral = _segment_integral(geodesic, integrand, tol)

    def bracket(t):
        x, v = geodesic.eval(t, 1)[:2]
        if transverse_acc is None:
            w = W(t)
            A = christoffel(m, x, v).contract(w, w)
        elif callable(getattr(transverse_acc, "eval", None)):
            A = transverse_acc(t)
        else:
            A = np.asarray(transverse_acc, dtype=float)
        return legendre(m, x, v) @ A

    return integral + bracket(geodesic.b) - bracket(geodesic.a)


@dataclass
class CriticalityReport:
    geodesic_residual: float
    legendre_jump: float
    orthogonality_P: float
    orthogonality_Q: float
    tol: float
    critical: bool = field(init=False)

    def __post_init__(self):
        self.critical = max(self.residuals().values()) <= self.tol

    def residuals(self):
        return {
            "geodesic_residual": self.geodesic_residual,
            "legendre_jump": self.legendre_jump,
            "orthogonality_P": self.orthogonality_P,
            "orthogonality_Q": self.orthogonality_Q,
        }

    def to_dict(self):
        out = self.residuals()
        out.update(tol=self.tol, critical=self.critical)
        return out


def _orthogonality(m, patch, x, v):
    u = patch.locate(x)
    E = patch.tangent_basis(u)
    if E.shape[1] == 0:
        return 0.0
    units = E / np.linalg.norm(E, axis=0)
    return float(np.max(np.abs(legendre(m, x, v) @ units)))


def critical_point_test(m, curve, P, Q, samples=64, tol=1e-6):
    """Residuals of the criticality conditions for ``E`` on curves from ``P`` to ``Q``."""
    res = geodesic_residual(m, curve, samples)
    jumps = legendre_jumps(m, curve)
    jump = max((float(np.max(np.abs(j))) for j in jumps), default=0.0)
    xa, va = curve.eval(curve.a, 1)[:2]
    xb, vb = curve.eval(curve.b, 1)[:2]
    return CriticalityReport(res, jump, _orthogonality(m, P, xa, va), _orthogonality(m, Q, xb, vb), tol)


def _endpoint_setup(m, patch, x, v, which):
    u = patch.locate(x)
    nres = is_normal(m, patch, u, v, tol=1e-7)
    if not nres.normal:
        raise OrthogonalityError(
            f"geodesic velocity at {which} is not g-orthogonal to {patch.name!r} (residual {nres.residual:.3e})",
            residual=nres.residual,
        )
    g = fundamental_tensor(m, x, v).g
    try:
        _restricted_gram(g, patch.tangent_basis(u), patch.name)
    except DegenerateRestrictionError as exc:
        raise DegenerateRestrictionError(f"{exc} at the {which} endpoint") from exc
    return u


def index_form(m, geodesic, P, Q, V, W, tol=ODE_QUAD_TOL, geodesic_tol=GEODESIC_TOL):
    """The ``(P, Q)``-index form ``I(V, W)`` of a geodesic from ``P`` (at ``a``) to ``Q`` (at ``b``).

    ``int (-g(R(x', V) W, x') + g(V', W')) dt + g(S^Q(V, W), x'(b)) - g(S^P(V, W), x'(a))``.
    """
    _require_geodesic(m, geodesic, geodesic_tol)
    xa, va = geodesic.eval(geodesic.a, 1)[:2]
    xb, vb = geodesic.eval(geodesic.b, 1)[:2]
    uP = _endpoint_setup(m, P, xa, va, "a")
    uQ = _endpoint_setup(m, Q, xb, vb, "b")
    for F in (V, W):
        P.to_parameters(uP, F(geodesic.a))
        Q.to_parameters(uQ, F(geodesic.b))

    def integrand(t):
        c = geodesic.eval(t, 2)
        Vd, Wd = V.eval(t, 1), W.eval(t, 1)
        e = LagrangianExpansion(m, c[0], c[1], order=3)
        g, gam = e.g_value(), e.gamma_value()
        Vp, Wp = _cov(gam, Vd, c[1]), _cov(gam, Wd, c[1])
        R = _curvature_term(m, c, Vd, Wd)
        return -(R @ g @ c[1]) + Vp @ g @ Wp

    integral = _segment_integral(geodesic, integrand, tol)
    bQ = legendre(m, xb, vb) @ second_fundamental_form(m, Q, uQ, vb, V(geodesic.b), W(geodesic.b))
    bP = legendre(m, xa, va) @ second_fundamental_form(m, P, uP, va, V(geodesic.a), W(geodesic.a))
    return integral + bQ - bP


__all__ = [
    "CriticalityReport",
    "critical_point_test",
    "energy",
    "first_variation",
    "geodesic_residual",
    "index_form",
    "legendre",
    "legendre_jumps",
    "quadrature",
    "second_variation",
    "FinslerError",
]
