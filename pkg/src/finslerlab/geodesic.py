"""Geodesics, the exponential map and parallel transport."""

import numpy as np

from .connection import LagrangianExpansion, christoffel
from .curves import BREAK_TOL, Track
from .errors import DomainExitError, ExpDomainError, InadmissibleVectorError
from .integrator import OdeSolution, integrate
from .metric import check_point, evaluate_L, is_admissible

DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-12

# quintic Hermite basis on [0, 1], coefficients of s^0..s^5, in the order
# p0, h*m0, h^2*a0, h^2*a1, h*m1, p1
_QUINTIC = np.array(
    [
        [1, 0, 0, -10, 15, -6],
        [0, 1, 0, -6, 8, -3],
        [0, 0, 0.5, -1.5, 1.5, -0.5],
        [0, 0, 0, 0.5, -1, 0.5],
        [0, 0, 0, -4, 7, -3],
        [0, 0, 0, 10, -15, 6],
    ],
    dtype=float,
)


def _poly_derivs(coefs, s, nderiv):
    """Values of a polynomial (rows of ``coefs`` low-to-high) and its s-derivatives at ``s``."""
    out = []
    c = coefs
    for _ in range(nderiv + 1):
        powers = s ** np.arange(c.shape[1])
        out.append(c @ powers)
        c = c[:, 1:] * np.arange(1, c.shape[1])
        if c.shape[1] == 0:
            c = np.zeros((coefs.shape[0], 1))
    return out


class GeodesicRecord(Track):
    """Integrated geodesic on ``[a, b]`` with dense output.

    Positions and velocities between steps come from quintic Hermite
    interpolation of the position (the acceleration ``-2G`` is known at every
    step).  Extra co-integrated components are kept in ``solution``.
    """

    def __init__(self, m, solution, rtol, atol):
        ts = solution.ts
        super().__init__(min(ts[0], ts[-1]), max(ts[0], ts[-1]), (), m.dim)
        self.m = m
        self.solution = solution
        self.rtol, self.atol = rtol, atol
        n = m.dim
        self.x0 = solution.ys[0, :n].copy()
        self.v0 = solution.ys[0, n : 2 * n].copy()
        self.L0 = evaluate_L(m, self.x0, self.v0)
        Ls = np.array([evaluate_L(m, y[:n], y[n : 2 * n]) for y in solution.ys])
        self.drift = float(np.max(np.abs(Ls - self.L0)))
        self.energy = 0.5 * self.L0 * (self.b - self.a)

    @property
    def span(self):
        return (self.a, self.b)

    def _eval(self, t, nderiv, seg):
        sol = self.solution
        n = self.dim
        if len(sol.ts) == 1:
            raise ValueError("degenerate geodesic record")
        i = sol.locate(t)
        t0, t1 = sol.ts[i], sol.ts[i + 1]
        h = t1 - t0
        s = (t - t0) / h
        y0, y1, f0, f1 = sol.ys[i], sol.ys[i + 1], sol.fs[i], sol.fs[i + 1]
        data = np.array([y0[:n], h * y0[n : 2 * n], h * h * f0[n : 2 * n], h * h * f1[n : 2 * n], h * y1[n : 2 * n], y1[:n]])
        coefs = data.T @ _QUINTIC  # (n, 6)
        ds = _poly_derivs(coefs, s, max(nderiv, 1))
        out = [ds[k] / h**k for k in range(nderiv + 1)]
        if nderiv >= 2:
            out[2] = -2.0 * LagrangianExpansion(self.m, out[0], out[1], order=2, check=False).G_value()
        return np.array(out)

    def state(self, t):
        """Interpolated ``(x, v)``."""
        d = self.eval(t, 1)
        return d[0], d[1]

    def extras(self, t):
        """Co-integrated components at ``t``."""
        return self.solution.refine(t)[0][2 * self.dim :]

    def endpoint(self):
        y = self.solution.ys[-1]
        return y[: self.dim].copy(), y[self.dim : 2 * self.dim].copy()

    def sample_table(self, ts):
        """Rows ``t, x..., v..., L`` at the requested instants."""
        rows = []
        for t in ts:
            x, v = self.state(t)
            rows.append([t, *x, *v, evaluate_L(self.m, x, v)])
        return np.array(rows)


def _valid(m):
    n = m.dim

    def valid(t, y):
        x, v = y[:n], y[n : 2 * n]
        return bool(np.all(np.isfinite(y))) and bool(m.chart_domain(x)) and is_admissible(m, x, v)

    return valid


def integrate_geodesic(
    m,
    x0,
    v0,
    span=(0.0, 1.0),
    rtol=DEFAULT_RTOL,
    atol=DEFAULT_ATOL,
    method="rkf45",
    step=None,
    stops=(),
    extra=None,
):
    """Solve ``x'' = -2 G(x, x')`` from ``(x0, v0)`` at ``span[0]``.

    ``extra = (y0, rhs, order)`` co-integrates additional components:
    ``rhs(t, expansion, y_extra)`` receives the :class:`LagrangianExpansion`
    (lifted to ``order``) at the current ``(x, v)``.
    """
    x0, v0 = check_point(m, x0, v0)
    if not is_admissible(m, x0, v0):
        raise InadmissibleVectorError(
            f"initial velocity {v0.tolist()} is not admissible", x=x0.tolist(), v=v0.tolist()
        )
    a, b = float(span[0]), float(span[1])
    if not b > a:
        raise ValueError(f"geodesic span must be increasing, got {list(span)}")
    n = m.dim
    order = 2
    y0 = np.concatenate([x0, v0])
    if extra is not None:
        ey0, erhs, order = extra
        y0 = np.concatenate([y0, np.asarray(ey0, dtype=float).ravel()])

    def rhs(t, y):
        x, v = y[:n], y[n : 2 * n]
        e = LagrangianExpansion(m, x, v, order=order)
        out = [v, -2.0 * e.G_value()]
        if extra is not None:
            out.append(np.asarray(erhs(t, e, y[2 * n :]), dtype=float).ravel())
        return np.concatenate(out)

    sol = integrate(rhs, a, y0, b, rtol=rtol, atol=atol, method=method, step=step, valid=_valid(m), stops=stops)
    return GeodesicRecord(m, sol, rtol, atol)


def exponential_map(m, p, v, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL):
    """``exp_p(v) = gamma_v(1)``."""
    try:
        rec = integrate_geodesic(m, p, v, (0.0, 1.0), rtol=rtol, atol=atol)
    except DomainExitError as exc:
        raise ExpDomainError(f"exp_p(v) undefined: geodesic exits at t={exc.t_exit:.10g} < 1", exc.t_exit) from exc
    return rec.endpoint()[0]


class SolutionTrack(Track):
    """A vector field along a curve backed by per-segment ODE solutions."""

    def __init__(self, curve, pieces, components):
        super().__init__(curve.a, curve.b, curve.breaks, components.stop - components.start)
        self.curve = curve
        self.pieces = pieces
        self.components = components
        self._rhs = None

    def _eval(self, t, nderiv, seg):
        sol = self.pieces[seg]
        y, dy = sol.refine(t)
        out = [y[self.components], dy[self.components]]
        if nderiv > 1:
            raise ValueError("ODE-backed fields provide at most one derivative")
        return np.array(out[: nderiv + 1])


def _transport_rhs_along(m, curve, lo, hi, k):
    n = m.dim

    def rhs(t, y):
        side = "right" if abs(t - lo) <= BREAK_TOL else "left" if abs(t - hi) <= BREAK_TOL else None
        d = curve.eval(t, 1, side) if curve.breaks else curve.eval(t, 1)
        x, xdot = d[0], d[1]
        gam = christoffel(m, x, xdot).gamma
        X = y.reshape(k, n)
        return -np.einsum("kij,ai,j->ak", gam, X, xdot).ravel()

    return rhs


def parallel_transport(m, curve, w0, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL):
    """Parallel field ``X`` with ``D^{curve'} X = 0`` and ``X(a) = w0``.

    ``w0`` may be a single vector or a stack of vectors (transported
    together).  Along a :class:`GeodesicRecord` the transport is
    co-integrated with the geodesic itself.
    """
    w0 = np.atleast_2d(np.asarray(w0, dtype=float))
    k, n = w0.shape
    if n != m.dim:
        raise ValueError(f"vectors must have dimension {m.dim}")
    if isinstance(curve, GeodesicRecord):
        x0, v0 = curve.x0, curve.v0

        def erhs(t, e, y):
            gam = e.gamma_value()
            v = e.v
            return -np.einsum("kij,ai,j->ak", gam, y.reshape(k, n), v)

        rec = integrate_geodesic(m, x0, v0, curve.span, curve.rtol, curve.atol, extra=(w0, erhs, 3))
        fields = [SolutionTrack(rec, [rec.solution], slice(2 * n + i * n, 2 * n + (i + 1) * n)) for i in range(k)]
        return fields[0] if k == 1 else fields
    pieces = []
    y = w0.ravel()
    for lo, hi in curve.segments:
        sol = integrate(_transport_rhs_along(m, curve, lo, hi, k), lo, y, hi, rtol=rtol, atol=atol)
        pieces.append(sol)
        y = sol.ys[-1]
    fields = [SolutionTrack(curve, pieces, slice(i * n, (i + 1) * n)) for i in range(k)]
    return fields[0] if k == 1 else fields


__all__ = [
    "GeodesicRecord",
    "OdeSolution",
    "SolutionTrack",
    "exponential_map",
    "integrate_geodesic",
    "parallel_transport",
]
