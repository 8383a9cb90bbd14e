"""Jacobi fields, P-Jacobi initial data, conjugate and focal points."""

from dataclasses import dataclass

import numpy as np

from .curves import Track
from .errors import MismatchedGeodesicError, NotGeodesicError, NullGeodesicError
from .geodesic import GeodesicRecord, integrate_geodesic
from .metric import evaluate_L, fundamental_tensor
from .submanifold import _restricted_gram, is_normal, normal_second_fundamental_form

ROOT_TOL = 1e-10
MIN_GUARD = 1e-10
RANK_TOL = 1e-6


def orthonormal_frame(g):
    """Columns ``E`` with ``E^T g E = diag(eps)``, ``eps = +-1``."""
    lam, Q = np.linalg.eigh(g)
    E = Q / np.sqrt(np.abs(lam))
    return E, np.sign(lam)


class JacobiField(Track):
    """A Jacobi field on a co-integrated geodesic.

    ``eval`` gives chart derivatives (so the field can be fed to the
    variation formulas); :meth:`J` and :meth:`dJ` give the field and its
    covariant derivative ``J'`` with reference ``gamma'``.
    """

    def __init__(self, bundle, index):
        rec = bundle.record
        super().__init__(rec.a, rec.b, (), rec.dim)
        self.bundle = bundle
        self.index = index
        self.curve = rec

    @property
    def geodesic(self):
        return self.bundle.record

    def J(self, t):
        E, f, fp = self.bundle.frame_and_coeffs(t)
        return E @ f[self.index]

    def dJ(self, t):
        E, f, fp = self.bundle.frame_and_coeffs(t)
        return E @ fp[self.index]

    def _eval(self, t, nderiv, seg):
        if nderiv > 1:
            raise ValueError("Jacobi fields provide one chart derivative")
        E, f, fp = self.bundle.frame_and_coeffs(t)
        J, Jp = E @ f[self.index], E @ fp[self.index]
        if nderiv == 0:
            return np.array([J])
        x, v = self.geodesic.state(t)
        from .connection import christoffel

        return np.array([J, Jp - christoffel(self.bundle.m, x, v).contract(J, v)])


class _JacobiBundle:
    """Geodesic, parallel frame and k Jacobi coefficient vectors integrated together."""

    def __init__(self, m, record, k):
        self.m, self.record, self.k = m, record, k
        self.n = m.dim

    def frame_and_coeffs(self, t):
        n, k = self.n, self.k
        y = self.record.extras(t)
        E = y[: n * n].reshape(n, n)
        f = y[n * n : n * n + k * n].reshape(k, n)
        fp = y[n * n + k * n :].reshape(k, n)
        return E, f, fp

    def node_matrices(self):
        """Jacobi fields at every integration node, shape ``(nodes, n, k)``."""
        n, k = self.n, self.k
        ys = self.record.solution.ys[:, 2 * n :]
        E = ys[:, : n * n].reshape(-1, n, n)
        f = ys[:, n * n : n * n + k * n].reshape(-1, k, n)
        return np.einsum("tij,tkj->tik", E, f)


def _check_geodesic(geodesic):
    if not isinstance(geodesic, GeodesicRecord):
        raise NotGeodesicError("Jacobi fields need an integrated geodesic (GeodesicRecord)")


def solve_jacobi(m, geodesic, J0, dJ0):
    """Jacobi fields with ``J(a) = J0`` and ``J'(a) = dJ0``.

    ``J0`` and ``dJ0`` may be single vectors or stacks of k vectors; a list
    of fields is returned for stacks.  The equation ``J'' = R(x', J) x'`` is
    solved in a parallel ``g_{x'}``-orthonormal frame co-integrated with the
    geodesic.
    """
    _check_geodesic(geodesic)
    single = np.ndim(J0) == 1
    J0 = np.atleast_2d(np.asarray(J0, dtype=float))
    dJ0 = np.atleast_2d(np.asarray(dJ0, dtype=float))
    if J0.shape != dJ0.shape or J0.shape[1] != m.dim:
        raise ValueError("J0 and dJ0 must have matching shapes (k, n)")
    k, n = J0.shape
    g0 = fundamental_tensor(m, geodesic.x0, geodesic.v0).g
    E0, _ = orthonormal_frame(g0)
    Einv = np.linalg.inv(E0)
    f0 = (Einv @ J0.T).T
    fp0 = (Einv @ dJ0.T).T
    y0 = np.concatenate([E0.ravel(), f0.ravel(), fp0.ravel()])

    def rhs(t, e, y):
        v = e.v
        E = y[: n * n].reshape(n, n)
        f = y[n * n : n * n + k * n].reshape(k, n)
        fp = y[n * n + k * n :].reshape(k, n)
        gam = e.gamma_value()
        dE = -np.einsum("kij,ia,j->ka", gam, E, v)
        M = -e.spray_curvature()
        A = np.linalg.solve(E, M @ E)
        return np.concatenate([dE.ravel(), fp.ravel(), (f @ A.T).ravel()])

    rec = integrate_geodesic(
        m, geodesic.x0, geodesic.v0, geodesic.span, geodesic.rtol, geodesic.atol, extra=(y0, rhs, 4)
    )
    bundle = _JacobiBundle(m, rec, k)
    fields = [JacobiField(bundle, i) for i in range(k)]
    return fields[0] if single else fields


def _p_initial_data(m, geodesic, P):
    x, v = geodesic.x0, geodesic.v0
    u = P.locate(x)
    res = is_normal(m, P, u, v, tol=1e-7)
    if not res.normal:
        from .errors import OrthogonalityError

        raise OrthogonalityError(f"geodesic is not g-orthogonal to {P.name!r} at a", residual=res.residual)
    g = fundamental_tensor(m, x, v).g
    E = P.tangent_basis(u)
    _restricted_gram(g, E, P.name)
    n, r = m.dim, E.shape[1]
    J0, dJ0 = [], []
    for a in range(r):
        J0.append(E[:, a])
        dJ0.append(normal_second_fundamental_form(m, P, u, v, E[:, a]))
    if r:
        _, _, Vt = np.linalg.svd(E.T @ g)
        comp = Vt[r:]
    else:
        comp = np.eye(n)
    for w in comp:
        J0.append(np.zeros(n))
        dJ0.append(w)
    return np.array(J0), np.array(dJ0)


def p_jacobi_basis(m, geodesic, P):
    """n Jacobi fields spanning the P-Jacobi fields plus those vanishing at ``a``.

    The first r have ``J(a) = e_a`` and ``J'(a) = S~(e_a)``; the remaining
    ``n - r`` have ``J(a) = 0`` and ``J'(a)`` spanning the g-orthogonal
    complement of ``T P``.
    """
    _check_geodesic(geodesic)
    J0, dJ0 = _p_initial_data(m, geodesic, P)
    return solve_jacobi(m, geodesic, J0, dJ0)


@dataclass(frozen=True)
class CriticalInstant:
    t: float
    multiplicity: int


def _sigma_ratio(Jm):
    s = np.linalg.svd(Jm, compute_uv=False)
    return s[-1] / s[0] if s[0] > 0 else 0.0


def _multiplicity(Jm, scale):
    s = np.linalg.svd(Jm, compute_uv=False)
    return int(np.sum(s <= RANK_TOL * scale))


def _zeros(fields, t_start=None):
    bundle = fields[0].bundle
    rec = bundle.record
    ts = rec.solution.ts
    n = bundle.n

    def Jmat(t):
        return np.array([f.J(t) for f in fields]).T

    def det(t):
        return np.linalg.det(Jmat(t))

    mats = bundle.node_matrices()
    col_scale = np.max(np.linalg.norm(mats, axis=1), axis=0)
    col_scale = np.where(col_scale > 0, col_scale, 1.0)
    dets = np.array([np.linalg.det(Mi / col_scale) for Mi in mats])
    ratios = np.array([_sigma_ratio(Mi / col_scale) for Mi in mats])
    t_lo = ts[0] if t_start is None else t_start
    # skip the start, where fields vanishing at a make the determinant zero
    first = 1
    while first < len(ts) and (ts[first] <= t_lo or abs(dets[first]) == 0.0):
        first += 1
    found = []
    for i in range(first, len(ts) - 1):
        if dets[i] == 0.0 or np.sign(dets[i]) != np.sign(dets[i + 1]):
            lo, hi = ts[i], ts[i + 1]
            s_lo = np.sign(dets[i])
            if dets[i] == 0.0:
                found.append(ts[i])
                continue
            while hi - lo > ROOT_TOL:
                mid = 0.5 * (lo + hi)
                if np.sign(det(mid)) == s_lo:
                    lo = mid
                else:
                    hi = mid
            found.append(0.5 * (lo + hi))
    # even-multiplicity guard: touching zeros show up as local minima of sigma_min
    for i in range(first + 1, len(ts) - 1):
        if ratios[i] <= ratios[i - 1] and ratios[i] <= ratios[i + 1]:
            lo, hi = ts[i - 1], ts[i + 1]
            phi = (np.sqrt(5) - 1) / 2

            def sr(t):
                return _sigma_ratio(Jmat(t) / col_scale)

            c, d = hi - phi * (hi - lo), lo + phi * (hi - lo)
            while hi - lo > ROOT_TOL:
                if sr(c) < sr(d):
                    hi, d = d, c
                    c = hi - phi * (hi - lo)
                else:
                    lo, c = c, d
                    d = lo + phi * (hi - lo)
            tm = 0.5 * (lo + hi)
            if sr(tm) < MIN_GUARD and all(abs(tm - t0) > 1e-6 for t0 in found):
                found.append(tm)
    out = []
    for t in sorted(found):
        mult = _multiplicity(Jmat(t) / col_scale, 1.0)
        out.append(CriticalInstant(float(t), max(mult, 1)))
    return out


def conjugate_points(m, geodesic):
    """Instants in ``(a, b]`` conjugate to ``a``, with multiplicities."""
    _check_geodesic(geodesic)
    n = m.dim
    fields = solve_jacobi(m, geodesic, np.zeros((n, n)), np.eye(n))
    return _zeros(fields)


def focal_points(m, geodesic, P):
    """P-focal instants in ``(a, b]`` with multiplicities."""
    fields = p_jacobi_basis(m, geodesic, P)
    return _zeros(fields)


def determinant_table(fields, ts):
    """``det[J_1 ... J_n](t)`` at the requested instants."""
    return np.array([np.linalg.det(np.array([f.J(t) for f in fields]).T) for t in ts])


def _same_geodesic(J1, J2):
    r1, r2 = J1.geodesic, J2.geodesic
    if r1.span != r2.span or not (np.allclose(r1.x0, r2.x0, atol=1e-12) and np.allclose(r1.v0, r2.v0, atol=1e-12)):
        raise MismatchedGeodesicError("Jacobi fields live on different geodesics")


def wronskian(m, geodesic, J1, J2):
    """``t -> g(J1, J2') - g(J1', J2)`` and its maximum drift from the value at ``a``."""
    _same_geodesic(J1, J2)

    def omega(t):
        x, v = J1.geodesic.state(t)
        g = fundamental_tensor(m, x, v).g
        return J1.J(t) @ g @ J2.dJ(t) - J1.dJ(t) @ g @ J2.J(t)

    ts = J1.geodesic.solution.ts
    w0 = omega(ts[0])
    drift = max(abs(omega(t) - w0) for t in ts)
    return omega, float(drift)


def dexp(m, p, v, w):
    """``d exp_p(v)[w] = J(1)`` for the Jacobi field with ``J(0) = 0``, ``J'(0) = w``."""
    from .errors import DomainExitError, ExpDomainError

    try:
        rec = integrate_geodesic(m, p, v, (0.0, 1.0))
        J = solve_jacobi(m, rec, np.zeros(m.dim), w)
    except DomainExitError as exc:
        raise ExpDomainError(f"exp_p(v) undefined: exit at t={exc.t_exit:.10g}", exc.t_exit) from exc
    return J.J(1.0)


def orthogonality_report(m, geodesic, J, samples=41):
    """Checks of the tangential/normal structure of a Jacobi field.

    Returns the deviation of ``g(x', J)`` from an affine function, the Jacobi
    residuals of ``tan J`` and ``nor J``, and the commutation residual
    ``|(tan J)' - tan(J')|``.
    """
    rec = J.geodesic
    ts = np.linspace(rec.a, rec.b, samples)
    L0 = evaluate_L(m, rec.x0, rec.v0)
    h = []
    for t in ts:
        x, v = rec.state(t)
        h.append(fundamental_tensor(m, x, v).g @ v @ J.J(t))
    h = np.array(h)
    line = h[0] + (ts - ts[0]) * (h[-1] - h[0]) / (ts[-1] - ts[0])
    report = {"affine_deviation": float(np.max(np.abs(h - line)))}
    if abs(L0) < 1e-12 * max(1.0, float(rec.v0 @ rec.v0)):
        raise NullGeodesicError("tangent/normal splitting needs L(x') != 0")
    from .curvature import jacobi_operator_spray

    tan_res = nor_res = com_res = 0.0
    dt = 1e-5 * (rec.b - rec.a)
    for t in ts[1:-1]:
        x, v = rec.state(t)
        g = fundamental_tensor(m, x, v).g
        M = jacobi_operator_spray(m, x, v)
        Jt, Jp = J.J(t), J.dJ(t)
        phi = (v @ g @ Jt) / L0
        phi2 = (v @ g @ (M @ Jt)) / L0
        # tan J = phi x' has (tan J)'' = phi'' x' and R(x', tan J) x' = phi M x'
        tan_res = max(tan_res, float(np.linalg.norm(phi2 * v - phi * (M @ v))))
        nor_res = max(nor_res, float(np.linalg.norm(-phi2 * v + phi * (M @ v))))

        def phi_at(s):
            xs, vs = rec.state(s)
            return (fundamental_tensor(m, xs, vs).g @ vs @ J.J(s)) / L0

        dphi = (phi_at(t + dt) - phi_at(t - dt)) / (2 * dt)
        com_res = max(com_res, float(np.linalg.norm(dphi * v - (v @ g @ Jp) / L0 * v)))
    report.update(tan_jacobi_residual=tan_res, nor_jacobi_residual=nor_res, commutation_residual=com_res)
    return report
