"""Spray, nonlinear connection, Chern Christoffel symbols and covariant derivatives."""

from dataclasses import dataclass

import numpy as np

from . import jets
from .errors import DegenerateTensorError, InadmissibleVectorError, JetDomainError
from .metric import check_point, degenerate, is_admissible


class LagrangianExpansion:
    """Taylor expansion of ``L`` at ``(x, v)`` in all 2n directions (x first, then v).

    Everything downstream is read off this single lift by differentiating and
    truncating jets.  With ``order = K`` the derived jets have orders

    ====================  =========
    g, spray G            K - 2
    N = dG/dv             K - 3
    Christoffel symbols   K - 3
    ====================  =========

    so ``K = 2`` suffices for geodesics, ``K = 3`` for parallel transport and
    ``K = 4`` for curvature.
    """

    def __init__(self, m, x, v, order=4, check=True):
        x, v = check_point(m, x, v)
        self.m, self.x, self.v, self.order = m, x, v, order
        n = self.n = m.dim
        dirs = [("x", i) for i in range(n)] + [("v", i) for i in range(n)]
        try:
            self.L = jets.lift(m.lagrangian, x, v, dirs, order)
        except JetDomainError as exc:
            raise InadmissibleVectorError(
                f"L is not evaluable at x={x.tolist()}, v={v.tolist()}: {exc}", x=x.tolist(), v=v.tolist()
            ) from exc
        self.check = check
        self._g = self._G = self._N = self._gamma = None

    def dx(self, i):
        return i

    def dv(self, i):
        return self.n + i

    @property
    def g(self):
        """n x n nested list of jets (order K - 2)."""
        if self._g is None:
            n = self.n
            Lv = [self.L.diff(self.dv(i)) for i in range(n)]
            self._Lv = Lv
            self._g = [[0.5 * Lv[i].diff(self.dv(j)) for j in range(n)] for i in range(n)]
            if self.check:
                g0 = np.array([[gij.value for gij in row] for row in self._g])
                if degenerate(g0, self.m.degeneracy_threshold):
                    raise DegenerateTensorError(
                        f"fundamental tensor of {self.m.name!r} is degenerate at v={self.v.tolist()}",
                        x=self.x.tolist(),
                        v=self.v.tolist(),
                    )
        return self._g

    def g_value(self):
        return np.array([[gij.value for gij in row] for row in self.g])

    @property
    def G(self):
        """Spray coefficients as jets of order K - 2."""
        if self._G is None:
            n, K = self.n, self.order
            g = self.g
            sp = g[0][0].space
            vj = [jets.Jet.variable(sp, self.v[m], self.dv(m)) for m in range(n)]
            rhs = []
            for l in range(n):
                Lvx = [self._Lv[l].diff(self.dx(m)) for m in range(n)]
                acc = -self.L.diff(self.dx(l)).truncate(K - 2)
                for m in range(n):
                    acc = acc + Lvx[m] * vj[m]
                rhs.append(0.25 * acc)
            self._G = jets.solve(g, rhs)
        return self._G

    def G_value(self):
        return np.array([Gi.value for Gi in self.G])

    @property
    def N(self):
        """Nonlinear connection ``N[i][j] = dG^i/dv^j`` as jets of order K - 3."""
        if self._N is None:
            self._N = [[Gi.diff(self.dv(j)) for j in range(self.n)] for Gi in self.G]
        return self._N

    @property
    def gamma(self):
        """Christoffel symbols ``gamma[k][i][j]`` as jets of order K - 3."""
        if self._gamma is None:
            n, K = self.n, self.order
            N = self.N
            g = [[gij.truncate(K - 3) for gij in row] for row in self.g]

            def delta(i, s, j):
                # horizontal derivative of g_sj along x^i
                gsj = self.g[s][j]
                acc = gsj.diff(self.dx(i))
                for m in range(n):
                    acc = acc - N[m][i] * gsj.diff(self.dv(m))
                return acc

            dg = [[[delta(i, s, j) for j in range(n)] for s in range(n)] for i in range(n)]
            pairs = [(i, j) for i in range(n) for j in range(i, n)]
            rhs = [[0.5 * (dg[i][s][j] + dg[j][s][i] - dg[s][i][j]) for s in range(n)] for i, j in pairs]
            sol = jets.solve_many(g, rhs)
            gam = [[[None] * n for _ in range(n)] for _ in range(n)]
            for (i, j), col in zip(pairs, sol):
                for k in range(n):
                    gam[k][i][j] = gam[k][j][i] = col[k]
            self._gamma = gam
        return self._gamma

    def gamma_value(self):
        n = self.n
        out = np.empty((n, n, n))
        for k in range(n):
            for i in range(n):
                for j in range(n):
                    out[k, i, j] = self.gamma[k][i][j].value
        return out

    def gamma_derivatives(self):
        """``(dGamma/dx, dGamma/dv)`` with shapes ``(n, n, n, n)``; last axis is the derivative slot."""
        n = self.n
        dx = np.empty((n, n, n, n))
        dv = np.empty((n, n, n, n))
        for k in range(n):
            for i in range(n):
                for j in range(i, n):
                    grad = self.gamma[k][i][j].gradient()
                    dx[k, i, j] = dx[k, j, i] = grad[:n]
                    dv[k, i, j] = dv[k, j, i] = grad[n:]
        return dx, dv

    def spray_curvature(self):
        """``R^i_k = 2 dG^i/dx^k - v^j d2G^i/dx^j dv^k + 2 G^j d2G^i/dv^j dv^k - N^i_j N^j_k``."""
        n, v = self.n, self.v
        G = self.G
        Gv = self.G_value()
        Nv = np.array([[G[i].partial(self.dv(j)) for j in range(n)] for i in range(n)])
        R = np.empty((n, n))
        for i in range(n):
            for k in range(n):
                r = 2.0 * G[i].partial(self.dx(k))
                for j in range(n):
                    r -= v[j] * G[i].partial(self.dx(j), self.dv(k))
                    r += 2.0 * Gv[j] * G[i].partial(self.dv(j), self.dv(k))
                R[i, k] = r
        return R - Nv @ Nv


@dataclass(frozen=True)
class SprayData:
    x: np.ndarray
    v: np.ndarray
    G: np.ndarray
    N: np.ndarray


@dataclass(frozen=True)
class ChristoffelField:
    x: np.ndarray
    v: np.ndarray
    gamma: np.ndarray

    def contract(self, X, Y):
        """``Gamma^k_ij X^i Y^j``."""
        return np.einsum("kij,i,j->k", self.gamma, X, Y)


def spray(m, x, v):
    e = LagrangianExpansion(m, x, v, order=3)
    N = np.array([[Nij.value for Nij in row] for row in e.N])
    return SprayData(e.x, e.v, e.G_value(), N)


def spray_G(m, x, v):
    """Spray coefficients only (cheapest lift, used by the integrators)."""
    return LagrangianExpansion(m, x, v, order=2).G_value()


def christoffel(m, x, v):
    e = LagrangianExpansion(m, x, v, order=3)
    return ChristoffelField(e.x, e.v, e.gamma_value())


def _reference(W_ref, curve, t, side):
    if W_ref is None:
        return curve.eval(t, 1, side)[1]
    if callable(getattr(W_ref, "eval", None)):
        return W_ref.eval(t, 0, side)[0]
    return np.asarray(W_ref, dtype=float)


def _check_reference(m, x, w):
    if not is_admissible(m, x, w):
        raise InadmissibleVectorError(
            f"reference vector {np.asarray(w).tolist()} is not admissible at {np.asarray(x).tolist()}",
            x=np.asarray(x).tolist(),
            v=np.asarray(w).tolist(),
        )


def covariant_derivative(m, curve, X, W_ref=None, t=0.0, side=None):
    """``D^W X = X' + Gamma(W)(X, curve')`` at ``t``.

    ``W_ref`` defaults to the velocity of ``curve``.
    """
    d = curve.eval(t, 1, side)
    x, xdot = d[0], d[1]
    Xd = X.eval(t, 1, side)
    w = _reference(W_ref, curve, t, side)
    _check_reference(m, x, w)
    return Xd[1] + christoffel(m, x, w).contract(Xd[0], xdot)


def check_almost_g_compat(m, curve, X, Y, W_ref=None, t=0.0, side=None):
    """Residual of ``d/dt g_W(X, Y) = g_W(DX, Y) + g_W(X, DY) + 2 C_W(DW, X, Y)``.

    ``d/dt g_W`` is taken exactly by lifting ``L`` along the curve's 1-jet
    ``(x + s x', W + s W')``.
    """
    from .metric import cartan_tensor, fundamental_tensor

    d = curve.eval(t, 1, side)
    x, xdot = d[0], d[1]
    if W_ref is None:
        Wd = curve.eval(t, 2, side)[1:]
    else:
        Wd = W_ref.eval(t, 1, side)
    w, wdot = Wd[0], Wd[1]
    _check_reference(m, x, w)
    Xd = X.eval(t, 1, side)
    Yd = Y.eval(t, 1, side)
    n = m.dim
    # g_W(X, Y) along the curve as a function of one parameter, exact to first order
    dirs = [(xdot, wdot)] + [(np.zeros(n), e) for e in np.eye(n)]
    Lj = jets.lift(m.lagrangian, x, w, dirs, 3)
    g_jet = [[0.5 * Lj.diff(1 + i).diff(1 + j) for j in range(n)] for i in range(n)]
    g = np.array([[gij.value for gij in row] for row in g_jet])
    gdot = np.array([[gij.partial(0) for gij in row] for row in g_jet])
    lhs = Xd[1] @ g @ Yd[0] + Xd[0] @ g @ Yd[1] + Xd[0] @ gdot @ Yd[0]

    gam = christoffel(m, x, w)
    DX = Xd[1] + gam.contract(Xd[0], xdot)
    DY = Yd[1] + gam.contract(Yd[0], xdot)
    DW = wdot + gam.contract(w, xdot)
    gt = fundamental_tensor(m, x, w).g
    C = cartan_tensor(m, x, w)
    rhs = DX @ gt @ Yd[0] + Xd[0] @ gt @ DY + 2.0 * C(DW, Xd[0], Yd[0])
    return abs(lhs - rhs)
