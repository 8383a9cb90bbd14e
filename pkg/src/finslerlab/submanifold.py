"""Parametric submanifolds, normality, tangent/normal splitting and second fundamental forms."""

from dataclasses import dataclass

import numpy as np

from . import jets
from .connection import christoffel
from .errors import (
    DegenerateRestrictionError,
    ImmersionRankError,
    NoNormalSectionError,
    NotOnSubmanifoldError,
    NotTangentError,
    OrthogonalityError,
)
from .metric import check_point, fundamental_tensor, is_admissible

RANK_TOL = 1e-9
NORMAL_TOL = 1e-9
RESTRICTION_TOL = 1e-10
TANGENCY_TOL = 1e-7


class SubmanifoldPatch:
    """Immersion ``u in R^r -> x(u)`` into an n-dimensional chart.

    ``immersion`` takes a sequence of r parameters (floats or jets) and
    returns n coordinates.  ``r = 0`` describes a point.
    """

    def __init__(self, n, r, immersion, u0=None, name="custom", spec=None):
        self.n, self.r = int(n), int(r)
        self.immersion = immersion
        self.u0 = np.zeros(self.r) if u0 is None else np.asarray(u0, dtype=float)
        self.name = name
        self.spec = spec or {"patch": name}

    def __repr__(self):
        return f"SubmanifoldPatch({self.name!r}, n={self.n}, r={self.r})"

    def _expand(self, u, order):
        u = np.asarray(u, dtype=float).reshape(self.r)
        if self.r == 0:
            return [jets.Jet.constant(jets.JetSpace.get(1, order), float(c)) for c in self.immersion(u)]
        sp = jets.JetSpace.get(self.r, order)
        uj = [jets.Jet.variable(sp, u[a], a) for a in range(self.r)]
        out = []
        for c in self.immersion(uj):
            out.append(c if jets.is_jet(c) else jets.Jet.constant(sp, float(c)))
        return out

    def point(self, u=None):
        u = self.u0 if u is None else u
        return np.array([float(jets.value(c)) for c in self.immersion(np.asarray(u, dtype=float))])

    def tangent_basis(self, u=None):
        """n x r matrix of ``dx/du^a``; raises if the immersion rank drops."""
        u = self.u0 if u is None else u
        if self.r == 0:
            return np.zeros((self.n, 0))
        xs = self._expand(u, 1)
        E = np.array([[xi.partial(a) for a in range(self.r)] for xi in xs])
        sv = np.linalg.svd(E, compute_uv=False)
        if sv[-1] < RANK_TOL * max(1.0, sv[0]):
            raise ImmersionRankError(f"immersion {self.name!r} has rank < {self.r} at u={np.ravel(u).tolist()}")
        return E

    def hessian(self, u=None):
        """``d2x/du^a du^b`` with shape ``(n, r, r)``."""
        u = self.u0 if u is None else u
        if self.r == 0:
            return np.zeros((self.n, 0, 0))
        xs = self._expand(u, 2)
        return np.array([[[xi.partial(a, b) for b in range(self.r)] for a in range(self.r)] for xi in xs])

    def to_parameters(self, u, U):
        """Components of a tangent vector ``U`` in the basis ``dx/du^a``."""
        E = self.tangent_basis(u)
        U = np.asarray(U, dtype=float)
        if self.r == 0:
            if np.linalg.norm(U) > TANGENCY_TOL:
                raise NotTangentError(f"nonzero vector {U.tolist()} is not tangent to a point")
            return np.zeros(0)
        c, *_ = np.linalg.lstsq(E, U, rcond=None)
        resid = np.linalg.norm(E @ c - U)
        if resid > TANGENCY_TOL * max(1.0, np.linalg.norm(U)):
            raise NotTangentError(f"vector {U.tolist()} is not tangent to {self.name!r} (residual {resid:.3e})")
        return c

    def locate(self, x, guess=None, tol=1e-9):
        """Parameter of the point of the patch nearest ``x`` (Gauss-Newton)."""
        x = np.asarray(x, dtype=float)
        u = np.array(self.u0 if guess is None else guess, dtype=float)
        if self.r > 0:
            for _ in range(100):
                d = self.point(u) - x
                E = self.tangent_basis(u)
                step, *_ = np.linalg.lstsq(E, -d, rcond=None)
                u = u + step
                if np.linalg.norm(step) < 1e-15 * max(1.0, np.linalg.norm(u)):
                    break
        dist = float(np.linalg.norm(self.point(u) - x))
        if dist > tol:
            raise NotOnSubmanifoldError(
                f"point {x.tolist()} is {dist:.3e} away from {self.name!r}", distance=dist
            )
        return u

    # primitives -----------------------------------------------------------

    @classmethod
    def at_point(cls, p):
        p = [float(c) for c in p]
        return cls(len(p), 0, lambda u: list(p), name="point", spec={"patch": "point", "p": p})

    @classmethod
    def affine(cls, p, directions, u0=None):
        """``p + sum_a u^a d_a``; a line for one direction, a hyperplane for n-1."""
        p = np.asarray(p, dtype=float)
        D = np.atleast_2d(np.asarray(directions, dtype=float))

        def f(u):
            return [p[i] + sum(u[a] * D[a, i] for a in range(len(D))) for i in range(len(p))]

        name = "line" if len(D) == 1 else "affine"
        return cls(len(p), len(D), f, u0, name, {"patch": name, "p": p.tolist(), "directions": D.tolist()})

    @classmethod
    def line(cls, p, d, u0=0.0):
        return cls.affine(p, [d], [u0])

    @classmethod
    def circle(cls, center, radius, u0=0.0):
        """``center + radius (cos u, sin u)`` in a 2-dimensional chart."""
        c0, c1 = (float(c) for c in center)
        R = float(radius)
        return cls(
            2,
            1,
            lambda u: [c0 + R * jets.cos(u[0]), c1 + R * jets.sin(u[0])],
            [u0],
            "circle",
            {"patch": "circle", "center": [c0, c1], "radius": R},
        )

    @classmethod
    def graph(cls, coefficients, u0=0.0):
        """Planar curve ``(u, sum_k c_k u^k)``."""
        coefs = [float(c) for c in coefficients]

        def f(u):
            t = u[0]
            y = 0.0 * t
            for c in reversed(coefs):
                y = y * t + c
            return [t, y]

        return cls(2, 1, f, [u0], "graph", {"patch": "graph", "coefficients": coefs})

    @classmethod
    def round_sphere(cls, center, radius, u0=(np.pi / 2, 0.0)):
        """2-sphere in a 3-dimensional chart, parametrized by polar angles."""
        c = [float(v) for v in center]
        R = float(radius)

        def f(u):
            s = jets.sin(u[0])
            return [c[0] + R * s * jets.cos(u[1]), c[1] + R * s * jets.sin(u[1]), c[2] + R * jets.cos(u[0])]

        return cls(3, 2, f, u0, "sphere", {"patch": "sphere", "center": c, "radius": R})

    @classmethod
    def from_function(cls, n, r, f, u0=None, name="custom"):
        return cls(n, r, f, u0, name)


def _scale(g):
    return max(1.0, float(np.max(np.abs(g))))


@dataclass(frozen=True)
class NormalityResult:
    normal: bool
    residual: float
    relative: float

    def __bool__(self):
        return self.normal


def is_normal(m, patch, u, v, tol=NORMAL_TOL):
    """Whether ``g_v(v, dx/du^a) = 0`` for every tangent basis vector.

    ``residual`` is the raw maximum; the verdict uses it relative to
    ``|v| |e_a| max|g|``, which makes it invariant under ``v -> lambda v``.
    """
    x = patch.point(u)
    x, v = check_point(m, x, v)
    g = fundamental_tensor(m, x, v).g
    E = patch.tangent_basis(u)
    if E.shape[1] == 0:
        return NormalityResult(True, 0.0, 0.0)
    gv = g @ v
    raw = np.abs(gv @ E)
    rel = raw / (np.linalg.norm(v) * np.linalg.norm(E, axis=0) * _scale(g))
    return NormalityResult(bool(np.max(rel) <= tol), float(np.max(raw)), float(np.max(rel)))


def _restricted_gram(g, E, name):
    if E.shape[1] == 0:
        return np.zeros((0, 0))
    Gm = E.T @ g @ E
    scale = _scale(g) * max(1.0, float(np.max(np.linalg.norm(E, axis=0)))) ** 2
    if abs(np.linalg.det(Gm)) < RESTRICTION_TOL * scale ** E.shape[1]:
        raise DegenerateRestrictionError(f"g_N restricted to the tangent space of {name!r} is degenerate")
    return Gm


def split_tan_nor(m, patch, u, N, Y):
    """``Y = tan + nor`` with ``tan`` tangent and ``nor`` g_N-orthogonal to the patch."""
    x = patch.point(u)
    x, N = check_point(m, x, N)
    g = fundamental_tensor(m, x, N).g
    E = patch.tangent_basis(u)
    Y = np.asarray(Y, dtype=float)
    if E.shape[1] == 0:
        return np.zeros_like(Y), Y.copy()
    Gm = _restricted_gram(g, E, patch.name)
    tan = E @ np.linalg.solve(Gm, E.T @ g @ Y)
    return tan, Y - tan


def normal_section(m, patch, u, guess=None, max_iter=60):
    """A g-normal admissible vector at ``x(u)`` by damped Newton from ``guess``.

    The default guess is the Euclidean normal direction (the first left
    singular vector not spanned by the tangent basis).  The result has the
    Euclidean length of the guess.
    """
    x = patch.point(u)
    E = patch.tangent_basis(u)
    if guess is None:
        Uf, _, _ = np.linalg.svd(E if E.shape[1] else np.zeros((patch.n, 1)), full_matrices=True)
        guess = Uf[:, patch.r] if patch.r < patch.n else Uf[:, 0]
    v = np.asarray(guess, dtype=float).copy()
    length = np.linalg.norm(v)
    if E.shape[1] == 0:
        if not is_admissible(m, x, v):
            raise NoNormalSectionError(f"guess {v.tolist()} is not admissible")
        return v

    def phi(w):
        g = fundamental_tensor(m, x, w).g
        return E.T @ g @ w, g

    try:
        res, g = phi(v)
        for _ in range(max_iter):
            if np.max(np.abs(res)) <= 1e-14 * _scale(g) * length * max(1.0, np.max(np.linalg.norm(E, axis=0))):
                break
            J = np.vstack([E.T @ g, v[None, :] / length])
            step, *_ = np.linalg.lstsq(J, np.concatenate([-res, [0.0]]), rcond=None)
            lam = 1.0
            while lam > 1e-6:
                w = v + lam * step
                w *= length / np.linalg.norm(w)
                if is_admissible(m, x, w):
                    r2, g2 = phi(w)
                    if np.linalg.norm(r2) < np.linalg.norm(res) or lam == 1.0 and np.linalg.norm(r2) < 1e-12:
                        v, res, g = w, r2, g2
                        break
                lam *= 0.5
            else:
                break
    except (ValueError, ArithmeticError) as exc:
        raise NoNormalSectionError(f"normal section failed at u={np.ravel(u).tolist()}: {exc}") from exc
    if not is_normal(m, patch, u, v, tol=1e-10):
        raise NoNormalSectionError(f"no g-normal admissible vector near {np.asarray(guess).tolist()}")
    return v


def _require_normal(m, patch, u, N):
    res = is_normal(m, patch, u, N, tol=1e-7)
    if not res.normal:
        raise OrthogonalityError(
            f"N={np.asarray(N).tolist()} is not g_N-normal to {patch.name!r} (residual {res.residual:.3e})",
            residual=res.residual,
        )


def second_fundamental_form(m, patch, u, N, U, W):
    """``S_N(U, W) = nor_N(nabla^N_U W)`` for tangent vectors ``U, W``.

    ``W`` is extended as the coordinate field with constant parameter
    components, so ``nabla^N_U W = d2x(U, W) + Gamma_N(W, U)``.
    """
    _require_normal(m, patch, u, N)
    n = patch.n
    if patch.r == 0:
        return np.zeros(n)
    Uh = patch.to_parameters(u, U)
    Wh = patch.to_parameters(u, W)
    E = patch.tangent_basis(u)
    x = patch.point(u)
    d2 = np.einsum("iab,a,b->i", patch.hessian(u), Uh, Wh)
    gam = christoffel(m, x, N).contract(E @ Wh, E @ Uh)
    return split_tan_nor(m, patch, u, N, d2 + gam)[1]


def normal_derivative(m, patch, u, N, U):
    """Derivative along ``U`` of a normal section through ``N``.

    Differentiating ``g_N(N, e_a) = 0`` gives the r linear conditions
    ``g_N(e_a, N') = -(d_x g_N)(x_U)(N, e_a) - g_N(N, d_U e_a)``; the
    remaining freedom only moves ``N'`` inside the normal space and is fixed
    by the minimum-norm solution with ``N . N' = 0``.
    """
    x = patch.point(u)
    x, N = check_point(m, x, N)
    Uh = patch.to_parameters(u, U)
    E = patch.tangent_basis(u)
    xU = E @ Uh
    n = patch.n
    dirs = [(xU, np.zeros(n))] + [(np.zeros(n), e) for e in np.eye(n)]
    Lj = jets.lift(m.lagrangian, x, N, dirs, 3)
    g = np.empty((n, n))
    dg = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            gij = 0.5 * Lj.diff(1 + i).diff(1 + j)
            g[i, j] = gij.value
            dg[i, j] = gij.partial(0)
    dE = np.einsum("iab,b->ia", patch.hessian(u), Uh)
    rhs = -(N @ dg @ E) - (N @ g @ dE)
    A = np.vstack([E.T @ g, N[None, :]])
    b = np.concatenate([rhs, [0.0]])
    Nd, *_ = np.linalg.lstsq(A, b, rcond=None)
    return Nd


def normal_second_fundamental_form(m, patch, u, N, U):
    """``S~_N(U) = tan_N(nabla^N_U N)`` for a normal section extending ``N``."""
    _require_normal(m, patch, u, N)
    n = patch.n
    if patch.r == 0:
        return np.zeros(n)
    x = patch.point(u)
    U = np.asarray(U, dtype=float)
    Nd = normal_derivative(m, patch, u, N, U)
    cov = Nd + christoffel(m, x, N).contract(np.asarray(N, float), U)
    return split_tan_nor(m, patch, u, N, cov)[0]


def shape_operator_matrix(m, patch, u, N):
    """Matrix of ``S~_N`` on the tangent basis: ``S~(e_a) = sum_b A[b, a] e_b``."""
    E = patch.tangent_basis(u)
    cols = [patch.to_parameters(u, normal_second_fundamental_form(m, patch, u, N, E[:, a])) for a in range(patch.r)]
    return np.array(cols).T if cols else np.zeros((0, 0))


def patch_from_spec(spec):
    """Build a patch from a scenario map such as ``{"patch": "circle", "center": [0, 0], "radius": 1}``."""
    from .errors import ScenarioError

    spec = dict(spec)
    kind = spec.pop("patch", None) or spec.pop("type", None)
    builders = {
        "point": (SubmanifoldPatch.at_point, ("p",)),
        "line": (SubmanifoldPatch.line, ("p", "d", "u0")),
        "affine": (SubmanifoldPatch.affine, ("p", "directions", "u0")),
        "circle": (SubmanifoldPatch.circle, ("center", "radius", "u0")),
        "graph": (SubmanifoldPatch.graph, ("coefficients", "u0")),
        "sphere": (SubmanifoldPatch.round_sphere, ("center", "radius", "u0")),
    }
    if kind is None:
        raise ScenarioError("patch.missing", "patch kind is missing")
    if kind not in builders:
        raise ScenarioError("patch.unknown", f"unknown patch kind {kind!r}")
    fn, allowed = builders[kind]
    for key in spec:
        if key not in allowed:
            raise ScenarioError(f"patch.{key}.unknown", f"patch {kind!r} has no field {key!r}")
    try:
        return fn(**spec)
    except TypeError as exc:
        raise ScenarioError("patch.invalid", str(exc)) from exc
