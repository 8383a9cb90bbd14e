"""Truncated multivariate Taylor arithmetic ("jets").

A :class:`Jet` stores the Taylor coefficients ``c[alpha] = d^alpha f / alpha!``
of a scalar quantity with respect to ``ndir`` perturbation directions, up to
total order ``order``.  Arithmetic on jets is exact (up to rounding) for the
truncated polynomial algebra, so composing user code with jets yields exact
higher-order directional derivatives.

Coefficients are stored densely in graded order (all monomials of degree 0,
then degree 1, ...), which makes truncation to a lower order a prefix slice.

The elementary functions in this module (:func:`sqrt`, :func:`exp`, ...)
accept plain floats, numpy arrays and jets, so a Lagrangian written with them
can be evaluated both numerically and on jets.
"""

import math
from functools import lru_cache
from itertools import combinations_with_replacement

import numpy as np

from . import _kernels
from .errors import JetDomainError

MAX_ORDER = 4
MAX_DIRECTIONS = 8


def _monomials(ndir, order):
    monos = []
    for deg in range(order + 1):
        for combo in combinations_with_replacement(range(ndir), deg):
            alpha = [0] * ndir
            for d in combo:
                alpha[d] += 1
            monos.append(tuple(alpha))
    return monos


class JetSpace:
    """Index bookkeeping for jets in ``ndir`` directions truncated at ``order``."""

    def __init__(self, ndir, order):
        self.ndir = ndir
        self.order = order
        self.monomials = _monomials(ndir, order)
        self.index = {alpha: i for i, alpha in enumerate(self.monomials)}
        self.size = len(self.monomials)
        self.factorials = np.array(
            [float(np.prod([math.factorial(a) for a in alpha])) for alpha in self.monomials]
        )
        ti, tj, tk = [], [], []
        for i, a in enumerate(self.monomials):
            da = sum(a)
            for j, b in enumerate(self.monomials):
                if da + sum(b) > order:
                    continue
                ti.append(i)
                tj.append(j)
                tk.append(self.index[tuple(x + y for x, y in zip(a, b))])
        self.ti = np.array(ti, dtype=np.int64)
        self.tj = np.array(tj, dtype=np.int64)
        self.tk = np.array(tk, dtype=np.int64)
        self._diff_tables = {}

    @staticmethod
    @lru_cache(maxsize=None)
    def get(ndir, order):
        if not 0 <= order <= MAX_ORDER:
            raise ValueError(f"jet order must be in [0, {MAX_ORDER}], got {order}")
        if not 1 <= ndir <= MAX_DIRECTIONS:
            raise ValueError(f"number of directions must be in [1, {MAX_DIRECTIONS}], got {ndir}")
        return JetSpace(ndir, order)

    def unit_index(self, d):
        alpha = [0] * self.ndir
        alpha[d] = 1
        return self.index[tuple(alpha)]

    def diff_table(self, d):
        """(source indices, factors) mapping this space to its derivative space."""
        if d not in self._diff_tables:
            lower = JetSpace.get(self.ndir, self.order - 1)
            src = np.empty(lower.size, dtype=np.int64)
            fac = np.empty(lower.size)
            for i, beta in enumerate(lower.monomials):
                up = list(beta)
                up[d] += 1
                src[i] = self.index[tuple(up)]
                fac[i] = beta[d] + 1
            self._diff_tables[d] = (src, fac)
        return self._diff_tables[d]

    def __repr__(self):
        return f"JetSpace(ndir={self.ndir}, order={self.order})"


class Jet:
    """Truncated Taylor expansion of a scalar."""

    __slots__ = ("space", "c")
    __array_priority__ = 100

    def __init__(self, space, coefficients):
        self.space = space
        self.c = coefficients

    @classmethod
    def constant(cls, space, value):
        c = np.zeros(space.size)
        c[0] = value
        return cls(space, c)

    @classmethod
    def variable(cls, space, value, direction, scale=1.0):
        c = np.zeros(space.size)
        c[0] = value
        if space.order > 0:
            c[space.unit_index(direction)] = scale
        return cls(space, c)

    @property
    def value(self):
        return float(self.c[0])

    @property
    def order(self):
        return self.space.order

    def coefficient(self, alpha):
        return float(self.c[self.space.index[tuple(alpha)]])

    def derivative(self, alpha):
        """The partial derivative ``d^alpha f`` (not divided by alpha!)."""
        i = self.space.index[tuple(alpha)]
        return float(self.c[i] * self.space.factorials[i])

    def partial(self, *dirs):
        alpha = [0] * self.space.ndir
        for d in dirs:
            alpha[d] += 1
        return self.derivative(alpha)

    def gradient(self):
        sp = self.space
        return np.array([self.c[sp.unit_index(d)] for d in range(sp.ndir)])

    def hessian(self):
        sp = self.space
        H = np.empty((sp.ndir, sp.ndir))
        for i in range(sp.ndir):
            for j in range(i, sp.ndir):
                H[i, j] = H[j, i] = self.partial(i, j)
        return H

    def diff(self, d):
        """Jet of the partial derivative along direction ``d`` (one order lower)."""
        if self.space.order == 0:
            raise ValueError("cannot differentiate an order-0 jet")
        src, fac = self.space.diff_table(d)
        return Jet(JetSpace.get(self.space.ndir, self.space.order - 1), self.c[src] * fac)

    def truncate(self, order):
        if order > self.space.order:
            raise ValueError("cannot raise the order of a jet")
        if order == self.space.order:
            return self
        sp = JetSpace.get(self.space.ndir, order)
        return Jet(sp, self.c[: sp.size].copy())

    # arithmetic -----------------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, Jet):
            if other.space is not self.space:
                raise ValueError(f"jet space mismatch: {self.space} vs {other.space}")
            return other
        return None

    def __add__(self, other):
        o = self._coerce(other)
        if o is not None:
            return Jet(self.space, self.c + o.c)
        c = self.c.copy()
        c[0] += other
        return Jet(self.space, c)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        if o is not None:
            return Jet(self.space, self.c - o.c)
        c = self.c.copy()
        c[0] -= other
        return Jet(self.space, c)

    def __rsub__(self, other):
        c = -self.c
        c[0] += other
        return Jet(self.space, c)

    def __neg__(self):
        return Jet(self.space, -self.c)

    def __pos__(self):
        return self

    def __mul__(self, other):
        o = self._coerce(other)
        if o is not None:
            sp = self.space
            return Jet(sp, _kernels.mul(self.c, o.c, sp.ti, sp.tj, sp.tk, sp.size))
        return Jet(self.space, self.c * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is not None:
            return self * o.reciprocal()
        return Jet(self.space, self.c / other)

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, p):
        if isinstance(p, Jet):
            return exp(p * log(self))
        if float(p).is_integer() and 0 <= p <= 8:
            p = int(p)
            result = Jet.constant(self.space, 1.0)
            base = self
            while p:
                if p & 1:
                    result = result * base
                p >>= 1
                if p:
                    base = base * base
            return result
        return self._power(float(p))

    def __rpow__(self, base):
        return exp(self * math.log(base))

    def reciprocal(self):
        a0 = self.c[0]
        if a0 == 0.0:
            raise JetDomainError("division by a jet with zero leading value")
        K = self.space.order
        coefs = [(-1.0) ** k / a0 ** (k + 1) for k in range(K + 1)]
        return self.compose(coefs)

    def _power(self, p):
        a0 = self.c[0]
        if a0 <= 0.0:
            raise JetDomainError(f"non-integer power {p} of a jet with non-positive leading value {a0}")
        K = self.space.order
        coefs = []
        binom = 1.0
        for k in range(K + 1):
            coefs.append(binom * a0 ** (p - k))
            binom *= (p - k) / (k + 1)
        return self.compose(coefs)

    def compose(self, taylor):
        """Evaluate ``sum_k taylor[k] * (self - value)**k``.

        ``taylor`` lists the Taylor coefficients ``f^(k)(value)/k!`` of a
        univariate function at the leading value.
        """
        sp = self.space
        h = self.c.copy()
        h[0] = 0.0
        coefs = np.asarray(taylor[: sp.order + 1], dtype=float)
        return Jet(sp, _kernels.horner(coefs, h, sp.ti, sp.tj, sp.tk, sp.size))

    def __float__(self):
        return self.value

    def __repr__(self):
        return f"Jet(value={self.value:.6g}, ndir={self.space.ndir}, order={self.space.order})"


def is_jet(x):
    return isinstance(x, Jet)


def value(x):
    """Leading value of a jet, or ``x`` itself."""
    return x.value if isinstance(x, Jet) else x


# elementary functions ------------------------------------------------------


def _taylor_sin_cos(a0, K, cosine=False):
    s, c = math.sin(a0), math.cos(a0)
    cycle = [c, -s, -c, s] if cosine else [s, c, -s, -c]
    return [cycle[k % 4] / math.factorial(k) for k in range(K + 1)]


def sqrt(x):
    if isinstance(x, Jet):
        if x.c[0] <= 0.0 and x.space.order > 0:
            raise JetDomainError(f"sqrt of a jet with non-positive leading value {x.c[0]}")
        if x.space.order == 0:
            if x.c[0] < 0.0:
                raise JetDomainError(f"sqrt of negative value {x.c[0]}")
            return Jet(x.space, np.sqrt(x.c))
        return x._power(0.5)
    if np.ndim(x) == 0:
        if x < 0:
            raise JetDomainError(f"sqrt of negative value {x}")
        return math.sqrt(x)
    return np.sqrt(x)


def exp(x):
    if isinstance(x, Jet):
        e = math.exp(x.c[0])
        return x.compose([e / math.factorial(k) for k in range(x.space.order + 1)])
    return np.exp(x)


def log(x):
    if isinstance(x, Jet):
        a0 = x.c[0]
        if a0 <= 0.0:
            raise JetDomainError(f"log of a jet with non-positive leading value {a0}")
        coefs = [math.log(a0)] + [(-1.0) ** (k + 1) / (k * a0 ** k) for k in range(1, x.space.order + 1)]
        return x.compose(coefs)
    if np.ndim(x) == 0:
        if x <= 0:
            raise JetDomainError(f"log of non-positive value {x}")
        return math.log(x)
    return np.log(x)


def sin(x):
    if isinstance(x, Jet):
        return x.compose(_taylor_sin_cos(x.c[0], x.space.order))
    return np.sin(x)


def cos(x):
    if isinstance(x, Jet):
        return x.compose(_taylor_sin_cos(x.c[0], x.space.order, cosine=True))
    return np.cos(x)


def tan(x):
    if isinstance(x, Jet):
        return sin(x) / cos(x)
    return np.tan(x)


def sinh(x):
    if isinstance(x, Jet):
        return (exp(x) - exp(-x)) * 0.5
    return np.sinh(x)


def cosh(x):
    if isinstance(x, Jet):
        return (exp(x) + exp(-x)) * 0.5
    return np.cosh(x)


def tanh(x):
    if isinstance(x, Jet):
        return sinh(x) / cosh(x)
    return np.tanh(x)


def arctan(x):
    if isinstance(x, Jet):
        a0 = x.c[0]
        K = x.space.order
        # derivatives of atan via the series of 1/(1+t^2) around a0
        inner = Jet.variable(JetSpace.get(1, max(K - 1, 0)), a0, 0) if K > 0 else None
        coefs = [math.atan(a0)]
        if K > 0:
            d = (1.0 / (1.0 + inner * inner)).c
            coefs += [d[k - 1] / k for k in range(1, K + 1)]
        return x.compose(coefs)
    return np.arctan(x)


def absolute(x):
    if isinstance(x, Jet):
        if x.c[0] == 0.0:
            raise JetDomainError("abs of a jet with zero leading value is not differentiable")
        return x if x.c[0] > 0 else -x
    return np.abs(x)


def dot(a, b):
    """Sum of products; works for sequences of floats or jets."""
    total = a[0] * b[0]
    for i in range(1, len(a)):
        total = total + a[i] * b[i]
    return total


# lifting -------------------------------------------------------------------


def _direction_vectors(directions, n):
    out = []
    for d in directions:
        if isinstance(d, tuple) and len(d) == 2 and isinstance(d[0], str):
            space, idx = d
            dx, dv = np.zeros(n), np.zeros(n)
            if space == "x":
                dx[idx] = 1.0
            elif space == "v":
                dv[idx] = 1.0
            else:
                raise ValueError(f"unknown direction space {space!r}")
            out.append((dx, dv))
        else:
            dx, dv = d
            out.append((np.asarray(dx, dtype=float), np.asarray(dv, dtype=float)))
    return out


def lift(f, x, v, directions, order):
    """Taylor-expand ``f(x, v)`` along the given perturbation directions.

    ``directions`` lists ``("x", i)`` / ``("v", i)`` coordinate directions, or
    explicit ``(dx, dv)`` vector pairs.  The coefficient of multi-index
    ``alpha`` in the result is ``d^alpha f / alpha!`` at ``(x, v)``.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    named = [d for d in directions if isinstance(d, tuple) and len(d) == 2 and isinstance(d[0], str)]
    if len(set(named)) != len(named):
        raise ValueError("lift directions must be distinct")
    space = JetSpace.get(len(directions), order)
    vecs = _direction_vectors(directions, len(x))
    xj = lift_vector(space, x, [dx for dx, _ in vecs])
    vj = lift_vector(space, v, [dv for _, dv in vecs])
    out = f(xj, vj)
    if not isinstance(out, Jet):
        out = Jet.constant(space, float(out))
    return out


def lift_vector(space, base, dir_vectors):
    """Object array of jets ``base + sum_d eps_d * dir_vectors[d]``."""
    n = len(base)
    out = np.empty(n, dtype=object)
    units = [space.unit_index(d) for d in range(len(dir_vectors))]
    for i in range(n):
        c = np.zeros(space.size)
        c[0] = base[i]
        for d, u in enumerate(units):
            c[u] = dir_vectors[d][i]
        out[i] = Jet(space, c)
    return out


def univariate(f, t, order):
    """Derivatives ``[f(t), f'(t), ..., f^(order)(t)]`` of a jet-evaluable ``f``.

    ``f`` may return a scalar or a sequence; the result has shape
    ``(order + 1,) + shape``.
    """
    space = JetSpace.get(1, order)
    tj = Jet.variable(space, float(t), 0)
    out = f(tj)
    arr = np.asarray(out, dtype=object)
    flat = arr.reshape(-1)
    res = np.empty((order + 1, flat.size))
    fact = np.array([math.factorial(k) for k in range(order + 1)], dtype=float)
    for i, item in enumerate(flat):
        if isinstance(item, Jet):
            res[:, i] = item.c * fact
        else:
            res[0, i] = float(item)
            res[1:, i] = 0.0
    return res.reshape((order + 1,) + arr.shape)


# small linear algebra on jets --------------------------------------------


def solve_many(A, rhs_list):
    """Solve ``A x = b`` for every ``b`` in ``rhs_list``; entries may be jets.

    Gaussian elimination with partial pivoting on the leading values.
    """
    n = len(A)
    M = [[A[i][j] for j in range(n)] for i in range(n)]
    R = [[b[i] for b in rhs_list] for i in range(n)]
    m = len(rhs_list)
    for col in range(n):
        piv = max(range(col, n), key=lambda r: abs(value(M[r][col])))
        if value(M[piv][col]) == 0.0:
            raise JetDomainError("singular matrix in jet solve")
        if piv != col:
            M[col], M[piv] = M[piv], M[col]
            R[col], R[piv] = R[piv], R[col]
        inv = 1.0 / M[col][col]
        for r in range(col + 1, n):
            f = M[r][col] * inv
            for c in range(col + 1, n):
                M[r][c] = M[r][c] - f * M[col][c]
            for k in range(m):
                R[r][k] = R[r][k] - f * R[col][k]
        M[col][col] = inv
    X = [[None] * m for _ in range(n)]
    for r in range(n - 1, -1, -1):
        for k in range(m):
            acc = R[r][k]
            for c in range(r + 1, n):
                acc = acc - M[r][c] * X[c][k]
            X[r][k] = acc * M[r][r]
    return [[X[i][k] for i in range(n)] for k in range(m)]


def solve(A, b):
    return solve_many(A, [b])[0]


def inverse(A):
    n = len(A)
    cols = solve_many(A, [[1.0 if i == j else 0.0 for i in range(n)] for j in range(n)])
    return [[cols[j][i] for j in range(n)] for i in range(n)]
