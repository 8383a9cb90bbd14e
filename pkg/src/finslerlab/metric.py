"""Pseudo-Finsler metrics on a single chart: fundamental and Cartan tensors."""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import jets
from .errors import ChartError, DegenerateTensorError, InadmissibleVectorError

DEGENERACY_THRESHOLD = 1e-10


def _always(*args):
    return True


@dataclass(frozen=True, eq=False)
class MetricDefinition:
    """A Lagrangian ``L(x, v)`` on an open chart of R^n.

    ``lagrangian`` must be written with the functions of :mod:`finslerlab.jets`
    (or plain arithmetic) so it can be evaluated on jets.  ``admissible`` is
    the user part of the conic domain A; nondegeneracy of the fundamental
    tensor is checked on top of it by :func:`is_admissible`.
    """

    dim: int
    lagrangian: Callable
    chart_domain: Callable = _always
    admissible: Callable = _always
    name: str = "custom"
    spec: dict = field(default_factory=dict)
    sampler: Optional[Callable] = None
    quadratic: bool = False
    reference: dict = field(default_factory=dict)
    degeneracy_threshold: float = DEGENERACY_THRESHOLD

    def __call__(self, x, v):
        return self.lagrangian(x, v)

    def __repr__(self):
        return f"MetricDefinition({self.name!r}, dim={self.dim})"

    def sample(self, rng, max_tries=1000):
        """Random admissible ``(x, v)`` drawn with ``rng``."""
        if self.sampler is None:
            raise ValueError(f"metric {self.name!r} has no sampler")
        for _ in range(max_tries):
            x, v = self.sampler(rng)
            x = np.asarray(x, dtype=float)
            v = np.asarray(v, dtype=float)
            if self.chart_domain(x) and is_admissible(self, x, v):
                return x, v
        raise RuntimeError(f"could not draw an admissible sample for {self.name!r}")


@dataclass(frozen=True, eq=False)
class FundamentalTensor:
    g: np.ndarray
    x: np.ndarray
    v: np.ndarray

    def __call__(self, u, w):
        return float(np.asarray(u) @ self.g @ np.asarray(w))


@dataclass(frozen=True, eq=False)
class CartanTensor:
    C: np.ndarray
    x: np.ndarray
    v: np.ndarray

    def __call__(self, w1, w2, w3):
        return float(np.einsum("ijk,i,j,k->", self.C, w1, w2, w3))

    def contract(self, w):
        """The bilinear form ``C(w, ., .)``."""
        return np.einsum("ijk,i->jk", self.C, w)


def check_point(m, x, v=None):
    x = np.asarray(x, dtype=float)
    if x.shape != (m.dim,):
        raise ValueError(f"point must have shape ({m.dim},), got {x.shape}")
    if not m.chart_domain(x):
        raise ChartError(f"point {x.tolist()} is outside the chart of {m.name!r}", x=x.tolist())
    if v is None:
        return x, None
    v = np.asarray(v, dtype=float)
    if v.shape != (m.dim,):
        raise ValueError(f"vector must have shape ({m.dim},), got {v.shape}")
    if not np.any(v) or not m.admissible(x, v):
        raise InadmissibleVectorError(
            f"vector {v.tolist()} is not in the admissible cone of {m.name!r} at {x.tolist()}",
            x=x.tolist(),
            v=v.tolist(),
        )
    return x, v


def degenerate(g, threshold=DEGENERACY_THRESHOLD):
    n = g.shape[0]
    scale = np.max(np.linalg.norm(g, axis=1))
    if scale == 0.0:
        return True
    return abs(np.linalg.det(g)) < threshold * scale ** n


def evaluate_L(m, x, v):
    """``L(x, v)`` after checking the chart and the cone predicate.

    Nondegeneracy of ``g_v`` is not re-checked here; use :func:`is_admissible`.
    """
    x, v = check_point(m, x, v)
    return float(jets.value(m.lagrangian(x, v)))


def _v_directions(n):
    return [("v", i) for i in range(n)]


def fundamental_tensor(m, x, v, check=True):
    """``g_v(u, w) = 1/2 d^2/dt ds L(v + t u + s w)`` as an n x n matrix."""
    x, v = check_point(m, x, v)
    L = jets.lift(m.lagrangian, x, v, _v_directions(m.dim), 2)
    g = 0.5 * L.hessian()
    if check and degenerate(g, m.degeneracy_threshold):
        raise DegenerateTensorError(
            f"fundamental tensor of {m.name!r} is degenerate at v={v.tolist()}",
            x=x.tolist(),
            v=v.tolist(),
        )
    return FundamentalTensor(g, x, v)


def cartan_tensor(m, x, v, check=True):
    """``C_v(w1, w2, w3) = 1/4 d^3/ds1 ds2 ds3 L(v + sum s_i w_i)``."""
    x, v = check_point(m, x, v)
    n = m.dim
    L = jets.lift(m.lagrangian, x, v, _v_directions(n), 3)
    if check:
        g = 0.5 * L.hessian()
        if degenerate(g, m.degeneracy_threshold):
            raise DegenerateTensorError(
                f"fundamental tensor of {m.name!r} is degenerate at v={v.tolist()}",
                x=x.tolist(),
                v=v.tolist(),
            )
    # C_ijk = 1/2 d/dv_i g_jk, each ordered slot read independently
    g_jets = [[0.5 * L.diff(j).diff(k) for k in range(n)] for j in range(n)]
    C = np.empty((n, n, n))
    for i in range(n):
        for j in range(n):
            for k in range(n):
                C[i, j, k] = 0.5 * g_jets[j][k].partial(i)
    return CartanTensor(C, x, v)


def is_admissible(m, x, v):
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if not np.any(v) or not m.admissible(x, v):
        return False
    try:
        L = jets.lift(m.lagrangian, x, v, _v_directions(m.dim), 2)
    except (ArithmeticError, ValueError):
        return False
    g = 0.5 * L.hessian()
    if not np.all(np.isfinite(g)):
        return False
    return not degenerate(g, m.degeneracy_threshold)


AUDIT_SCALES = (0.5, 2.0, 7.0)


def _rel(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b)) / max(1.0, float(np.max(np.abs(b)))))


def audit_metric(m, samples=100, seed=0, scales=AUDIT_SCALES):
    """Maximum violations of the homogeneity and Cartan identities.

    Residuals are absolute differences divided by ``max(1, |reference|)``.
    Violations are reported, never raised.
    """
    rng = np.random.default_rng(seed)
    worst = {
        "L_homogeneity": 0.0,
        "g_homogeneity": 0.0,
        "g_vv_equals_L": 0.0,
        "cartan_homogeneity": 0.0,
        "cartan_symmetry": 0.0,
        "cartan_v_contraction": 0.0,
    }
    for _ in range(samples):
        x, v = m.sample(rng)
        L0 = evaluate_L(m, x, v)
        g = fundamental_tensor(m, x, v, check=False).g
        C = cartan_tensor(m, x, v, check=False).C
        for lam in scales:
            worst["L_homogeneity"] = max(worst["L_homogeneity"], _rel(evaluate_L(m, x, lam * v), lam**2 * L0))
            if lam == 7.0:
                continue
            g_l = fundamental_tensor(m, x, lam * v, check=False).g
            worst["g_homogeneity"] = max(worst["g_homogeneity"], _rel(g_l, g))
            C_l = cartan_tensor(m, x, lam * v, check=False).C
            worst["cartan_homogeneity"] = max(worst["cartan_homogeneity"], _rel(lam * C_l, C))
        worst["g_vv_equals_L"] = max(worst["g_vv_equals_L"], _rel(v @ g @ v, L0))
        sym = 0.0
        for perm in ((0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)):
            sym = max(sym, float(np.max(np.abs(C - np.transpose(C, perm)))))
        worst["cartan_symmetry"] = max(worst["cartan_symmetry"], sym)
        contraction = np.einsum("ijk,i->jk", C, v)
        worst["cartan_v_contraction"] = max(
            worst["cartan_v_contraction"], float(np.max(np.abs(contraction))) / max(1.0, np.linalg.norm(v))
        )
    return AuditReport(m.name, samples, seed, worst)


@dataclass
class AuditReport:
    metric: str
    samples: int
    seed: int
    violations: dict

    def max_violation(self):
        return max(self.violations.values())

    def passed(self, tol=1e-8):
        return all(v <= tol for v in self.violations.values())
