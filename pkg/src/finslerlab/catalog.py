"""Built-in metrics.

Each factory returns a :class:`~finslerlab.metric.MetricDefinition` whose
``spec`` round-trips through :func:`from_spec`.  ``reference`` carries closed
forms used as independent oracles (Levi-Civita symbols of the quadratic
entries, constant flag curvatures).

Legendre injectivity (needed for the criticality characterization) holds for
every entry: the positive-definite ones are strongly convex on each fiber and
the pseudo-Euclidean one has a linear, invertible Legendre map.
"""

import numpy as np

from . import jets
from .errors import ScenarioError
from .metric import MetricDefinition


def _conformal_levi_civita(dphi):
    n = len(dphi)
    G = np.zeros((n, n, n))
    for k in range(n):
        for i in range(n):
            for j in range(n):
                G[k, i, j] = (k == i) * dphi[j] + (k == j) * dphi[i] - (i == j) * dphi[k]
    return G


def _normal(rng, n):
    return rng.normal(size=n)


def euclidean(n=2):
    def L(x, v):
        return jets.dot(v, v)

    def sampler(rng):
        return rng.uniform(-1.0, 1.0, n), _normal(rng, n)

    return MetricDefinition(
        dim=n,
        lagrangian=L,
        name="euclidean",
        spec={"metric": "euclidean", "n": n},
        sampler=sampler,
        quadratic=True,
        reference={
            "levi_civita": lambda x: np.zeros((n, n, n)),
            "flag_curvature": 0.0,
            "matrix": lambda x: np.eye(n),
        },
    )


def pseudo_euclidean(signature=(-1.0, 1.0)):
    sig = [float(s) for s in signature]
    if not sig or any(s not in (-1.0, 1.0) for s in sig):
        raise ValueError("signature entries must be +1 or -1")
    n = len(sig)

    def L(x, v):
        total = sig[0] * v[0] * v[0]
        for i in range(1, n):
            total = total + sig[i] * v[i] * v[i]
        return total

    def sampler(rng):
        return rng.uniform(-1.0, 1.0, n), _normal(rng, n)

    return MetricDefinition(
        dim=n,
        lagrangian=L,
        name="pseudo_euclidean",
        spec={"metric": "pseudo_euclidean", "signature": sig},
        sampler=sampler,
        quadratic=True,
        reference={
            "levi_civita": lambda x: np.zeros((n, n, n)),
            "flag_curvature": 0.0,
            "matrix": lambda x: np.diag(sig),
        },
    )


def sphere(chart="spherical"):
    """Unit round sphere.

    ``chart="spherical"`` uses (theta, phi) with ``L = v_theta^2 +
    sin(theta)^2 v_phi^2`` on ``0 < theta < pi``; ``chart="stereographic"``
    covers everything but one pole with ``L = 4|v|^2 / (1 + |x|^2)^2``.
    """
    if chart == "spherical":

        def L(x, v):
            s = jets.sin(x[0])
            return v[0] * v[0] + s * s * v[1] * v[1]

        def domain(x):
            return 0.0 < x[0] < np.pi

        def sampler(rng):
            return np.array([rng.uniform(0.4, np.pi - 0.4), rng.uniform(-np.pi, np.pi)]), _normal(rng, 2)

        def levi_civita(x):
            th = x[0]
            G = np.zeros((2, 2, 2))
            G[0, 1, 1] = -np.sin(th) * np.cos(th)
            G[1, 0, 1] = G[1, 1, 0] = np.cos(th) / np.sin(th)
            return G

        def matrix(x):
            return np.diag([1.0, np.sin(x[0]) ** 2])

    elif chart == "stereographic":

        def L(x, v):
            r2 = jets.dot(x, x)
            return 4.0 * jets.dot(v, v) / ((1.0 + r2) * (1.0 + r2))

        def domain(x):
            return bool(np.all(np.isfinite(x)))

        def sampler(rng):
            return rng.uniform(-1.5, 1.5, 2), _normal(rng, 2)

        def levi_civita(x):
            x = np.asarray(x, dtype=float)
            return _conformal_levi_civita(-2.0 * x / (1.0 + x @ x))

        def matrix(x):
            return 4.0 / (1.0 + x @ x) ** 2 * np.eye(2)

    else:
        raise ValueError(f"unknown sphere chart {chart!r}")

    return MetricDefinition(
        dim=2,
        lagrangian=L,
        chart_domain=domain,
        name="sphere",
        spec={"metric": "sphere", "chart": chart},
        sampler=sampler,
        quadratic=True,
        reference={"levi_civita": levi_civita, "flag_curvature": 1.0, "matrix": matrix},
    )


def hyperbolic(n=2):
    """Poincare ball model, curvature -1."""

    def L(x, v):
        d = 1.0 - jets.dot(x, x)
        return 4.0 * jets.dot(v, v) / (d * d)

    def domain(x):
        return float(np.dot(x, x)) < 1.0

    def sampler(rng):
        x = rng.uniform(-1.0, 1.0, n)
        x *= rng.uniform(0.0, 0.7) / max(np.linalg.norm(x), 1e-12)
        return x, _normal(rng, n)

    def levi_civita(x):
        x = np.asarray(x, dtype=float)
        return _conformal_levi_civita(2.0 * x / (1.0 - x @ x))

    return MetricDefinition(
        dim=n,
        lagrangian=L,
        chart_domain=domain,
        name="hyperbolic",
        spec={"metric": "hyperbolic", "n": n},
        sampler=sampler,
        quadratic=True,
        reference={
            "levi_civita": levi_civita,
            "flag_curvature": -1.0,
            "matrix": lambda x: 4.0 / (1.0 - x @ x) ** 2 * np.eye(n),
        },
    )


_RANDERS_BASES = ("euclidean", "hyperbolic", "sphere")


def randers(a="euclidean", beta=(0.3, 0.0), beta_grad=((0.0, 0.2), (-0.1, 0.0))):
    """``L = (sqrt(a(v, v)) + beta_x(v))^2`` with ``beta_x = beta + beta_grad @ x``.

    The chart is restricted to where ``|beta_x|_a < 1``.  The default linear
    part of ``beta`` is not closed, so the geodesics differ from those of ``a``.
    """
    if a not in _RANDERS_BASES:
        raise ValueError(f"randers base metric must be one of {_RANDERS_BASES}, got {a!r}")
    b0 = np.asarray(beta, dtype=float)
    B = np.asarray(beta_grad, dtype=float)
    n = len(b0)
    if B.shape != (n, n):
        raise ValueError(f"beta_grad must be {n}x{n}")
    if a == "sphere" and n != 2:
        raise ValueError("randers over the sphere chart is 2-dimensional")

    def a_form(x, v):
        if a == "euclidean":
            return jets.dot(v, v)
        if a == "hyperbolic":
            d = 1.0 - jets.dot(x, x)
            return 4.0 * jets.dot(v, v) / (d * d)
        s = jets.sin(x[0])
        return v[0] * v[0] + s * s * v[1] * v[1]

    def b_at(x):
        return [b0[i] + jets.dot(B[i], x) for i in range(n)]

    def L(x, v):
        F = jets.sqrt(a_form(x, v)) + jets.dot(b_at(x), v)
        return F * F

    def a_matrix(x):
        if a == "euclidean":
            return np.eye(n)
        if a == "hyperbolic":
            return 4.0 / (1.0 - x @ x) ** 2 * np.eye(n)
        return np.diag([1.0, np.sin(x[0]) ** 2])

    def domain(x):
        x = np.asarray(x, dtype=float)
        if a == "hyperbolic" and x @ x >= 1.0:
            return False
        if a == "sphere" and not 0.0 < x[0] < np.pi:
            return False
        b = b0 + B @ x
        return float(b @ np.linalg.solve(a_matrix(x), b)) < 1.0

    def sampler(rng):
        if a == "sphere":
            x = np.array([rng.uniform(0.8, np.pi - 0.8), rng.uniform(-np.pi, np.pi)])
        else:
            x = rng.uniform(-1.0, 1.0, n)
            x *= rng.uniform(0.0, 0.6 if a == "hyperbolic" else 1.0) / max(np.linalg.norm(x), 1e-12)
        return x, _normal(rng, n)

    return MetricDefinition(
        dim=n,
        lagrangian=L,
        chart_domain=domain,
        name="randers",
        spec={"metric": "randers", "a": a, "beta": b0.tolist(), "beta_grad": B.tolist()},
        sampler=sampler,
    )


def funk(n=2):
    """Funk metric of the unit ball; constant flag curvature -1/4."""

    def F(x, v):
        d = 1.0 - jets.dot(x, x)
        xv = jets.dot(x, v)
        return (jets.sqrt(d * jets.dot(v, v) + xv * xv) + xv) / d

    def L(x, v):
        f = F(x, v)
        return f * f

    def domain(x):
        return float(np.dot(x, x)) < 1.0

    def sampler(rng):
        x = rng.uniform(-1.0, 1.0, n)
        x *= rng.uniform(0.0, 0.7) / max(np.linalg.norm(x), 1e-12)
        return x, _normal(rng, n)

    return MetricDefinition(
        dim=n,
        lagrangian=L,
        chart_domain=domain,
        name="funk",
        spec={"metric": "funk", "n": n},
        sampler=sampler,
        reference={"flag_curvature": -0.25},
    )


def quartic(n=2):
    """Minkowski norm ``L = sqrt(sum v_i^4)``; degenerate along the axes."""

    def L(x, v):
        total = v[0] ** 4
        for i in range(1, n):
            total = total + v[i] ** 4
        return jets.sqrt(total)

    def sampler(rng):
        while True:
            v = _normal(rng, n)
            if np.min(np.abs(v)) > 0.2 * np.linalg.norm(v):
                return rng.uniform(-1.0, 1.0, n), v

    return MetricDefinition(
        dim=n,
        lagrangian=L,
        name="quartic",
        spec={"metric": "quartic", "n": n},
        sampler=sampler,
        reference={"levi_civita": lambda x: np.zeros((n, n, n)), "flag_curvature": 0.0},
    )


def broken(n=2):
    """Deliberately non-homogeneous Lagrangian, for negative-control tests only."""

    def L(x, v):
        q = jets.dot(v, v)
        return q + 0.05 * q * q

    def sampler(rng):
        return rng.uniform(-1.0, 1.0, n), _normal(rng, n)

    return MetricDefinition(
        dim=n,
        lagrangian=L,
        name="broken",
        spec={"metric": "broken", "n": n},
        sampler=sampler,
    )


FACTORIES = {
    "euclidean": (euclidean, ("n",)),
    "pseudo_euclidean": (pseudo_euclidean, ("signature",)),
    "sphere": (sphere, ("chart",)),
    "hyperbolic": (hyperbolic, ("n",)),
    "randers": (randers, ("a", "beta", "beta_grad")),
    "funk": (funk, ("n",)),
    "quartic": (quartic, ("n",)),
    "broken": (broken, ("n",)),
}

CATALOG_IDS = ("euclidean", "pseudo_euclidean", "sphere", "hyperbolic", "randers", "funk", "quartic")
TEST_ONLY_IDS = ("broken",)


def metric_params(metric_id):
    if metric_id not in FACTORIES:
        raise ScenarioError("metric.unknown", f"unknown metric id {metric_id!r}", metric=metric_id)
    return FACTORIES[metric_id][1]


def from_spec(spec):
    """Build a catalog metric from an id or a ``{"metric": id, **params}`` map."""
    if isinstance(spec, str):
        spec = {"metric": spec}
    spec = dict(spec)
    metric_id = spec.pop("metric", None) or spec.pop("id", None)
    if metric_id is None:
        raise ScenarioError("metric.missing", "metric id is missing")
    allowed = metric_params(metric_id)
    for key in spec:
        if key not in allowed:
            raise ScenarioError(
                f"metric.{key}.unknown", f"metric {metric_id!r} has no parameter {key!r}", metric=metric_id
            )
    factory = FACTORIES[metric_id][0]
    try:
        return factory(**spec)
    except (TypeError, ValueError) as exc:
        raise ScenarioError("metric.invalid_param", str(exc), metric=metric_id) from exc


def catalog():
    """Default instances of every catalog metric, keyed by id."""
    return {mid: from_spec(mid) for mid in CATALOG_IDS}
