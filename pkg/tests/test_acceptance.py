"""Acceptance criteria 1-9, one PASS/FAIL line each (printed in the pytest summary).

Each criterion gathers named residuals, compares each with its tolerance,
and records a single line.  Runtime caps are part of the criteria.
"""

import json
import math
import subprocess
import sys
import time

import numpy as np
import pytest

from finslerlab import catalog, validation as V
from finslerlab.curvature import flag_curvature, random_flags
from finslerlab.errors import DomainExitError
from finslerlab.geodesic import integrate_geodesic
from finslerlab.jacobi import conjugate_points, focal_points
from finslerlab.curves import LinearCombination
from finslerlab.submanifold import SubmanifoldPatch
from finslerlab.metric import fundamental_tensor
from finslerlab.variation import critical_point_test, index_form

IDS = catalog.CATALOG_IDS
SEED = 0


class Criterion:
    def __init__(self, number, store):
        self.number, self.store = number, store
        self.items = []
        self.t0 = time.perf_counter()

    def le(self, name, value, tol):
        self.items.append((name, float(value), tol, bool(np.isfinite(value) and value <= tol), "<="))

    def gt(self, name, value, bound):
        self.items.append((name, float(value), bound, bool(value > bound), ">"))

    def runtime(self, limit):
        self.le("runtime_s", time.perf_counter() - self.t0, limit)

    def finish(self):
        ok = all(item[3] for item in self.items)
        bad = [f"{n}={v:.3g} (need {op} {t:g})" for n, v, t, good, op in self.items if not good]
        ratios = [(v / t, n) for n, v, t, _, op in self.items if op == "<=" and t > 0 and np.isfinite(v)]
        worst = max(ratios) if ratios else (0.0, "-")
        summary = f"{len(self.items)} checks, tightest {worst[1]} at {worst[0]:.2g} of tolerance"
        summary += "" if ok else "; failing: " + ", ".join(bad)
        self.store[self.number] = (ok, summary)
        assert ok, summary


def rng(*labels):
    return V._rng(SEED, "acceptance", *labels)


def test_criterion_1_metric_identities(acceptance):
    c = Criterion(1, acceptance)
    keys = ("g_vv_equals_L", "g_homogeneity", "cartan_homogeneity", "cartan_symmetry", "cartan_v_contraction")
    for mid in IDS:
        audit = V._audit_checks(catalog.from_spec(mid), SEED, 100)
        for k in keys:
            c.le(f"{mid}.{k}", audit[k], 1e-8)
    c.runtime(10)
    c.finish()


def test_criterion_2_connection_axioms(acceptance):
    c = Criterion(2, acceptance)
    for mid in IDS:
        m = catalog.from_spec(mid)
        c.le(f"{mid}.torsion", V.check_torsion(m, rng(mid, "torsion")), 0.0)
        c.le(f"{mid}.almost_g_compat", V.check_almost_compat(m, rng(mid, "compat"), count=20), 1e-7)
        if m.quadratic:
            c.le(f"{mid}.levi_civita", V.check_levi_civita(m, rng(mid, "lc")), 1e-9)
    c.runtime(30)
    c.finish()


def test_criterion_3_geodesics(acceptance):
    c = Criterion(3, acceptance)
    for mid in IDS:
        m = catalog.from_spec(mid)
        c.le(f"{mid}.energy_drift", V.check_energy_drift(m, rng(mid, "drift")), 1e-8)
        r = rng(mid, "flow")
        worst = 0.0
        for _ in range(5):
            rec = V._geodesic(m, r)
            try:
                fast = integrate_geodesic(m, rec.x0, 2 * rec.v0, (0.0, 0.5))
            except DomainExitError:
                continue
            for t in np.linspace(0, 0.5, 6):
                worst = max(worst, float(np.max(np.abs(fast(t) - rec(2 * t)))))
        c.le(f"{mid}.flow_homogeneity", worst, 1e-8)
    s = catalog.sphere()
    rec = integrate_geodesic(s, [math.pi / 2, 0.0], [-1.0, 0.0], (0.0, math.pi / 4), rtol=1e-10)
    c.le("sphere.meridian", abs(rec.endpoint()[0][0] - math.pi / 4), 1e-8)
    c.finish()


def test_criterion_4_variation_formulas(acceptance):
    c = Criterion(4, acceptance)
    for mid in IDS:
        m = catalog.from_spec(mid)
        # the first sample of the first-variation check is a broken curve
        c.le(f"{mid}.first_variation", V.check_first_variation(m, rng(mid, "fv"), count=10), 1e-6)
        c.le(f"{mid}.second_variation", V.check_second_variation(m, rng(mid, "sv"), count=10), 1e-5)
    c.runtime(60)
    c.finish()


def test_criterion_5_criticality(acceptance):
    c = Criterion(5, acceptance)
    for mid in IDS:
        m = catalog.from_spec(mid)
        r = rng(mid, "crit")
        rec, P, _, _, _ = V._index_setup(m, r)
        xb, vb = rec.state(rec.b)
        Q = V._orthogonal_line(m, xb, vb)
        good = critical_point_test(m, rec, P, Q)
        c.le(f"{mid}.critical", max(good.residuals().values()), 1e-6)
        bent = LinearCombination([(1.0, rec), (1.0, V._bump_field(r, rec, 0.05))])
        c.gt(f"{mid}.non_geodesic", critical_point_test(m, bent, P, Q).geodesic_residual, 1e-3)
        broken = V._BrokenReparam(rec, 0.5, 0.6)
        c.gt(f"{mid}.broken_velocity", critical_point_test(m, broken, P, Q).legendre_jump, 1e-3)
        d = V._g_orthogonal(fundamental_tensor(m, xb, vb).g, vb)
        tilted = SubmanifoldPatch.line(xb, d + 0.5 * np.linalg.norm(d) * vb / np.linalg.norm(vb))
        c.gt(f"{mid}.tilted_endpoint", critical_point_test(m, rec, P, tilted).orthogonality_Q, 1e-3)
    c.finish()


def test_criterion_6_curvature(acceptance):
    c = Criterion(6, acceptance)
    for mid in IDS:
        m = catalog.from_spec(mid)
        c.le(f"{mid}.route_agreement", V.check_route_agreement(m, rng(mid, "routes")), 1e-6)
        c.le(f"{mid}.variation_independence", V.check_variation_independence(m, rng(mid, "indep")), 1e-6)
    for mid, K, tol in (("euclidean", 0.0, 1e-6), ("quartic", 0.0, 1e-6), ("sphere", 1.0, 1e-6),
                        ("hyperbolic", -1.0, 1e-6), ("funk", -0.25, 1e-5)):
        m = catalog.from_spec(mid)
        flags = random_flags(m, 20, seed=11)
        worst = max(abs(flag_curvature(m, x, v, w, route) - K) for x, v, w in flags for route in ("spray", "variational"))
        c.le(f"{mid}.flag_curvature", worst, tol)
    c.runtime(60)
    c.finish()


def test_criterion_7_jacobi(acceptance):
    c = Criterion(7, acceptance)
    for mid in IDS:
        m = catalog.from_spec(mid)
        c.le(f"{mid}.geodesic_variation", V.check_geodesic_variation(m, rng(mid, "jv")), 1e-5)
        c.le(f"{mid}.dexp", V.check_dexp(m, rng(mid, "dexp")), 1e-5)
        c.le(f"{mid}.wronskian", V.check_wronskian(m, rng(mid, "wr")), 1e-7)
        c.le(f"{mid}.tangential", V.check_tangential(m, rng(mid, "tan")), 1e-6)
    s = catalog.sphere()
    pts = conjugate_points(s, integrate_geodesic(s, [math.pi / 2, 0.0], [0.0, 1.0], (0.0, 3.5)))
    c.le("sphere.conjugate", abs(pts[0].t - math.pi) if len(pts) == 1 else math.inf, 1e-6)
    e = catalog.euclidean()
    pts = focal_points(e, integrate_geodesic(e, [1.0, 0.0], [-1.0, 0.0], (0.0, 1.5)), SubmanifoldPatch.circle([0, 0], 1.0))
    c.le("circle.focal", abs(pts[0].t - 1.0) if len(pts) == 1 else math.inf, 1e-6)
    st = catalog.sphere("stereographic")
    pts = focal_points(st, integrate_geodesic(st, [1.0, 0.0], [-1.0, 0.0], (0.0, 2.0)), SubmanifoldPatch.circle([0, 0], 1.0))
    c.le("equator.focal", abs(pts[0].t - math.pi / 2) if len(pts) == 1 else math.inf, 1e-6)
    c.finish()


def test_criterion_8_index_form(acceptance):
    c = Criterion(8, acceptance)
    for mid in IDS:
        m = catalog.from_spec(mid)
        c.le(f"{mid}.symmetry", V.check_index_symmetry(m, rng(mid, "isym")), 1e-7)
        r = rng(mid, "kernel")
        rec, P, Q, J, T = V._index_setup(m, r)
        A = P.tangent_basis()[:, 0]
        Ws = [V._endpoint_field(r, rec, A, T) for _ in range(10)]
        c.le(f"{mid}.kernel", max(abs(index_form(m, rec, P, Q, J, W)) for W in Ws), 1e-6)
        bump = V._bump_field(r, rec, scale=0.5)
        perturbed = LinearCombination([(1.0, J), (1.0, bump)])
        c.gt(f"{mid}.perturbed", max(abs(index_form(m, rec, P, Q, perturbed, W)) for W in Ws + [bump]), 1e-3)
        c.le(f"{mid}.duality", V.check_duality(m, rng(mid, "dual")), 1e-7)
    c.finish()


def _cli(args, stdin=None):
    return subprocess.run([sys.executable, "-m", "finslerlab", *args], input=stdin, capture_output=True, timeout=900)


def test_criterion_9_cli(acceptance):
    c = Criterion(9, acceptance)
    scen = json.dumps({"metric": "randers", "task": "flagcurv", "flags": 5})
    a = _cli(["run", "--scenario", "-", "--seed", "42"], scen.encode())
    b = _cli(["run", "--scenario", "-", "--seed", "42"], scen.encode())
    c.le("flagcurv.exit", float(a.returncode), 0)
    c.le("flagcurv.byte_mismatch", float(a.stdout != b.stdout or not a.stdout), 0)
    t0 = time.perf_counter()
    full = _cli(["validate", "--seed", "0"])
    elapsed = time.perf_counter() - t0
    c.le("validate.exit", float(full.returncode), 0)
    c.le("validate.runtime_s", elapsed, 300)
    fails = [ln for ln in full.stdout.decode().splitlines() if ln.endswith(",fail")]
    c.le("validate.failed_checks", float(len(fails)), 0)
    c.finish()


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
