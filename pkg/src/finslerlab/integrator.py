"""Runge-Kutta-Fehlberg 4(5) and fixed-step RK4 with dense output.

The integrators here are small on purpose: the state vectors are short and
every right-hand side evaluation goes through jet arithmetic, so what matters
is control over admissibility checks, exit-time bisection and landing exactly
on requested instants.
"""

import numpy as np

from .errors import DomainExitError, FinslerError, StepFailureError

_C = np.array([0.0, 1 / 4, 3 / 8, 12 / 13, 1.0, 1 / 2])
_A = [
    [],
    [1 / 4],
    [3 / 32, 9 / 32],
    [1932 / 2197, -7200 / 2197, 7296 / 2197],
    [439 / 216, -8.0, 3680 / 513, -845 / 4104],
    [-8 / 27, 2.0, -3544 / 2565, 1859 / 4104, -11 / 40],
]
_B5 = np.array([16 / 135, 0.0, 6656 / 12825, 28561 / 56430, -9 / 50, 2 / 55])
_B4 = np.array([25 / 216, 0.0, 1408 / 2565, 2197 / 4104, -1 / 5, 0.0])

EXIT_TOL = 1e-9


class OdeSolution:
    """Accepted steps ``ts``, states ``ys`` and slopes ``fs``.

    Between steps, :meth:`hermite` interpolates (cubic) and :meth:`refine`
    re-takes one fifth-order step from the preceding node, which keeps the
    integration accuracy at the cost of six right-hand side calls.
    """

    CACHE_SIZE = 64

    def __init__(self, ts, ys, fs, rhs=None):
        self.ts = np.asarray(ts, dtype=float)
        self.ys = np.asarray(ys, dtype=float)
        self.fs = np.asarray(fs, dtype=float)
        self.forward = self.ts[-1] >= self.ts[0]
        self.rhs = rhs
        self._cache = {}

    @property
    def t0(self):
        return self.ts[0]

    @property
    def t1(self):
        return self.ts[-1]

    def locate(self, t):
        """Index ``i`` with ``t`` in the step ``[ts[i], ts[i+1]]``."""
        ts = self.ts if self.forward else -self.ts
        tt = t if self.forward else -t
        lo, hi = ts[0], ts[-1]
        tol = 1e-12 * max(1.0, abs(lo), abs(hi))
        if tt < lo - tol or tt > hi + tol:
            raise ValueError(f"t={t} outside the integrated interval [{self.ts[0]}, {self.ts[-1]}]")
        i = int(np.searchsorted(ts, tt, side="right")) - 1
        return min(max(i, 0), len(ts) - 2)

    def hermite(self, t, i=None):
        """State and slope at ``t`` by cubic Hermite interpolation."""
        if len(self.ts) == 1:
            return self.ys[0], self.fs[0]
        i = self.locate(t) if i is None else i
        t0, t1 = self.ts[i], self.ts[i + 1]
        h = t1 - t0
        s = (t - t0) / h
        y0, y1, f0, f1 = self.ys[i], self.ys[i + 1], self.fs[i], self.fs[i + 1]
        h00 = 2 * s**3 - 3 * s**2 + 1
        h10 = s**3 - 2 * s**2 + s
        h01 = -2 * s**3 + 3 * s**2
        h11 = s**3 - s**2
        y = h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1
        d00 = (6 * s**2 - 6 * s) / h
        d10 = 3 * s**2 - 4 * s + 1
        d01 = (-6 * s**2 + 6 * s) / h
        d11 = 3 * s**2 - 2 * s
        dy = d00 * y0 + d10 * f0 + d01 * y1 + d11 * f1
        return y, dy

    def refine(self, t):
        """State and slope at ``t`` from one RKF45 step off the preceding node."""
        if self.rhs is None or len(self.ts) == 1:
            return self.hermite(t)
        t = float(t)
        hit = self._cache.get(t)
        if hit is not None:
            return hit
        i = self.locate(t)
        # start from whichever bracketing node is closer
        j = i if abs(t - self.ts[i]) <= abs(self.ts[i + 1] - t) else i + 1
        h = t - self.ts[j]
        if abs(h) <= 1e-15 * max(1.0, abs(t)):
            out = (self.ys[j].copy(), self.fs[j].copy())
        else:
            try:
                y, _ = _rk_step(self.rhs, self.ts[j], self.ys[j], h, self.fs[j])
                out = (y, np.asarray(self.rhs(t, y), dtype=float))
            except (FinslerError, ArithmeticError):
                out = self.hermite(t, i)
        if len(self._cache) >= self.CACHE_SIZE:
            self._cache.pop(next(iter(self._cache)))
        self._cache[t] = out
        return out

    def __call__(self, t):
        return self.hermite(t)[0]


def _rk_step(f, t, y, h, f0):
    k = [f0]
    for s in range(1, 6):
        ys = y + h * sum(a * kk for a, kk in zip(_A[s], k))
        k.append(f(t + _C[s] * h, ys))
    k = np.array(k)
    y5 = y + h * (_B5 @ k)
    err = h * ((_B5 - _B4) @ k)
    return y5, err


def _rk4_step(f, t, y, h, f0):
    k1 = f0
    k2 = f(t + h / 2, y + h / 2 * k1)
    k3 = f(t + h / 2, y + h / 2 * k2)
    k4 = f(t + h, y + h * k3)
    return y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def integrate(
    f,
    t0,
    y0,
    t1,
    rtol=1e-10,
    atol=1e-12,
    method="rkf45",
    step=None,
    valid=None,
    stops=(),
    max_steps=200000,
):
    """Integrate ``y' = f(t, y)`` from ``t0`` to ``t1``.

    ``valid(t, y)`` is checked after every accepted step; when it fails the
    exit instant is bisected on the dense output to ``1e-9`` and a
    :class:`DomainExitError` is raised carrying the partial solution.  A
    domain error raised by ``f`` inside a trial step shrinks the step.
    ``stops`` are instants the integrator lands on exactly.
    """
    t0, t1 = float(t0), float(t1)
    direction = 1.0 if t1 >= t0 else -1.0
    span = abs(t1 - t0)
    y = np.asarray(y0, dtype=float).copy()
    fy = np.asarray(f(t0, y), dtype=float)
    ts, ys, fs = [t0], [y.copy()], [fy.copy()]
    if span == 0.0:
        return OdeSolution(ts, ys, fs, f)
    marks = sorted({float(s) for s in stops if (s - t0) * direction > 0 and (t1 - s) * direction > 0})
    marks = [s for s in marks] + [t1]
    if direction < 0:
        marks = sorted(marks, reverse=True)
    if method == "rk4":
        h = float(step) if step else span / 100.0
    elif method == "rkf45":
        h = float(step) if step else min(span, 0.01 * max(1.0, span))
    else:
        raise ValueError(f"unknown method {method!r}")
    t = t0
    mark_i = 0
    n_steps = 0
    h_min = 1e-13 * max(1.0, span)
    while mark_i < len(marks):
        target = marks[mark_i]
        remaining = abs(target - t)
        if remaining <= 1e-14 * max(1.0, abs(target)):
            mark_i += 1
            continue
        n_steps += 1
        if n_steps > max_steps:
            raise StepFailureError(f"exceeded {max_steps} steps at t={t}", t=t)
        hh = min(h, remaining)
        landing = hh == remaining
        try:
            if method == "rk4":
                y_new = _rk4_step(f, t, y, direction * hh, fy)
                accept, factor = True, 1.0
            else:
                y_new, err = _rk_step(f, t, y, direction * hh, fy)
                scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
                enorm = float(np.max(np.abs(err) / scale))
                if not np.isfinite(enorm):
                    raise StepFailureError("non-finite error estimate", t=t)
                accept = enorm <= 1.0
                factor = 5.0 if enorm == 0.0 else min(5.0, max(0.2, 0.9 * enorm ** (-0.2)))
            t_new = target if landing else t + direction * hh
            fy_new = np.asarray(f(t_new, y_new), dtype=float) if accept else None
        except (FinslerError, ArithmeticError) as exc:
            if isinstance(exc, StepFailureError) and method == "rk4":
                raise
            h = hh / 2.0
            if h < h_min:
                sol = OdeSolution(ts, ys, fs)
                raise _exit(t, sol, f"cannot step past t={t}: {exc}") from exc
            continue
        if not accept:
            h = hh * factor
            if h < h_min:
                raise StepFailureError(f"step size underflow at t={t}", t=t)
            continue
        ts.append(t_new)
        ys.append(y_new.copy())
        fs.append(fy_new.copy())
        if valid is not None and not valid(t_new, y_new):
            sol = OdeSolution(ts, ys, fs)
            t_exit = _bisect_exit(sol, valid, t, t_new)
            raise _exit(t_exit, OdeSolution(ts[:-1], ys[:-1], fs[:-1]), f"left the domain near t={t_exit:.10g}")
        t, y, fy = t_new, y_new, fy_new
        if method == "rkf45":
            h = hh * factor if not landing else max(h, hh * factor)
        if landing:
            mark_i += 1
    return OdeSolution(ts, ys, fs, f)


def _bisect_exit(sol, valid, t_ok, t_bad):
    i = len(sol.ts) - 2
    lo, hi = t_ok, t_bad
    while abs(hi - lo) > EXIT_TOL:
        mid = 0.5 * (lo + hi)
        try:
            ok = valid(mid, sol.hermite(mid, i)[0])
        except (FinslerError, ArithmeticError, ValueError):
            ok = False
        if ok:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _exit(t_exit, partial, message):
    err = DomainExitError(message, t_exit)
    err.partial = partial
    return err
