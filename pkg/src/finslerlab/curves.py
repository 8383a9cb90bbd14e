"""Piecewise-smooth curves and vector fields along them.

Everything that lives along a curve is a *track*: an object with an interval
``[a, b]``, break instants, and ``eval(t, nderiv, side)`` returning the array
``[f(t), f'(t), ..., f^(nderiv)(t)]`` of chart-coordinate derivatives.  At a
break the one-sided value must be requested with ``side="left"`` or
``side="right"``; positions are continuous, so ``nderiv=0`` needs no side.
"""

import math

import numpy as np
from scipy.interpolate import CubicSpline

from . import jets
from .errors import BreakAmbiguityError, BreakMismatchError

BREAK_TOL = 1e-12
_SIDES = (None, "left", "right")


class Track:
    """Base class: subclasses implement ``_eval(t, nderiv, segment)``."""

    def __init__(self, a, b, breaks=(), dim=None):
        a, b = float(a), float(b)
        if not b > a:
            raise ValueError(f"track interval must satisfy a < b, got [{a}, {b}]")
        breaks = tuple(sorted(float(t) for t in breaks))
        for t in breaks:
            if not a < t < b:
                raise ValueError(f"break {t} is not interior to [{a}, {b}]")
        self.a, self.b, self.breaks, self.dim = a, b, breaks, dim
        self._edges = (a,) + breaks + (b,)

    @property
    def segments(self):
        return list(zip(self._edges[:-1], self._edges[1:]))

    def segment_of(self, t, side=None, nderiv=1):
        """Index of the smooth segment used to evaluate at ``t``."""
        if side not in _SIDES:
            raise ValueError(f"side must be one of {_SIDES}")
        if t < self.a - BREAK_TOL or t > self.b + BREAK_TOL:
            raise ValueError(f"t={t} outside [{self.a}, {self.b}]")
        for i, tb in enumerate(self.breaks):
            if abs(t - tb) <= BREAK_TOL:
                if side is None:
                    if nderiv == 0:
                        return i
                    raise BreakAmbiguityError(f"t={t} is a break; pass side='left' or 'right'", t=t)
                return i if side == "left" else i + 1
        return int(np.searchsorted(self.breaks, t))

    def eval(self, t, nderiv=0, side=None):
        t = float(t)
        seg = self.segment_of(t, side, nderiv)
        return np.asarray(self._eval(min(max(t, self.a), self.b), nderiv, seg), dtype=float)

    def __call__(self, t, side=None):
        return self.eval(t, 0, side)[0]

    def derivative(self, t, side=None):
        return self.eval(t, 1, side)[1]

    def taylor(self, t, space, direction, side=None):
        """Object array of jets ``f(t + eps)`` in direction ``direction`` of ``space``."""
        K = space.order
        d = self.eval(t, K, side)
        n = d.shape[1]
        out = np.empty(n, dtype=object)
        for i in range(n):
            acc = jets.Jet.constant(space, d[0, i])
            for k in range(1, K + 1):
                alpha = [0] * space.ndir
                alpha[direction] = k
                acc.c[space.index[tuple(alpha)]] = d[k, i] / math.factorial(k)
            out[i] = acc
        return out

    def sample(self, ts, nderiv=0):
        """Values (or a derivative) at instants ``ts``; breaks use the right side."""
        return np.array([self.eval(t, nderiv, "right" if self._is_break(t) else None)[nderiv] for t in ts])

    def _is_break(self, t):
        return any(abs(t - tb) <= BREAK_TOL for tb in self.breaks)

    # algebra --------------------------------------------------------------

    def __add__(self, other):
        return LinearCombination([(1.0, self), (1.0, other)])

    def __sub__(self, other):
        return LinearCombination([(1.0, self), (-1.0, other)])

    def __mul__(self, c):
        return LinearCombination([(c, self)])

    __rmul__ = __mul__

    def scaled(self, f):
        """Track ``t -> f(t) * self(t)`` for a jet-evaluable scalar ``f``."""
        return LinearCombination([(f, self)])


class FunctionTrack(Track):
    """A track given by jet-evaluable callables, one per smooth segment."""

    def __init__(self, funcs, a, b, breaks=()):
        super().__init__(a, b, breaks)
        if callable(funcs):
            funcs = [funcs] * (len(self.breaks) + 1)
        if len(funcs) != len(self.breaks) + 1:
            raise ValueError("need one function per smooth segment")
        self.funcs = list(funcs)
        self.dim = len(np.atleast_1d(jets.univariate(self.funcs[0], a, 0)[0]))

    def _eval(self, t, nderiv, seg):
        return jets.univariate(self.funcs[seg], t, nderiv)


class SampledTrack(Track):
    """Cubic-spline interpolation of samples, independently on each segment.

    ``ts`` must contain every break; samples at a break belong to both
    adjacent segments unless ``jumps`` gives separate right-hand values.
    """

    def __init__(self, ts, values, breaks=(), jumps=None):
        ts = np.asarray(ts, dtype=float)
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if np.any(np.diff(ts) <= 0):
            raise ValueError("sample instants must be strictly increasing")
        super().__init__(ts[0], ts[-1], breaks, values.shape[1])
        self.splines = []
        jumps = jumps or {}
        for lo, hi in self.segments:
            mask = (ts >= lo - BREAK_TOL) & (ts <= hi + BREAK_TOL)
            seg_t, seg_v = ts[mask], values[mask].copy()
            if lo in jumps:
                seg_v[0] = jumps[lo]
            if len(seg_t) < 4:
                raise ValueError(f"segment [{lo}, {hi}] needs at least 4 samples")
            self.splines.append(CubicSpline(seg_t, seg_v, axis=0))

    def _eval(self, t, nderiv, seg):
        sp = self.splines[seg]
        return np.array([sp(t, k) if k <= 3 else np.zeros(self.dim) for k in range(nderiv + 1)])


class LinearCombination(Track):
    """``sum_i c_i(t) * track_i(t)`` with constant or jet-evaluable scalar ``c_i``."""

    def __init__(self, terms):
        first = terms[0][1]
        for _, tr in terms:
            if (tr.a, tr.b) != (first.a, first.b) or tr.breaks != first.breaks:
                raise BreakMismatchError("combined tracks must share interval and breaks")
        super().__init__(first.a, first.b, first.breaks, first.dim)
        self.terms = terms
        self.curve = getattr(first, "curve", None)

    def _eval(self, t, nderiv, seg):
        side = None
        if seg < len(self.breaks) and abs(t - self.breaks[seg]) <= BREAK_TOL:
            side = "left"
        elif seg > 0 and abs(t - self.breaks[seg - 1]) <= BREAK_TOL:
            side = "right"
        total = 0.0
        for c, tr in self.terms:
            d = tr.eval(t, nderiv, side)
            if callable(c):
                cd = jets.univariate(c, t, nderiv)
                out = np.zeros_like(d)
                for k in range(nderiv + 1):
                    for j in range(k + 1):
                        out[k] += math.comb(k, j) * cd[j] * d[k - j]
                d = out
            else:
                d = c * d
            total = total + d
        return total


class PiecewiseCurve:
    """Constructors for curves; the result is a track with ``dim`` = chart dimension."""

    @staticmethod
    def from_function(f, a, b, breaks=()):
        """``f(t)`` (or one function per segment) returning chart coordinates."""
        return FunctionTrack(f, a, b, breaks)

    @staticmethod
    def from_samples(ts, xs, breaks=()):
        return SampledTrack(ts, xs, breaks)

    @staticmethod
    def polyline(points, ts):
        """Broken line through ``points`` at instants ``ts`` (breaks at interior instants)."""
        points = np.asarray(points, dtype=float)
        ts = [float(t) for t in ts]

        def piece(i):
            p, q, t0, t1 = points[i], points[i + 1], ts[i], ts[i + 1]
            return lambda t: [p[k] + (q[k] - p[k]) * (t - t0) / (t1 - t0) for k in range(len(p))]

        return FunctionTrack([piece(i) for i in range(len(points) - 1)], ts[0], ts[-1], ts[1:-1])


class VectorFieldAlongCurve:
    """Constructors for vector fields along a given curve track."""

    @staticmethod
    def from_function(curve, f):
        tr = FunctionTrack(f, curve.a, curve.b, curve.breaks)
        tr.curve = curve
        return tr

    @staticmethod
    def from_samples(curve, ts, values, jumps=None):
        tr = SampledTrack(ts, values, curve.breaks, jumps)
        tr.curve = curve
        return tr

    @staticmethod
    def velocity(curve):
        """The velocity field of ``curve`` as a track."""
        return _Velocity(curve)

    @staticmethod
    def constant(curve, w):
        w = [float(c) for c in w]
        return VectorFieldAlongCurve.from_function(curve, lambda t: [0.0 * t + c for c in w])


class _Velocity(Track):
    def __init__(self, curve):
        super().__init__(curve.a, curve.b, curve.breaks, curve.dim)
        self.curve = curve

    def _eval(self, t, nderiv, seg):
        side = None
        if seg < len(self.breaks) and abs(t - self.breaks[seg]) <= BREAK_TOL:
            side = "left"
        elif seg > 0 and abs(t - self.breaks[seg - 1]) <= BREAK_TOL:
            side = "right"
        return self.curve.eval(t, nderiv + 1, side)[1:]


FrameField = VectorFieldAlongCurve
