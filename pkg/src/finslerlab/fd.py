"""Finite-difference oracles (used by the validation suite and the tests)."""

from functools import lru_cache

import numpy as np

STENCIL_HALF_WIDTH = 4


@lru_cache(maxsize=None)
def _weights(k, half_width=STENCIL_HALF_WIDTH):
    nodes = np.arange(-half_width, half_width + 1, dtype=float)
    V = np.vander(nodes, increasing=True).T
    rhs = np.zeros(len(nodes))
    rhs[k] = float(np.prod(np.arange(1, k + 1)))
    return nodes, np.linalg.solve(V, rhs)


def central_derivative(f, k, h):
    """k-th derivative of scalar or array ``f`` at 0 from a symmetric 9-point stencil."""
    nodes, w = _weights(k)
    vals = [np.asarray(f(t * h), dtype=float) for t in nodes]
    return sum(wi * vi for wi, vi in zip(w, vals)) / h**k


def richardson_derivative(f, k, h):
    """Central differences at ``h`` and ``h/2`` combined by one Richardson step."""
    p = 8 if k <= 2 else 6
    d1 = central_derivative(f, k, h)
    d2 = central_derivative(f, k, h / 2)
    return d2 + (d2 - d1) / (2**p - 1)


def adaptive_derivative(f, k, h0, levels=6):
    """Richardson estimate at the step where successive halvings agree best.

    Returns ``(value, spread)`` where ``spread`` is that best agreement.
    """
    ests = []
    for i in range(levels):
        try:
            ests.append(richardson_derivative(f, k, h0 / 2**i))
        except (ValueError, ArithmeticError):
            # the stencil left the domain; smaller steps may still fit
            ests.append(None)
    spreads = [
        float(np.max(np.abs(ests[i + 1] - ests[i]))) if ests[i] is not None and ests[i + 1] is not None else np.inf
        for i in range(levels - 1)
    ]
    i = int(np.argmin(spreads))
    if not np.isfinite(spreads[i]):
        raise ValueError("no finite-difference step fits inside the domain")
    return ests[i + 1], spreads[i]


def central_first(f, h):
    """Classic 5-point first derivative."""
    return (f(-2 * h) - 8 * f(-h) + 8 * f(h) - f(2 * h)) / (12 * h)


def central_second(f, h):
    """Classic 5-point second derivative."""
    return (-f(-2 * h) + 16 * f(-h) - 30 * f(0.0) + 16 * f(h) - f(2 * h)) / (12 * h * h)
