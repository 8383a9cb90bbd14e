"""Pure numpy fallback for the compiled jet kernels."""

import numpy as np


def mul(a, b, ti, tj, tk, n):
    return np.bincount(tk, weights=a[ti] * b[tj], minlength=n)


def horner(coefs, h, ti, tj, tk, n):
    # h must have zero constant term
    acc = np.zeros(n)
    acc[0] = coefs[-1]
    for k in range(len(coefs) - 2, -1, -1):
        acc = np.bincount(tk, weights=acc[ti] * h[tj], minlength=n)
        acc[0] += coefs[k]
    return acc
