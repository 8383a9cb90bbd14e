"""Compiled vs numpy jet kernels: raw products, Horner composition, and end-to-end work.

Run with ``python benchmarks/bench_jets.py``.  The end-to-end rows swap the
kernels used by :mod:`finslerlab.jets` in place, so both backends run the
exact same Python code around them.
"""

import argparse
import contextlib
import timeit

import numpy as np

from finslerlab import _jetcore_py, _kernels, catalog, jets
from finslerlab.connection import LagrangianExpansion
from finslerlab.geodesic import integrate_geodesic


def backends():
    out = {"python": _jetcore_py}
    if _kernels.compiled_kernels is not None:
        out["cython"] = _kernels.compiled_kernels
    return out


@contextlib.contextmanager
def using(module):
    saved = _kernels.mul, _kernels.horner
    _kernels.mul, _kernels.horner = module.mul, module.horner
    try:
        yield
    finally:
        _kernels.mul, _kernels.horner = saved


def best(fn, number, repeat=5):
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def kernel_rows(rng):
    rows = []
    for ndir, order in ((2, 4), (4, 4), (8, 4)):
        sp = jets.JetSpace.get(ndir, order)
        a, b = rng.normal(size=(2, sp.size))
        b[0] = 0.0
        coefs = rng.normal(size=order + 1)
        ref = None
        for name, mod in backends().items():
            t_mul = best(lambda: mod.mul(a, b, sp.ti, sp.tj, sp.tk, sp.size), 2000)
            t_hor = best(lambda: mod.horner(coefs, b, sp.ti, sp.tj, sp.tk, sp.size), 500)
            val = mod.mul(a, b, sp.ti, sp.tj, sp.tk, sp.size)
            if ref is None:
                ref = val
            rows.append((f"mul   ndir={ndir} order={order} size={sp.size}", name, t_mul, float(np.max(np.abs(val - ref)))))
            rows.append((f"horner ndir={ndir} order={order}", name, t_hor, 0.0))
    return rows


def end_to_end_rows():
    rows = []
    m = catalog.from_spec("randers")
    x, v = np.array([0.1, -0.2]), np.array([0.5, 0.3])
    for name, mod in backends().items():
        with using(mod):
            t_curv = best(lambda: LagrangianExpansion(m, x, v, order=4).spray_curvature(), 20)
            t_geo = best(lambda: integrate_geodesic(m, x, v, (0.0, 1.0)), 1, repeat=3)
            R = LagrangianExpansion(m, x, v, order=4).spray_curvature()
        rows.append(("spray curvature (randers, order 4)", name, t_curv, float(np.max(np.abs(R)))))
        rows.append(("geodesic on [0, 1] (randers)", name, t_geo, 0.0))
    return rows


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    print(f"active backend: {_kernels.BACKEND}")
    print(f"{'case':42s} {'backend':8s} {'time':>12s}  check")
    for case, name, t, chk in kernel_rows(rng) + end_to_end_rows():
        print(f"{case:42s} {name:8s} {t * 1e6:10.1f}us  {chk:.3g}")


if __name__ == "__main__":
    main()
