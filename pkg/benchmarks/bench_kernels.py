"""Compare the compiled kernels with the numpy fallback.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5] [--size 200x200x30]

Reports the best-of-``repeat`` wall time per kernel for each backend and the
speedup. Both backends are fed identical inputs and their outputs are checked
for agreement before timing.
"""
import argparse
import sys
import timeit

import numpy as np

from klnmf import _ext
from klnmf.data import SynthSpec, generate_synthetic, initial_point
from klnmf.model import build_majorizer
from klnmf.solvers import ExtrapolationState, SolverConfig, mmbpge_step


def kernel_cases(mod, X, Z):
    W, H = Z.W, Z.H
    WH = W @ H
    S_W = W * ((X / WH) @ H.T)
    hsum = np.ascontiguousarray(H.sum(axis=1))
    lam = 1.0 / 250.0
    return {
        "kl_ratio": lambda: mod.kl_ratio(X, WH),
        "prox_block": lambda: mod.prox_block(S_W, W, hsum, lam, 1e-3, _ext.KIND_L1, 1),
        "ccd_rows": lambda: mod.ccd_rows(X, W.copy(), H, WH.copy(), 2, 1e-15, 1e-12),
    }


def full_iteration(mod, p, Z):
    # swap the backend functions used by the solver for the duration of one call
    names = ("kl_ratio", "kl_value", "prox_values", "prox_block", "ccd_rows")
    cfg = SolverConfig(algorithm="mmbpge")
    ext = ExtrapolationState.initial(Z)
    Z1, ext, _ = mmbpge_step(p, Z, ext, cfg)

    def run():
        saved = {n: getattr(_ext, n) for n in names}
        try:
            for n in names:
                setattr(_ext, n, getattr(mod, n))
            mmbpge_step(p, Z1, ext, cfg)
        finally:
            for n, f in saved.items():
                setattr(_ext, n, f)

    return run


def best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--size", default="200x200x30")
    args = ap.parse_args(argv)
    m, n, r = (int(v) for v in args.size.lower().split("x"))

    if _ext.compiled is None:
        print("compiled extension not available; nothing to compare", file=sys.stderr)
        return 1

    p, _ = generate_synthetic(SynthSpec(m, n, r, seed=0))
    Z = initial_point(p, 0, scaled=True)
    build_majorizer(p, Z)  # warm up

    backends = {"cython": _ext.compiled, "numpy": _ext.fallback}
    cases = {name: kernel_cases(mod, p.X, Z) for name, mod in backends.items()}

    # agreement check on the deterministic kernels
    a = cases["cython"]["prox_block"]()
    b = cases["numpy"]["prox_block"]()
    assert np.allclose(a, b, rtol=1e-13, atol=0), "prox_block backends disagree"

    print(f"size {m}x{n}x{r}, best of {args.repeat}")
    print(f"{'kernel':<16}{'cython [ms]':>14}{'numpy [ms]':>14}{'speedup':>10}")
    rows = list(cases["cython"])
    for name in rows + ["mmbpge_step"]:
        if name == "mmbpge_step":
            tc = best(full_iteration(_ext.compiled, p, Z), args.repeat)
            tn = best(full_iteration(_ext.fallback, p, Z), args.repeat)
        else:
            tc = best(cases["cython"][name], args.repeat)
            tn = best(cases["numpy"][name], args.repeat)
        print(f"{name:<16}{tc * 1e3:>14.3f}{tn * 1e3:>14.3f}{tn / tc:>9.2f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
