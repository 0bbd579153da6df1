"""The compiled kernels and the numpy fallback must agree."""
import os
import subprocess
import sys

import numpy as np
import pytest

from klnmf import _ext
from klnmf._ext import fallback

compiled = _ext.compiled
needs_compiled = pytest.mark.skipif(compiled is None, reason="compiled extension not built")


def test_backend_flag():
    assert _ext.BACKEND in ("cython", "numpy")
    assert (_ext.BACKEND == "cython") == (compiled is not None)


def test_pure_python_switch():
    env = dict(os.environ, KLNMF_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", "import klnmf; print(klnmf.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "numpy"


@needs_compiled
def test_kl_ratio_agrees(rng):
    X = rng.uniform(0, 2, (30, 20)) * (rng.random((30, 20)) > 0.3)
    WH = rng.uniform(0.1, 3, (30, 20))
    Ra, ka, na = compiled.kl_ratio(X, WH)
    Rb, kb, nb = fallback.kl_ratio(X, WH)
    np.testing.assert_allclose(Ra, Rb, rtol=1e-15)
    assert ka == pytest.approx(kb, rel=1e-10) and na == nb == 0
    WH[3, 4] = 0.0
    assert compiled.kl_ratio(X, WH)[2] == fallback.kl_ratio(X, WH)[2] == 1
    assert compiled.kl_value(X, WH)[1] == 1


@needs_compiled
@pytest.mark.parametrize("kind", [_ext.KIND_L1, _ext.KIND_SQFRO])
def test_prox_agrees(rng, kind):
    P = rng.uniform(-50, 50, (40, 7))
    for ml in (0.0, 0.3, 7.0):
        np.testing.assert_allclose(compiled.prox_values(P, ml, kind), fallback.prox_values(P, ml, kind), rtol=1e-14)


@needs_compiled
@pytest.mark.parametrize("axis", [0, 1])
def test_prox_block_agrees(rng, axis):
    S = rng.uniform(0, 5, (9, 6))
    Y = rng.uniform(0.1, 2, (9, 6))
    lin = rng.uniform(1, 4, 6 if axis == 1 else 9)
    for kind in (_ext.KIND_L1, _ext.KIND_SQFRO):
        a = compiled.prox_block(S, Y, lin, 0.05, 0.01, kind, axis)
        b = fallback.prox_block(S, Y, lin, 0.05, 0.01, kind, axis)
        np.testing.assert_allclose(a, b, rtol=1e-12)


@needs_compiled
def test_ccd_rows_agrees(rng):
    X = rng.uniform(0, 2, (12, 10)) * (rng.random((12, 10)) > 0.2)
    A0 = rng.uniform(0.1, 1, (12, 3))
    B = rng.uniform(0.1, 1, (3, 10))
    outs = []
    for mod in (compiled, fallback):
        A = A0.copy()
        AB = A @ B
        mod.ccd_rows(X, A, B, AB, 20, 1e-15, 1e-12)
        outs.append((A, AB))
    np.testing.assert_allclose(outs[0][0], outs[1][0], rtol=1e-10, atol=1e-14)
    np.testing.assert_allclose(outs[0][1], outs[1][1], rtol=1e-10, atol=1e-14)


def test_fallback_solver_run_agrees_with_active_backend():
    code = (
        "from klnmf import *;"
        "p,_=generate_synthetic(SynthSpec(15,12,3,seed=5));"
        "Z,_=run_solver(p,initial_point(p,5),SolverConfig(max_iter=40));"
        "print(repr(objective(p,Z)))"
    )
    vals = []
    for flag in ("1", ""):
        env = dict(os.environ, KLNMF_PURE_PYTHON=flag)
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        vals.append(float(out.stdout))
    assert vals[0] == pytest.approx(vals[1], rel=1e-10)
