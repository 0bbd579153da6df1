"""Kernel backend selection.

The compiled ``_kernels`` extension is used when it imports; otherwise the
numpy ``fallback`` module. Set ``KLNMF_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import fallback

KIND_SQFRO = fallback.KIND_SQFRO
KIND_L1 = fallback.KIND_L1
WH_FLOOR = fallback.WH_FLOOR

compiled = None
if not os.environ.get("KLNMF_PURE_PYTHON"):
    try:
        from . import _kernels as compiled
    except ImportError:  # extension not built
        compiled = None

backend = compiled if compiled is not None else fallback
BACKEND = "cython" if compiled is not None else "numpy"

kl_ratio = backend.kl_ratio
kl_value = backend.kl_value
prox_values = backend.prox_values
prox_block = backend.prox_block
ccd_rows = backend.ccd_rows

__all__ = [
    "BACKEND",
    "KIND_L1",
    "KIND_SQFRO",
    "WH_FLOOR",
    "backend",
    "compiled",
    "fallback",
    "kl_ratio",
    "kl_value",
    "prox_values",
    "prox_block",
    "ccd_rows",
]
