"""Pick the compiled simulator kernels when available.

Set ``SEMCHAN_PURE=1`` to force the numpy fallback.
"""
import os
from types import SimpleNamespace

from . import _pysim

PURE = SimpleNamespace(name="numpy", sample_outputs=_pysim.sample_outputs, ml_decode=_pysim.ml_decode)

try:
    from . import _fastsim
except ImportError:  # extension not built
    COMPILED = None
else:
    COMPILED = SimpleNamespace(name="cython", sample_outputs=_fastsim.sample_outputs,
                               ml_decode=_fastsim.ml_decode)

if os.environ.get("SEMCHAN_PURE") or COMPILED is None:
    ACTIVE = PURE
else:
    ACTIVE = COMPILED


def get(name=None):
    """Backend by name ("cython" or "numpy"); the import-time choice by default."""
    if name is None:
        return ACTIVE
    if name == "numpy":
        return PURE
    if name == "cython":
        if COMPILED is None:
            raise ImportError("compiled simulator extension is not built")
        return COMPILED
    raise ValueError(f"unknown backend {name!r}")
