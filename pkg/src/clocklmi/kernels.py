"""Kernel selection: compiled Cython module when importable, numpy otherwise.

Set ``CLOCKLMI_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels
if os.environ.get("CLOCKLMI_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels

horner_grid = _impl.horner_grid
rk4_steps = _impl.rk4_steps
rk4_step = _impl.rk4_step

__all__ = ["BACKEND", "horner_grid", "rk4_steps", "rk4_step"]
