"""Kernel backend selection.

The compiled extension ``fastbench._ckernels`` is used when it imports;
otherwise the numpy implementation in :mod:`fastbench._pykernels`. Set
``FASTBENCH_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _pykernels

python_backend = _pykernels

compiled_backend = None
if os.environ.get("FASTBENCH_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as compiled_backend  # type: ignore[no-redef]
    except ImportError:  # extension not built
        compiled_backend = None

backend = compiled_backend if compiled_backend is not None else python_backend
BACKEND = backend.BACKEND

QP_OPTIMAL = _pykernels.QP_OPTIMAL
QP_INFEASIBLE = _pykernels.QP_INFEASIBLE
QP_MAX_ITER = _pykernels.QP_MAX_ITER


def available_backends() -> dict:
    out = {"python": python_backend}
    if compiled_backend is not None:
        out["cython"] = compiled_backend
    return out
