"""Select the compiled kernels when available, else the pure-Python twins.

Set ``CONFLAB_PURE_PYTHON=1`` to force the fallback (used by the
equivalence tests and the benchmark).
"""
import os

from . import _pykernels

kernels = _pykernels
if os.environ.get("CONFLAB_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as kernels  # type: ignore[no-redef]
    except ImportError:  # extension not built
        kernels = _pykernels

DegenerateInput = _pykernels.DegenerateInput
NAME = kernels.NAME
