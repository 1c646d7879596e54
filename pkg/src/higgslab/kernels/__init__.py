"""Hot loops of the Toda solver.

The compiled extension is used when it was built and ``HIGGSLAB_PURE_PYTHON``
is unset; otherwise the numpy implementation is selected.  ``BACKEND`` names
the active one.
"""

from __future__ import annotations

import os

from . import _toda_py

__all__ = ["BACKEND", "toda_residual", "toda_jvp", "python_backend", "compiled_backend"]

python_backend = _toda_py
compiled_backend = None

if not os.environ.get("HIGGSLAB_PURE_PYTHON"):
    try:
        from . import _toda_cy as compiled_backend  # type: ignore[no-redef]
    except ImportError:  # extension not built
        compiled_backend = None

_active = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "cython" if compiled_backend is not None else "python"
toda_residual = _active.toda_residual
toda_jvp = _active.toda_jvp
