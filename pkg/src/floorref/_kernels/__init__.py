"""Hot numeric kernels with a compiled core and a pure-Python fallback.

The compiled extension (``_core``, Cython) is preferred when importable; the
numpy reference implementation (``_ref``) is selected otherwise, or when the
FLOORREF_PURE_PYTHON environment variable is set. Both expose the same three
functions with identical semantics; ``BACKEND`` names the active one.
"""

from __future__ import annotations

import os

if os.environ.get("FLOORREF_PURE_PYTHON"):
    from . import _ref as _impl
else:
    try:
        from . import _core as _impl  # type: ignore[no-redef]
    except ImportError:
        from . import _ref as _impl  # type: ignore[no-redef]

BACKEND: str = _impl.BACKEND
distort_radial = _impl.distort_radial
undistort_radial = _impl.undistort_radial
enclosing_circle = _impl.enclosing_circle

__all__ = ["BACKEND", "distort_radial", "undistort_radial", "enclosing_circle"]
