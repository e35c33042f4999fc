"""Scan-kernel backend selection.

The compiled ``_scan`` extension is used when it imports; otherwise the numpy
kernels in ``_scan_py``. Set ``RAIRS_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _scan_py
from ._scan_py import ID_BITS, ID_MASK, INVALID_ID

_impl = _scan_py
BACKEND = "python"
if not os.environ.get("RAIRS_PURE_PYTHON"):
    try:
        from . import _scan as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        pass

scan_codes = _impl.scan_codes
scan_misc = _impl.scan_misc


def available_backends():
    out = {"python": _scan_py}
    try:
        from . import _scan

        out["cython"] = _scan
    except ImportError:
        pass
    return out


__all__ = ["BACKEND", "ID_BITS", "ID_MASK", "INVALID_ID", "scan_codes",
           "scan_misc", "available_backends"]
