"""Backend selection for the hot scanning kernel.

The compiled ``_scan`` extension is used when it was built; otherwise, or when
``DEEPCORPUS_PURE_PYTHON=1`` is set, the pure-Python twin is used. Both return
identical results.
"""
import os

from . import _scan_py

if os.environ.get("DEEPCORPUS_PURE_PYTHON") == "1":
    _impl = _scan_py
    BACKEND = "python"
else:
    try:
        from . import _scan as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        _impl = _scan_py
        BACKEND = "python"

scan_longest = _impl.scan_longest

__all__ = ["BACKEND", "scan_longest"]
