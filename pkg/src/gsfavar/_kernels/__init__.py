"""Hot inner loops with a compiled backend and a pure-Python fallback.

The compiled ``_ffbs_ext`` extension is used when it has been built; setting
``GSFAVAR_PURE_PYTHON=1`` forces the NumPy implementation.
"""

from __future__ import annotations

import os

from . import _ffbs_py

BACKEND = "python"
ffbs = _ffbs_py.ffbs
psd_cholesky = _ffbs_py.psd_cholesky

if os.environ.get("GSFAVAR_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ffbs_ext
    except ImportError:  # extension not built
        _ffbs_ext = None
    else:
        BACKEND = "cython"
        ffbs = _ffbs_ext.ffbs
        psd_cholesky = _ffbs_ext.psd_cholesky
else:
    _ffbs_ext = None

__all__ = ["BACKEND", "ffbs", "psd_cholesky", "_ffbs_py", "_ffbs_ext"]
