"""Kernel backend chosen at import: the compiled extension when built, numpy otherwise.

Set ``NONLOCAL_FRINGE_BACKEND=python`` to force the fallback.
"""

import os

from . import _fallback

BACKEND = "python"
if os.environ.get("NONLOCAL_FRINGE_BACKEND", "").lower() != "python":
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _fallback
else:
    _impl = _fallback

ar1_field = _impl.ar1_field
pair_histogram = _impl.pair_histogram
classify_trials = _impl.classify_trials
