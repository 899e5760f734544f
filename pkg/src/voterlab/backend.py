"""Kernel backend selection.

The hot inner loops (voter rounds, coalescing walks, subset enumeration,
tail-bound sampling) exist twice: a numba ``@njit`` implementation and a
pure-numpy vectorised fallback. Both consume pre-drawn uniforms positionally
(one slot per node per round), so the two backends produce bit-identical
results from the same seed.

Selection is done once at import time via the ``VOTERLAB_BACKEND``
environment variable: ``numba`` (default) or ``numpy``. If numba is not
importable the numpy path is used silently.
"""

import os
import warnings

_requested = os.environ.get("VOTERLAB_BACKEND", "numba").strip().lower()

if _requested not in ("numba", "numpy"):
    warnings.warn(
        f"VOTERLAB_BACKEND={_requested!r} not recognised; using 'numba'",
        RuntimeWarning,
        stacklevel=1,
    )
    _requested = "numba"

if _requested == "numba":
    try:
        import numba  # noqa: F401
    except ImportError:  # pragma: no cover
        _requested = "numpy"

BACKEND = _requested
USE_NUMBA = BACKEND == "numba"
