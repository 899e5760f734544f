"""Hot-kernel dispatch: numba implementation or pure-numpy fallback.

See ``voterlab.backend`` for how the backend is chosen.
"""

from .. import backend

if backend.USE_NUMBA:
    from . import numba_impl as _impl
else:  # pragma: no cover - exercised via VOTERLAB_BACKEND=numpy
    from . import numpy_impl as _impl

lambda_counts = _impl.lambda_counts
standard_round = _impl.standard_round
biased_round = _impl.biased_round
consensus_standard_batch = _impl.consensus_standard_batch
consensus_biased_batch = _impl.consensus_biased_batch
coalescing_batch = _impl.coalescing_batch
conductance_enumerate = _impl.conductance_enumerate
iid_sums = _impl.iid_sums
adaptive_sums = _impl.adaptive_sums
voter_window_sums = _impl.voter_window_sums
one_step_vol_samples = _impl.one_step_vol_samples

__all__ = [
    "lambda_counts",
    "standard_round",
    "biased_round",
    "consensus_standard_batch",
    "consensus_biased_batch",
    "coalescing_batch",
    "conductance_enumerate",
    "iid_sums",
    "adaptive_sums",
    "voter_window_sums",
    "one_step_vol_samples",
]
