"""Hot numeric kernels.

The numba path is used when numba imports cleanly and ``DRASTOCH_PURE_NUMPY``
is unset (or ``0``). Setting ``DRASTOCH_PURE_NUMPY=1`` forces the numpy
fallback. Both modules expose the same functions; arrays passed in must
already have the dtypes documented in ``_numpy``.
"""

import os

from . import _numpy

BACKEND = "numpy"
_impl = _numpy

if os.environ.get("DRASTOCH_PURE_NUMPY", "0") in ("", "0"):
    try:
        from . import _numba
    except ImportError:  # pragma: no cover - numba is optional
        pass
    else:
        _impl = _numba
        BACKEND = "numba"

pair_sqdists = _impl.pair_sqdists
tempered_index = _impl.tempered_index
query_logits = _impl.query_logits
query_stage = _impl.query_stage
summary_stage = _impl.summary_stage
update_stage = _impl.update_stage

__all__ = [
    "BACKEND",
    "pair_sqdists",
    "tempered_index",
    "query_logits",
    "query_stage",
    "summary_stage",
    "update_stage",
]
