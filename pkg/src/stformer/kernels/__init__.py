"""Hot-kernel backend selection.

The LSTM recurrence is the one sequential inner loop in the model, so it has
a compiled implementation (``stformer._core``, Cython) alongside the numpy
one. The compiled backend is picked automatically when the extension built;
set ``STFORMER_PURE_PYTHON=1`` to force the numpy fallback (used by the
benchmark and for debugging).
"""

from __future__ import annotations

import os

from . import numpy_backend

BACKEND = "numpy"
lstm_seq_forward = numpy_backend.lstm_seq_forward
lstm_seq_backward = numpy_backend.lstm_seq_backward

if os.environ.get("STFORMER_PURE_PYTHON") != "1":
    try:
        from .. import _core

        lstm_seq_forward = _core.lstm_seq_forward
        lstm_seq_backward = _core.lstm_seq_backward
        BACKEND = "compiled"
    except ImportError:
        pass

__all__ = ["BACKEND", "lstm_seq_forward", "lstm_seq_backward", "numpy_backend"]
