"""LSTM kernel backend selection.

Imports the compiled extension when present, otherwise falls back to the
pure-numpy implementation.  ``SLFNET_PURE_PYTHON=1`` forces the fallback
regardless of what is installed.  ``BACKEND`` names the active choice.
"""

import os

from . import reference

if os.environ.get("SLFNET_PURE_PYTHON"):
    _impl = reference
    BACKEND = "python"
else:
    try:
        from . import _lstm as _impl  # type: ignore[attr-defined]
        BACKEND = "compiled"
    except ImportError:
        _impl = reference
        BACKEND = "python"

lstm_forward = _impl.lstm_forward
lstm_backward = _impl.lstm_backward

__all__ = ["BACKEND", "lstm_forward", "lstm_backward", "reference"]
