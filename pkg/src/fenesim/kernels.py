"""Select the compiled characteristic kernel, falling back to numpy.

Set ``FENESIM_PURE_PYTHON=1`` to force the numpy implementation.
"""

import os

from . import _kernels_py

BACKEND = "python"
trace_modes = _kernels_py.trace_modes

if os.environ.get("FENESIM_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels

        trace_modes = _kernels.trace_modes
        BACKEND = "compiled"
    except ImportError:  # extension not built
        pass
