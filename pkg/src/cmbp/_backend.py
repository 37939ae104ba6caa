"""Pick the simulation kernels at import time.

The compiled module is used when it imports; ``CMBP_PURE_PYTHON=1`` forces
the pure-Python fallback.
"""

from __future__ import annotations

import os

from . import _pykernels

NAME = "python"
compiled = None

if os.environ.get("CMBP_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as compiled  # type: ignore[no-redef]

        NAME = "compiled"
    except ImportError:
        compiled = None

python = _pykernels
