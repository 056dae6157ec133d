"""Backend selection for the likelihood kernels.

The compiled extension is used when it imported cleanly; otherwise the numpy
twin takes over. Set ``CYCLESYNC_PURE_PYTHON=1`` to force the fallback (used
by the kernel-parity tests and the benchmark).
"""

from __future__ import annotations

import os

if os.environ.get("CYCLESYNC_PURE_PYTHON", "") == "1":
    from . import _kernels_py as _impl

    BACKEND = "python"
else:
    try:
        from . import _zibkern as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:  # extension not built on this platform
        from . import _kernels_py as _impl

        BACKEND = "python"

zib_terms = _impl.zib_terms
zib_pointwise = _impl.zib_pointwise
