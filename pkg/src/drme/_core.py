"""Backend selection for the compute kernels.

Prefers the compiled ``_core_cy`` extension; falls back to the numpy twin.
Set DRME_PURE_PYTHON=1 to force the fallback (useful for benchmarking and
parity tests).
"""

import os

if os.environ.get("DRME_PURE_PYTHON"):
    from . import _core_py as impl

    BACKEND = "python"
else:
    try:
        from . import _core_cy as impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        from . import _core_py as impl  # type: ignore[no-redef]

        BACKEND = "python"

mlp_forward = impl.mlp_forward
mlp_loss_grads = impl.mlp_loss_grads
mlp_input_grads = impl.mlp_input_grads
svgd_direction = impl.svgd_direction
median_sqdist = impl.median_sqdist
