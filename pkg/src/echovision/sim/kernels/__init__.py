"""Ray/box intersection kernels.

The compiled extension is preferred when present; the numpy fallback
implements the same arithmetic in the same evaluation order, so both
backends return bit-identical results. Set ECHOVISION_FORCE_BACKEND to
``numpy`` or ``compiled`` to override selection.
"""

import os

_forced = os.environ.get("ECHOVISION_FORCE_BACKEND", "").strip().lower()

if _forced == "numpy":
    from .raycast_np import cast_rays
    BACKEND = "numpy"
elif _forced == "compiled":
    from ._raycast import cast_rays
    BACKEND = "compiled"
else:
    try:
        from ._raycast import cast_rays
        BACKEND = "compiled"
    except ImportError:
        from .raycast_np import cast_rays
        BACKEND = "numpy"

__all__ = ["cast_rays", "BACKEND"]
