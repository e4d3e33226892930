"""Select the compiled kernels when available, else the numpy fallback.

Set ``WRAPNET_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _pykernels

if os.environ.get("WRAPNET_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
        BACKEND = "python"

lsap = _impl.lsap
nearest = _impl.nearest
adam_update = _impl.adam_update
scatter_add_rows = _impl.scatter_add_rows
face_conv_stack = _impl.face_conv_stack
face_conv_stack_back = _impl.face_conv_stack_back
