"""Hot-loop kernels with a compiled core and a pure-numpy fallback.

Import-time selection: prefer the Cython extension, fall back to numpy.
``PRISMSEL_FORCE_FALLBACK=1`` forces the numpy path (used by the parity
tests and the benchmark).
"""

import os

from . import _fallback

if os.environ.get("PRISMSEL_FORCE_FALLBACK", "0") == "1":
    _impl = _fallback
    USING_NATIVE = False
else:
    try:
        from . import _speedups as _impl

        USING_NATIVE = True
    except ImportError:
        _impl = _fallback
        USING_NATIVE = False

fl_gain = _impl.fl_gain
fl_gains_many = _impl.fl_gains_many
fl_commit = _impl.fl_commit

PHI_PLAIN = 0
PHI_QCAP = 1
PHI_PCG = 2
PHI_CMI = 3
