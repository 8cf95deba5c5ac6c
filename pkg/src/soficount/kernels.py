"""Kernel backend selection.

The compiled module ``_ckernels`` is used when it imports; otherwise, or when
the environment variable ``SOFICOUNT_PURE`` is set to a non-empty value other
than ``0``, the numpy module ``_pykernels`` is used. Both expose the same
functions and return identical results.
"""

from __future__ import annotations

import os

from . import _pykernels

pure = _pykernels

try:
    from . import _ckernels as compiled
except ImportError:  # not built
    compiled = None

if compiled is not None and os.environ.get("SOFICOUNT_PURE", "0") in ("", "0"):
    active = compiled
else:
    active = pure

BACKEND = active.BACKEND


def backends() -> dict:
    out = {"numpy": pure}
    if compiled is not None:
        out["cython"] = compiled
    return out


labeling_defects = active.labeling_defects
enumerate_defects = active.enumerate_defects
gamma_labels = active.gamma_labels
decode = active.decode
