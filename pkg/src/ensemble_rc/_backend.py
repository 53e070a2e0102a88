"""Kernel backend selection.

The compiled ``_ckernels`` extension is used when it imports; otherwise the
numpy implementation in ``_kernels_py`` takes over. Set
``ENSEMBLE_RC_BACKEND=python`` to force the fallback.
"""

import os

from . import _kernels_py

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def available():
    names = ["python"]
    if _ckernels is not None:
        names.insert(0, "cython")
    return names


def get(name=None):
    """Return the kernel module called ``name`` (default: environment / best)."""
    if name is None:
        name = os.environ.get("ENSEMBLE_RC_BACKEND", "auto")
    if name == "auto":
        name = "cython" if _ckernels is not None else "python"
    if name == "cython":
        if _ckernels is None:
            raise ImportError("compiled kernels are not built; reinstall the package")
        return _ckernels
    if name == "python":
        return _kernels_py
    raise ValueError(f"unknown backend {name!r}")


kernels = get()
BACKEND = "cython" if kernels is _ckernels and _ckernels is not None else "python"
