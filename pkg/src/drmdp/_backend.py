"""Kernel backend selection.

The compiled extension is used when it imports; set ``DRMDP_BACKEND=python``
to force the numpy fallback.
"""

import os

from . import _kernels_py

NAME = "python"
kernels = _kernels_py

if os.environ.get("DRMDP_BACKEND", "").lower() != "python":
    try:
        from . import _kernels as _compiled
    except ImportError:
        pass
    else:
        kernels = _compiled
        NAME = "cython"


def available():
    """Names of the backends importable in this environment."""
    names = ["python"]
    try:
        from . import _kernels  # noqa: F401
    except ImportError:
        return names
    return ["cython"] + names


def get(name):
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown backend {name!r}")
