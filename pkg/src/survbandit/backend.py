"""Kernel backend chosen at import: the compiled extension if it was built,
else the numpy fallback. Set ``SURVBANDIT_PURE_PYTHON=1`` to force the fallback.
"""
import importlib
import os

from . import _kernels_py

_compiled = None
if not os.environ.get("SURVBANDIT_PURE_PYTHON"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None

kernels = _compiled if _compiled is not None else _kernels_py
NAME = "cython" if _compiled is not None else "python"


def available() -> list[str]:
    names = ["python"]
    try:
        importlib.import_module(f"{__package__}._kernels")
        names.insert(0, "cython")
    except ImportError:
        pass
    return names


def get(name: str):
    if name == "python":
        return _kernels_py
    if name == "cython":
        return importlib.import_module(f"{__package__}._kernels")
    raise ValueError(f"unknown backend {name!r}")
