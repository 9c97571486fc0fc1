"""Kernel backend selection.

The compiled extension is used when importable; set ``OPTATTACK_PURE_PYTHON=1``
to force the numpy fallback.
"""
import importlib
import os

ACT_CODES = {"identity": 0, "relu": 1, "tanh": 2}


def load_backend(name=None):
    """Return a kernel module by name (``"cython"`` or ``"python"``); None picks the default."""
    if name is None:
        if os.environ.get("OPTATTACK_PURE_PYTHON", "").strip() not in ("", "0"):
            return importlib.import_module("optattack._pykernels")
        try:
            return importlib.import_module("optattack._ckernels")
        except ImportError:
            return importlib.import_module("optattack._pykernels")
    if name == "cython":
        return importlib.import_module("optattack._ckernels")
    if name == "python":
        return importlib.import_module("optattack._pykernels")
    raise ValueError(f"unknown kernel backend {name!r}")


def available_backends():
    names = ["python"]
    try:
        load_backend("cython")
        names.insert(0, "cython")
    except ImportError:
        pass
    return names


active = load_backend()
BACKEND = active.BACKEND
