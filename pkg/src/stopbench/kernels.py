"""Kernel backend selection.

The compiled extension is used when it was built; otherwise the numpy
implementation is loaded. Setting ``STOPBENCH_BACKEND=python`` forces the
fallback (useful for benchmarking and for checking that both agree).
"""

import importlib
import os

_requested = os.environ.get("STOPBENCH_BACKEND", "auto").lower()


def _load(name):
    return importlib.import_module(f"stopbench.{name}")


def available_backends():
    """Names of the kernel backends importable in this environment."""
    names = ["python"]
    try:
        _load("_ckernels")
    except ImportError:
        pass
    else:
        names.insert(0, "cython")
    return names


def get_backend(name):
    """Return the kernel module for ``name`` (``"cython"`` or ``"python"``)."""
    if name == "cython":
        return _load("_ckernels")
    if name == "python":
        return _load("_pykernels")
    raise ValueError(f"unknown kernel backend {name!r}")


if _requested == "python":
    _impl = get_backend("python")
elif _requested == "cython":
    _impl = get_backend("cython")
else:
    try:
        _impl = get_backend("cython")
    except ImportError:
        _impl = get_backend("python")

BACKEND = _impl.NAME
nondominated_mask = _impl.nondominated_mask
nondominated_sort = _impl.nondominated_sort
crowding_distance = _impl.crowding_distance
dominated_count = _impl.dominated_count
hypervolume = _impl.hypervolume
