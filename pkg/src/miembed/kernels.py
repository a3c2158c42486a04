"""Kernel backend selection.

The hot per-bag kernels exist twice: a compiled Cython extension
(``miembed._kernels``) and a pure NumPy fallback
(``miembed._kernels_py``). The compiled backend is preferred when
importable; set ``MIEMBED_BACKEND=python`` or ``=cython`` to force one.

``benchmarks/bench_kernels.py`` compares the two.
"""

import os
from contextlib import contextmanager

from miembed import _kernels_py

try:
    from miembed import _kernels
except ImportError:
    _kernels = None

_BY_NAME = {"python": _kernels_py}
if _kernels is not None:
    _BY_NAME["cython"] = _kernels


def _select_default():
    forced = os.environ.get("MIEMBED_BACKEND")
    if forced:
        if forced not in ("python", "cython"):
            raise ValueError(f"MIEMBED_BACKEND must be 'python' or 'cython', got {forced!r}")
        if forced not in _BY_NAME:
            raise ImportError(
                "MIEMBED_BACKEND=cython but the compiled extension is not available; "
                "build it with 'pip install -e .' or 'python setup.py build_ext --inplace'"
            )
        return _BY_NAME[forced]
    return _BY_NAME.get("cython", _kernels_py)


_active = _select_default()


def active():
    """Return the module implementing the kernel functions."""
    return _active


def backend_name() -> str:
    return "cython" if _active is _kernels else "python"


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_BY_NAME))


@contextmanager
def use_backend(name: str):
    """Temporarily switch the active backend (tests and benchmarks)."""
    global _active
    if name not in _BY_NAME:
        raise ValueError(f"unknown backend {name!r}; available: {available_backends()}")
    previous = _active
    _active = _BY_NAME[name]
    try:
        yield _active
    finally:
        _active = previous
