"""Selects the flow-kernel implementation at import time.

The compiled extension is preferred; the numpy fallback is used when it is
not built.  :func:`use_backend` switches explicitly (tests, benchmarks).
"""

from . import _fallback

try:
    from . import _core
except ImportError:  # extension not built
    _core = None

_IMPLS = {"numpy": _fallback}
if _core is not None:
    _IMPLS["cython"] = _core

_active = "cython" if _core is not None else "numpy"


def available_backends():
    return tuple(_IMPLS)


def backend_name():
    return _active


def use_backend(name):
    """Activate backend ``name`` and return the previously active name."""
    global _active
    if name not in _IMPLS:
        raise ValueError(f"backend {name!r} not available; have {available_backends()}")
    prev, _active = _active, name
    return prev


def impl():
    return _IMPLS[_active]
