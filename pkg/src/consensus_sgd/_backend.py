"""Select the compiled kernels when they are built, the numpy ones otherwise.

Set ``CONSENSUS_SGD_BACKEND=python`` to force the fallback.
"""
import os

from . import _fallback

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

BACKENDS = {"python": _fallback}
if _compiled is not None:
    BACKENDS["compiled"] = _compiled


def _select():
    forced = os.environ.get("CONSENSUS_SGD_BACKEND", "").strip().lower()
    if forced:
        if forced not in BACKENDS:
            raise ImportError(f"backend {forced!r} unavailable; have {sorted(BACKENDS)}")
        return forced
    return "compiled" if _compiled is not None else "python"


NAME = _select()
kernels = BACKENDS[NAME]


def get(name=None):
    """Kernel module by name (``"compiled"`` or ``"python"``); default is the active one."""
    if name is None:
        return kernels
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(BACKENDS)}") from None


def compiled_available() -> bool:
    return _compiled is not None

