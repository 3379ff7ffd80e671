"""Engine backend selection.

The asynchronous event loop exists twice: a compiled Cython core and a
pure-Python mirror.  The compiled one is picked automatically when the
extension built; set GNEFORGE_BACKEND=python (or =cython) to force a
choice, or call set_backend() at runtime.
"""

import os

from . import _engine_py

_BACKENDS = {"python": _engine_py}
try:
    from . import _engine_cy
    _BACKENDS["cython"] = _engine_cy
except ImportError:  # extension not built; pure-Python fallback
    pass

_forced = os.environ.get("GNEFORGE_BACKEND", "").strip().lower()
if _forced:
    if _forced not in _BACKENDS:
        raise ImportError(
            "GNEFORGE_BACKEND=%r requested but only %s available"
            % (_forced, sorted(_BACKENDS)))
    _active = _forced
else:
    _active = "cython" if "cython" in _BACKENDS else "python"


def available_backends():
    """Names of the engine backends importable in this environment."""
    return sorted(_BACKENDS)


def active_backend():
    """Name of the backend new simulations will use."""
    return _active


def set_backend(name):
    """Select the engine backend by name ('cython' or 'python')."""
    global _active
    if name not in _BACKENDS:
        raise ValueError("unknown backend %r (available: %s)"
                         % (name, sorted(_BACKENDS)))
    _active = name


def make_sim(problem, backend=None):
    """Instantiate the event-loop core for a prepared problem dict."""
    name = backend or _active
    if name not in _BACKENDS:
        raise ValueError("unknown backend %r (available: %s)"
                         % (name, sorted(_BACKENDS)))
    return _BACKENDS[name].SimCore(problem)
