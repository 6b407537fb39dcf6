"""Kernel backend selection.

Hot loops ship in two flavors: numba-compiled kernels and pure-numpy
fallbacks. The LGPREP_BACKEND environment variable picks one at import
time:

* ``auto`` (default) - numba when importable, numpy otherwise
* ``numba``          - require numba, fail loudly if missing
* ``numpy``          - never import numba

Both paths compute the same arithmetic in the same order and each is
bit-deterministic run to run; across backends results agree to a few
ulps (instruction selection differs). ``set_backend`` flips dispatch at
runtime (used by tests and the benchmark script); switching to numba
after a numpy-only import is not supported because the kernels were
never compiled.
"""

from __future__ import annotations

import os

ENV_VAR = "LGPREP_BACKEND"

_VALID = ("auto", "numba", "numpy")


def _resolve() -> tuple[bool, bool]:
    mode = os.environ.get(ENV_VAR, "auto").strip().lower() or "auto"
    if mode not in _VALID:
        raise ValueError(f"{ENV_VAR} must be one of {_VALID}, got {mode!r}")
    if mode == "numpy":
        return False, False
    try:
        import numba  # noqa: F401
    except ImportError:
        if mode == "numba":
            raise ImportError(f"{ENV_VAR}={mode} but numba is not importable")
        return False, False
    return True, True


# numba_available: whether numba kernels were compiled at import.
# _use_numba: whether dispatch currently routes to them.
numba_available, _use_numba = _resolve()


def use_numba() -> bool:
    """True when kernel dispatch currently routes to the numba path."""
    return _use_numba


def active_backend() -> str:
    return "numba" if _use_numba else "numpy"


def set_backend(name: str) -> None:
    """Switch dispatch between 'numba' and 'numpy' at runtime."""
    global _use_numba
    if name not in ("numba", "numpy"):
        raise ValueError(f"backend must be 'numba' or 'numpy', got {name!r}")
    if name == "numba" and not numba_available:
        raise ValueError(
            "numba backend unavailable (not importable or disabled by "
            f"{ENV_VAR}=numpy at import time)"
        )
    _use_numba = name == "numba"
