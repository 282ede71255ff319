"""Backend selection for the numerical kernels.

The compiled extension ``loanmix._ckernels`` is used when it imports;
otherwise the numpy implementation in ``loanmix._pykernels`` is used.  Setting
``LOANMIX_PURE_PYTHON=1`` forces the fallback.
"""

import os

from loanmix import _pykernels as python_backend

compiled_backend = None
if os.environ.get("LOANMIX_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from loanmix import _ckernels as compiled_backend
    except ImportError:  # extension not built
        compiled_backend = None

backend = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "cython" if compiled_backend is not None else "python"


def use(name):
    """Switch the active backend (``"cython"`` or ``"python"``) at runtime."""
    global backend, BACKEND
    if name == "python":
        backend, BACKEND = python_backend, "python"
    elif name == "cython":
        if compiled_backend is None:
            raise RuntimeError("compiled kernels are not available")
        backend, BACKEND = compiled_backend, "cython"
    else:
        raise ValueError(f"unknown backend {name!r}")


def available():
    return ["cython", "python"] if compiled_backend is not None else ["python"]
