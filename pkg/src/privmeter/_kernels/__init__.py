"""Backend selector for the modular arithmetic kernels.

The compiled extension is preferred when present; the numpy fallback is
functionally identical. Set PRIVMETER_BACKEND=python (or =c) to force a
backend; forcing c without the extension installed is an error.
"""

import os

_choice = os.environ.get("PRIVMETER_BACKEND", "auto")

if _choice == "python":
    from . import _kernels_py as _impl
elif _choice == "c":
    from . import _kernels_c as _impl  # type: ignore[no-redef]
elif _choice == "auto":
    try:
        from . import _kernels_c as _impl  # type: ignore[no-redef]
    except ImportError:
        from . import _kernels_py as _impl
else:
    raise ImportError(f"PRIVMETER_BACKEND must be auto, c or python, got {_choice!r}")

BACKEND = _impl.BACKEND
mul_mod = _impl.mul_mod
pow_mod = _impl.pow_mod

__all__ = ["BACKEND", "mul_mod", "pow_mod"]
