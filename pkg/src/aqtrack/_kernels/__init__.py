"""Backend selection for the hot kernels.

Prefers the compiled extension when present; falls back to the pure-numpy
reference otherwise. Set AQTRACK_PURE=1 to force the fallback (useful for
the parity tests and for debugging the reference arithmetic).
"""

import os

if os.environ.get("AQTRACK_PURE") == "1":
    from . import _fallback as _impl
else:
    try:
        from . import _speedups as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _fallback as _impl

BACKEND = _impl.BACKEND
quantize_block = _impl.quantize_block
apply_codes = _impl.apply_codes
mix_replicas = _impl.mix_replicas

__all__ = ["BACKEND", "quantize_block", "apply_codes", "mix_replicas"]
