"""Convolution kernel backend selection.

`CONFIGADAPT_BACKEND` (`auto` | `cython` | `python`) picks the
implementation. Both backends implement the same three functions with
float64 accumulation, so either satisfies the determinism contract
within a run.

`auto` resolves to the numpy backend: benchmarks/bench_kernels.py shows
the im2col + BLAS path is ~2x faster than the compiled loops at the
layer sizes this detector uses, so the extension is an explicit opt-in
rather than the default.
"""

import os

from . import kernels_py

_choice = os.environ.get("CONFIGADAPT_BACKEND", "auto")

if _choice not in ("auto", "cython", "python"):
    raise ValueError(f"CONFIGADAPT_BACKEND must be auto|cython|python, got {_choice!r}")

if _choice == "cython":
    from . import _ckernels as _impl  # type: ignore[attr-defined]
else:
    _impl = kernels_py

BACKEND_NAME = _impl.BACKEND_NAME
conv2d_forward = _impl.conv2d_forward
conv2d_backward_input = _impl.conv2d_backward_input
conv2d_backward_weight = _impl.conv2d_backward_weight
