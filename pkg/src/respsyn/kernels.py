"""Backend dispatch for the numeric inner loops.

The compiled Cython extension is preferred when importable; the numpy
fallback is always available.  Selection happens once at import and can
be forced with RESPSYN_KERNELS=cy|py (cy raises if the extension is
missing, so CI can assert the compiled path).
"""

import os

import numpy as np

from . import _kernels_np

_IMPORT_ERROR = None
try:
    from . import _kernels_cy
except ImportError as exc:  # pragma: no cover - depends on build
    _kernels_cy = None
    _IMPORT_ERROR = exc

_FORCE = os.environ.get("RESPSYN_KERNELS", "").strip().lower()
if _FORCE == "py":
    _impl = _kernels_np
elif _FORCE == "cy":
    if _kernels_cy is None:
        raise ImportError(
            f"RESPSYN_KERNELS=cy but the compiled extension is unavailable: {_IMPORT_ERROR}")
    _impl = _kernels_cy
else:
    _impl = _kernels_cy if _kernels_cy is not None else _kernels_np


def backend_name() -> str:
    return "cython" if _impl is _kernels_cy else "numpy"


def get_impl(name: str):
    """Return a specific backend module ('cython'|'numpy') for benchmarks."""
    if name == "numpy":
        return _kernels_np
    if name == "cython":
        if _kernels_cy is None:
            raise ImportError("compiled kernel extension not built")
        return _kernels_cy
    raise ValueError(f"unknown backend {name!r}")


def _as_c(a: np.ndarray) -> np.ndarray:
    if a.dtype not in (np.float32, np.float64):
        raise TypeError(f"kernels require float32/float64, got {a.dtype}")
    return np.ascontiguousarray(a)


def conv_out_dim(n: int, k: int, stride: int, pad: int) -> int:
    return _kernels_np.conv_out_dim(n, k, stride, pad)


def im2col3(x, k, stride, pad):
    return _impl.im2col3(_as_c(x), k, stride, pad)


def col2im3(cols, c, z, y, x, k, stride, pad):
    return _impl.col2im3(_as_c(cols), c, z, y, x, k, stride, pad)


def warp_forward(vol, disp):
    vol = _as_c(vol)
    return _impl.warp_forward(vol, _as_c(disp.astype(vol.dtype, copy=False)))


def warp_backward(vol, disp, gout):
    vol = _as_c(vol)
    disp = _as_c(disp.astype(vol.dtype, copy=False))
    gout = _as_c(gout.astype(vol.dtype, copy=False))
    return _impl.warp_backward(vol, disp, gout)


def sample_trilinear(vol, xc, yc, zc):
    """Trilinear samples at voxel coordinates; coords may be any shape."""
    vol = _as_c(vol)
    xc = np.asarray(xc, dtype=vol.dtype)
    shape = xc.shape
    if _impl is _kernels_np:
        out = _kernels_np.sample_trilinear(vol, xc, yc, zc)
        return out.reshape((vol.shape[0],) + shape)
    flat = _kernels_cy.sample_trilinear(
        vol,
        np.ascontiguousarray(xc.ravel()),
        np.ascontiguousarray(np.asarray(yc, dtype=vol.dtype).ravel()),
        np.ascontiguousarray(np.asarray(zc, dtype=vol.dtype).ravel()),
    )
    return flat.reshape((vol.shape[0],) + shape)
