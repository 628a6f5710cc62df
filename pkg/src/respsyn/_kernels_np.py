"""Pure-numpy implementations of the hot inner loops.

These are the fallback backend used when the compiled extension is not
available (or is disabled via RESPSYN_KERNELS=py).  Both backends share
the exact same call signatures and must agree numerically; the parity
tests enforce this.

Array layout everywhere: volumes are (C, Z, Y, X) C-contiguous, i.e.
x-fastest.  Displacement fields are (3, Z, Y, X) with channel 0 = x,
1 = y, 2 = z, expressed in voxel units at this level (mm conversion
happens in the callers).
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def conv_out_dim(n: int, k: int, stride: int, pad: int) -> int:
    return (n + 2 * pad - k) // stride + 1


def im2col3(x: np.ndarray, k: int, stride: int, pad: int) -> np.ndarray:
    """Extract sliding k^3 patches into a (C*k^3, n_out) matrix."""
    c = x.shape[0]
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad), (pad, pad)))
    v = sliding_window_view(xp, (k, k, k), axis=(1, 2, 3))
    v = v[:, ::stride, ::stride, ::stride]
    # (C, Zo, Yo, Xo, k, k, k) -> (C, k, k, k, Zo*Yo*Xo)
    n_out = v.shape[1] * v.shape[2] * v.shape[3]
    cols = v.transpose(0, 4, 5, 6, 1, 2, 3).reshape(c * k * k * k, n_out)
    return np.ascontiguousarray(cols)


def col2im3(cols: np.ndarray, c: int, z: int, y: int, x: int,
            k: int, stride: int, pad: int) -> np.ndarray:
    """Adjoint of im2col3: scatter-add patch columns back onto the grid."""
    zo = conv_out_dim(z, k, stride, pad)
    yo = conv_out_dim(y, k, stride, pad)
    xo = conv_out_dim(x, k, stride, pad)
    g = np.zeros((c, z + 2 * pad, y + 2 * pad, x + 2 * pad), dtype=cols.dtype)
    c6 = cols.reshape(c, k, k, k, zo, yo, xo)
    for kz in range(k):
        for ky in range(k):
            for kx in range(k):
                g[:,
                  kz:kz + stride * zo:stride,
                  ky:ky + stride * yo:stride,
                  kx:kx + stride * xo:stride] += c6[:, kz, ky, kx]
    if pad == 0:
        return g
    return np.ascontiguousarray(g[:, pad:pad + z, pad:pad + y, pad:pad + x])


def _corner_setup(shape, disp):
    """Clamped trilinear sample coordinates for a same-grid warp."""
    _, z, y, x = shape
    zz = np.arange(z, dtype=disp.dtype).reshape(z, 1, 1)
    yy = np.arange(y, dtype=disp.dtype).reshape(1, y, 1)
    xx = np.arange(x, dtype=disp.dtype).reshape(1, 1, x)
    xc = np.clip(xx + disp[0], 0.0, x - 1.0)
    yc = np.clip(yy + disp[1], 0.0, y - 1.0)
    zc = np.clip(zz + disp[2], 0.0, z - 1.0)
    # interior mask: clamped coordinates have zero derivative
    mx = ((xx + disp[0]) > 0.0) & ((xx + disp[0]) < x - 1.0)
    my = ((yy + disp[1]) > 0.0) & ((yy + disp[1]) < y - 1.0)
    mz = ((zz + disp[2]) > 0.0) & ((zz + disp[2]) < z - 1.0)
    return xc, yc, zc, mx, my, mz


def _cells(xc, yc, zc, nz, ny, nx):
    x0 = np.minimum(np.floor(xc), nx - 2).astype(np.int64)
    y0 = np.minimum(np.floor(yc), ny - 2).astype(np.int64)
    z0 = np.minimum(np.floor(zc), nz - 2).astype(np.int64)
    x0 = np.maximum(x0, 0)
    y0 = np.maximum(y0, 0)
    z0 = np.maximum(z0, 0)
    fx = xc - x0
    fy = yc - y0
    fz = zc - z0
    return x0, y0, z0, fx, fy, fz


def warp_forward(vol: np.ndarray, disp: np.ndarray) -> np.ndarray:
    """Backward-mapping trilinear warp: out(p) = vol(p + disp(p)), clamped."""
    c, z, y, x = vol.shape
    xc, yc, zc, _, _, _ = _corner_setup(vol.shape, disp)
    x0, y0, z0, fx, fy, fz = _cells(xc, yc, zc, z, y, x)
    flat = vol.reshape(c, -1)
    base = (z0 * y + y0) * x + x0
    out = np.zeros_like(vol)
    for dz in (0, 1):
        wz = (1.0 - fz) if dz == 0 else fz
        for dy in (0, 1):
            wy = (1.0 - fy) if dy == 0 else fy
            for dx in (0, 1):
                wx = (1.0 - fx) if dx == 0 else fx
                idx = base + (dz * y + dy) * x + dx
                w = wz * wy * wx
                out += w[None] * flat[:, idx.ravel()].reshape(c, z, y, x)
    return out


def warp_backward(vol: np.ndarray, disp: np.ndarray, gout: np.ndarray):
    """Gradients of warp_forward w.r.t. the volume and the displacement.

    Returns (gvol, gdisp) with gdisp in voxel units.  Clamped sample
    points contribute zero displacement gradient.
    """
    c, z, y, x = vol.shape
    n = z * y * x
    xc, yc, zc, mx, my, mz = _corner_setup(vol.shape, disp)
    x0, y0, z0, fx, fy, fz = _cells(xc, yc, zc, z, y, x)
    flat = vol.reshape(c, -1)
    gflat = gout.reshape(c, -1)
    base = (z0 * y + y0) * x + x0
    gvol = np.zeros((c, n), dtype=vol.dtype)
    gx = np.zeros((z, y, x), dtype=vol.dtype)
    gy = np.zeros((z, y, x), dtype=vol.dtype)
    gz = np.zeros((z, y, x), dtype=vol.dtype)
    for dz in (0, 1):
        wz = (1.0 - fz) if dz == 0 else fz
        sz = -1.0 if dz == 0 else 1.0
        for dy in (0, 1):
            wy = (1.0 - fy) if dy == 0 else fy
            sy = -1.0 if dy == 0 else 1.0
            for dx in (0, 1):
                wx = (1.0 - fx) if dx == 0 else fx
                sx = -1.0 if dx == 0 else 1.0
                idx = (base + (dz * y + dy) * x + dx).ravel()
                w = (wz * wy * wx).ravel()
                corner = flat[:, idx].reshape(c, z, y, x)
                gc = (gflat * w[None]).astype(vol.dtype)
                for ch in range(c):
                    gvol[ch] += np.bincount(idx, weights=gc[ch], minlength=n)
                gdot = (gout * corner).sum(axis=0)
                gx += sx * (wz * wy) * gdot
                gy += sy * (wz * wx) * gdot
                gz += sz * (wy * wx) * gdot
    gdisp = np.stack([gx * mx, gy * my, gz * mz]).astype(vol.dtype)
    return gvol.reshape(c, z, y, x), gdisp


def sample_trilinear(vol: np.ndarray, xc: np.ndarray, yc: np.ndarray,
                     zc: np.ndarray) -> np.ndarray:
    """Trilinear samples of vol at arbitrary voxel coordinates, clamped."""
    c, z, y, x = vol.shape
    xc = np.clip(np.asarray(xc, dtype=vol.dtype), 0.0, x - 1.0)
    yc = np.clip(np.asarray(yc, dtype=vol.dtype), 0.0, y - 1.0)
    zc = np.clip(np.asarray(zc, dtype=vol.dtype), 0.0, z - 1.0)
    x0, y0, z0, fx, fy, fz = _cells(xc, yc, zc, z, y, x)
    flat = vol.reshape(c, -1)
    base = (z0 * y + y0) * x + x0
    out = np.zeros((c,) + xc.shape, dtype=vol.dtype)
    for dz in (0, 1):
        wz = (1.0 - fz) if dz == 0 else fz
        for dy in (0, 1):
            wy = (1.0 - fy) if dy == 0 else fy
            for dx in (0, 1):
                wx = (1.0 - fx) if dx == 0 else fx
                idx = base + (dz * y + dy) * x + dx
                out += (wz * wy * wx)[None] * flat[:, idx.ravel()].reshape(out.shape)
    return out
