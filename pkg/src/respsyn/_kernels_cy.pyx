# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled implementations of the hot inner loops.

Same contracts as _kernels_np; see that module for the layout notes.
Single-threaded on purpose: accumulation order is part of the
determinism contract.
"""

import numpy as np

cimport cython
cimport numpy as cnp

ctypedef fused real:
    float
    double


def conv_out_dim(int n, int k, int stride, int pad):
    return (n + 2 * pad - k) // stride + 1


def im2col3(real[:, :, :, ::1] x, int k, int stride, int pad):
    cdef int c = x.shape[0], z = x.shape[1], y = x.shape[2], xx = x.shape[3]
    cdef int zo = (z + 2 * pad - k) // stride + 1
    cdef int yo = (y + 2 * pad - k) // stride + 1
    cdef int xo = (xx + 2 * pad - k) // stride + 1
    cdef int n_out = zo * yo * xo
    dtype = np.float32 if real is float else np.float64
    out = np.zeros((c * k * k * k, n_out), dtype=dtype)
    cdef real[:, ::1] cols = out
    cdef int cc, kz, ky, kx, oz, oy, ox, iz, iy, ix, row, col
    for cc in range(c):
        for kz in range(k):
            for ky in range(k):
                for kx in range(k):
                    row = ((cc * k + kz) * k + ky) * k + kx
                    for oz in range(zo):
                        iz = oz * stride + kz - pad
                        if iz < 0 or iz >= z:
                            continue
                        for oy in range(yo):
                            iy = oy * stride + ky - pad
                            if iy < 0 or iy >= y:
                                continue
                            col = (oz * yo + oy) * xo
                            for ox in range(xo):
                                ix = ox * stride + kx - pad
                                if 0 <= ix < xx:
                                    cols[row, col + ox] = x[cc, iz, iy, ix]
    return out


def col2im3(real[:, ::1] cols, int c, int z, int y, int x,
            int k, int stride, int pad):
    cdef int zo = (z + 2 * pad - k) // stride + 1
    cdef int yo = (y + 2 * pad - k) // stride + 1
    cdef int xo = (x + 2 * pad - k) // stride + 1
    dtype = np.float32 if real is float else np.float64
    out = np.zeros((c, z, y, x), dtype=dtype)
    cdef real[:, :, :, ::1] g = out
    cdef int cc, kz, ky, kx, oz, oy, ox, iz, iy, ix, row, col
    for cc in range(c):
        for kz in range(k):
            for ky in range(k):
                for kx in range(k):
                    row = ((cc * k + kz) * k + ky) * k + kx
                    for oz in range(zo):
                        iz = oz * stride + kz - pad
                        if iz < 0 or iz >= z:
                            continue
                        for oy in range(yo):
                            iy = oy * stride + ky - pad
                            if iy < 0 or iy >= y:
                                continue
                            col = (oz * yo + oy) * xo
                            for ox in range(xo):
                                ix = ox * stride + kx - pad
                                if 0 <= ix < x:
                                    g[cc, iz, iy, ix] += cols[row, col + ox]
    return out


cdef inline real _clampr(real v, real lo, real hi) nogil:
    if v < lo:
        return lo
    if v > hi:
        return hi
    return v


def warp_forward(real[:, :, :, ::1] vol, real[:, :, :, ::1] disp):
    cdef int c = vol.shape[0], z = vol.shape[1], y = vol.shape[2], x = vol.shape[3]
    dtype = np.float32 if real is float else np.float64
    res = np.empty((c, z, y, x), dtype=dtype)
    cdef real[:, :, :, ::1] out = res
    cdef int iz, iy, ix, ch, x0, y0, z0
    cdef real xc, yc, zc, fx, fy, fz, w000, w001, w010, w011, w100, w101, w110, w111
    for iz in range(z):
        for iy in range(y):
            for ix in range(x):
                xc = _clampr(ix + disp[0, iz, iy, ix], <real>0.0, <real>(x - 1))
                yc = _clampr(iy + disp[1, iz, iy, ix], <real>0.0, <real>(y - 1))
                zc = _clampr(iz + disp[2, iz, iy, ix], <real>0.0, <real>(z - 1))
                x0 = <int>xc
                y0 = <int>yc
                z0 = <int>zc
                if x0 > x - 2: x0 = x - 2
                if y0 > y - 2: y0 = y - 2
                if z0 > z - 2: z0 = z - 2
                fx = xc - x0
                fy = yc - y0
                fz = zc - z0
                w000 = (1 - fz) * (1 - fy) * (1 - fx)
                w001 = (1 - fz) * (1 - fy) * fx
                w010 = (1 - fz) * fy * (1 - fx)
                w011 = (1 - fz) * fy * fx
                w100 = fz * (1 - fy) * (1 - fx)
                w101 = fz * (1 - fy) * fx
                w110 = fz * fy * (1 - fx)
                w111 = fz * fy * fx
                for ch in range(c):
                    out[ch, iz, iy, ix] = (
                        w000 * vol[ch, z0, y0, x0]
                        + w001 * vol[ch, z0, y0, x0 + 1]
                        + w010 * vol[ch, z0, y0 + 1, x0]
                        + w011 * vol[ch, z0, y0 + 1, x0 + 1]
                        + w100 * vol[ch, z0 + 1, y0, x0]
                        + w101 * vol[ch, z0 + 1, y0, x0 + 1]
                        + w110 * vol[ch, z0 + 1, y0 + 1, x0]
                        + w111 * vol[ch, z0 + 1, y0 + 1, x0 + 1])
    return res


def warp_backward(real[:, :, :, ::1] vol, real[:, :, :, ::1] disp,
                  real[:, :, :, ::1] gout):
    cdef int c = vol.shape[0], z = vol.shape[1], y = vol.shape[2], x = vol.shape[3]
    dtype = np.float32 if real is float else np.float64
    gvol_arr = np.zeros((c, z, y, x), dtype=dtype)
    gdisp_arr = np.zeros((3, z, y, x), dtype=dtype)
    cdef real[:, :, :, ::1] gvol = gvol_arr
    cdef real[:, :, :, ::1] gdisp = gdisp_arr
    cdef int iz, iy, ix, ch, x0, y0, z0
    cdef real raw_x, raw_y, raw_z, xc, yc, zc, fx, fy, fz, g
    cdef real v000, v001, v010, v011, v100, v101, v110, v111
    cdef real gx, gy, gz
    cdef bint mx, my, mz
    for iz in range(z):
        for iy in range(y):
            for ix in range(x):
                raw_x = ix + disp[0, iz, iy, ix]
                raw_y = iy + disp[1, iz, iy, ix]
                raw_z = iz + disp[2, iz, iy, ix]
                mx = (raw_x > 0) and (raw_x < x - 1)
                my = (raw_y > 0) and (raw_y < y - 1)
                mz = (raw_z > 0) and (raw_z < z - 1)
                xc = _clampr(raw_x, <real>0.0, <real>(x - 1))
                yc = _clampr(raw_y, <real>0.0, <real>(y - 1))
                zc = _clampr(raw_z, <real>0.0, <real>(z - 1))
                x0 = <int>xc
                y0 = <int>yc
                z0 = <int>zc
                if x0 > x - 2: x0 = x - 2
                if y0 > y - 2: y0 = y - 2
                if z0 > z - 2: z0 = z - 2
                fx = xc - x0
                fy = yc - y0
                fz = zc - z0
                gx = 0
                gy = 0
                gz = 0
                for ch in range(c):
                    g = gout[ch, iz, iy, ix]
                    v000 = vol[ch, z0, y0, x0]
                    v001 = vol[ch, z0, y0, x0 + 1]
                    v010 = vol[ch, z0, y0 + 1, x0]
                    v011 = vol[ch, z0, y0 + 1, x0 + 1]
                    v100 = vol[ch, z0 + 1, y0, x0]
                    v101 = vol[ch, z0 + 1, y0, x0 + 1]
                    v110 = vol[ch, z0 + 1, y0 + 1, x0]
                    v111 = vol[ch, z0 + 1, y0 + 1, x0 + 1]
                    gvol[ch, z0, y0, x0] += g * (1 - fz) * (1 - fy) * (1 - fx)
                    gvol[ch, z0, y0, x0 + 1] += g * (1 - fz) * (1 - fy) * fx
                    gvol[ch, z0, y0 + 1, x0] += g * (1 - fz) * fy * (1 - fx)
                    gvol[ch, z0, y0 + 1, x0 + 1] += g * (1 - fz) * fy * fx
                    gvol[ch, z0 + 1, y0, x0] += g * fz * (1 - fy) * (1 - fx)
                    gvol[ch, z0 + 1, y0, x0 + 1] += g * fz * (1 - fy) * fx
                    gvol[ch, z0 + 1, y0 + 1, x0] += g * fz * fy * (1 - fx)
                    gvol[ch, z0 + 1, y0 + 1, x0 + 1] += g * fz * fy * fx
                    gx += g * ((1 - fz) * (1 - fy) * (v001 - v000)
                               + (1 - fz) * fy * (v011 - v010)
                               + fz * (1 - fy) * (v101 - v100)
                               + fz * fy * (v111 - v110))
                    gy += g * ((1 - fz) * (1 - fx) * (v010 - v000)
                               + (1 - fz) * fx * (v011 - v001)
                               + fz * (1 - fx) * (v110 - v100)
                               + fz * fx * (v111 - v101))
                    gz += g * ((1 - fy) * (1 - fx) * (v100 - v000)
                               + (1 - fy) * fx * (v101 - v001)
                               + fy * (1 - fx) * (v110 - v010)
                               + fy * fx * (v111 - v011))
                if mx:
                    gdisp[0, iz, iy, ix] = gx
                if my:
                    gdisp[1, iz, iy, ix] = gy
                if mz:
                    gdisp[2, iz, iy, ix] = gz
    return gvol_arr, gdisp_arr


def sample_trilinear(real[:, :, :, ::1] vol, real[::1] xc, real[::1] yc,
                     real[::1] zc):
    cdef int c = vol.shape[0], z = vol.shape[1], y = vol.shape[2], x = vol.shape[3]
    cdef Py_ssize_t m = xc.shape[0], i
    dtype = np.float32 if real is float else np.float64
    res = np.empty((c, m), dtype=dtype)
    cdef real[:, ::1] out = res
    cdef int ch, x0, y0, z0
    cdef real cx, cy, cz, fx, fy, fz
    for i in range(m):
        cx = _clampr(xc[i], <real>0.0, <real>(x - 1))
        cy = _clampr(yc[i], <real>0.0, <real>(y - 1))
        cz = _clampr(zc[i], <real>0.0, <real>(z - 1))
        x0 = <int>cx
        y0 = <int>cy
        z0 = <int>cz
        if x0 > x - 2: x0 = x - 2
        if y0 > y - 2: y0 = y - 2
        if z0 > z - 2: z0 = z - 2
        fx = cx - x0
        fy = cy - y0
        fz = cz - z0
        for ch in range(c):
            out[ch, i] = (
                (1 - fz) * (1 - fy) * (1 - fx) * vol[ch, z0, y0, x0]
                + (1 - fz) * (1 - fy) * fx * vol[ch, z0, y0, x0 + 1]
                + (1 - fz) * fy * (1 - fx) * vol[ch, z0, y0 + 1, x0]
                + (1 - fz) * fy * fx * vol[ch, z0, y0 + 1, x0 + 1]
                + fz * (1 - fy) * (1 - fx) * vol[ch, z0 + 1, y0, x0]
                + fz * (1 - fy) * fx * vol[ch, z0 + 1, y0, x0 + 1]
                + fz * fy * (1 - fx) * vol[ch, z0 + 1, y0 + 1, x0]
                + fz * fy * fx * vol[ch, z0 + 1, y0 + 1, x0 + 1])
    return res
