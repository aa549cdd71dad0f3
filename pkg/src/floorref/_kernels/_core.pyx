# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: radial distortion forward/inverse and the smallest
enclosing circle. Mirrors the semantics of ``_ref.py`` exactly."""

from libc.math cimport fabs, sqrt

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "cython"

cdef unsigned long long _LCG_MULT = 6364136223846793005ULL
cdef unsigned long long _LCG_INC = 1442695040888963407ULL


def distort_radial(xy, double k1, double k2, double k3):
    """Forward radial distortion of normalized image coordinates, shape (n, 2)."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] a
    obj = np.ascontiguousarray(xy, dtype=np.float64)
    if obj.ndim != 2 or obj.shape[1] != 2:
        raise ValueError("distort_radial expects an (n, 2) array")
    a = obj
    cdef Py_ssize_t n = a.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((n, 2), dtype=np.float64)
    cdef Py_ssize_t i
    cdef double x, y, r2, f
    for i in range(n):
        x = a[i, 0]
        y = a[i, 1]
        r2 = x * x + y * y
        f = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3))
        out[i, 0] = x * f
        out[i, 1] = y * f
    return out


def undistort_radial(xy, double k1, double k2, double k3, int max_iter=20):
    """Fixed-point inverse of the radial distortion, shape (n, 2).

    Fixed iteration count, bit-identical to the fallback implementation.
    """
    cdef cnp.ndarray[cnp.float64_t, ndim=2] a
    obj = np.ascontiguousarray(xy, dtype=np.float64)
    if obj.ndim != 2 or obj.shape[1] != 2:
        raise ValueError("undistort_radial expects an (n, 2) array")
    a = obj
    cdef Py_ssize_t n = a.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((n, 2), dtype=np.float64)
    cdef Py_ssize_t i
    cdef int it
    cdef double x, y, rd, ru, r2, scale
    for i in range(n):
        x = a[i, 0]
        y = a[i, 1]
        rd = sqrt(x * x + y * y)
        ru = rd
        for it in range(max_iter):
            r2 = ru * ru
            ru = rd / (1.0 + r2 * (k1 + r2 * (k2 + r2 * k3)))
        scale = ru / rd if rd > 0.0 else 1.0
        out[i, 0] = x * scale
        out[i, 1] = y * scale
    return out


cdef inline double _hypot(double dx, double dy) noexcept:
    return sqrt(dx * dx + dy * dy)


cdef inline bint _inside(double cx, double cy, double r, double px, double py) noexcept:
    return _hypot(px - cx, py - cy) <= r * (1.0 + 1e-14) + 1e-14


cdef inline void _circle_two(double ax, double ay, double bx, double by,
                             double* cx, double* cy, double* r) noexcept:
    cx[0] = (ax + bx) / 2.0
    cy[0] = (ay + by) / 2.0
    cdef double ra = _hypot(cx[0] - ax, cy[0] - ay)
    cdef double rb = _hypot(cx[0] - bx, cy[0] - by)
    r[0] = ra if ra > rb else rb


cdef inline bint _circle_three(double ax, double ay, double bx, double by,
                               double px, double py,
                               double* cx, double* cy, double* r) noexcept:
    cdef double ox = (min(ax, bx, px) + max(ax, bx, px)) / 2.0
    cdef double oy = (min(ay, by, py) + max(ay, by, py)) / 2.0
    cdef double a0 = ax - ox, a1 = ay - oy
    cdef double b0 = bx - ox, b1 = by - oy
    cdef double p0 = px - ox, p1 = py - oy
    cdef double d = (a0 * (b1 - p1) + b0 * (p1 - a1) + p0 * (a1 - b1)) * 2.0
    if d == 0.0:
        return False
    cdef double x = ox + ((a0 * a0 + a1 * a1) * (b1 - p1)
                          + (b0 * b0 + b1 * b1) * (p1 - a1)
                          + (p0 * p0 + p1 * p1) * (a1 - b1)) / d
    cdef double y = oy + ((a0 * a0 + a1 * a1) * (p0 - b0)
                          + (b0 * b0 + b1 * b1) * (a0 - p0)
                          + (p0 * p0 + p1 * p1) * (b0 - a0)) / d
    cdef double ra = _hypot(x - ax, y - ay)
    cdef double rb = _hypot(x - bx, y - by)
    cdef double rp = _hypot(x - px, y - py)
    cx[0] = x
    cy[0] = y
    r[0] = max(ra, rb, rp)
    return True


def enclosing_circle(points):
    """Smallest circle containing all 2D points, shape (n, 2) with n >= 1."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] raw
    obj = np.ascontiguousarray(points, dtype=np.float64)
    if obj.ndim != 2 or obj.shape[1] != 2 or obj.shape[0] == 0:
        raise ValueError("enclosing_circle expects a non-empty (n, 2) array")
    raw = obj

    cdef Py_ssize_t n = raw.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] idx = np.arange(n, dtype=np.int64)
    cdef unsigned long long state = 0x853C49E6748FEA9BULL
    cdef Py_ssize_t i, j, k
    cdef long long tmp
    for i in range(n - 1, 0, -1):
        state = state * _LCG_MULT + _LCG_INC
        j = <Py_ssize_t>((state >> 16) % (i + 1))
        tmp = idx[i]
        idx[i] = idx[j]
        idx[j] = tmp
    cdef cnp.ndarray[cnp.float64_t, ndim=2] pts = raw[idx]

    cdef double cx = pts[0, 0], cy = pts[0, 1], r = 0.0
    cdef double px, py, qx, qy, sx, sy
    cdef double t2x, t2y, t2r, bx, by, br
    for i in range(1, n):
        px = pts[i, 0]
        py = pts[i, 1]
        if _inside(cx, cy, r, px, py):
            continue
        cx = px
        cy = py
        r = 0.0
        for j in range(i):
            qx = pts[j, 0]
            qy = pts[j, 1]
            if _inside(cx, cy, r, qx, qy):
                continue
            _circle_two(px, py, qx, qy, &cx, &cy, &r)
            for k in range(j):
                sx = pts[k, 0]
                sy = pts[k, 1]
                if _inside(cx, cy, r, sx, sy):
                    continue
                if not _circle_three(px, py, qx, qy, sx, sy, &cx, &cy, &r):
                    # collinear triple: widest diameter circle of the three
                    _circle_two(px, py, qx, qy, &cx, &cy, &r)
                    _circle_two(px, py, sx, sy, &t2x, &t2y, &t2r)
                    if t2r > r:
                        cx = t2x
                        cy = t2y
                        r = t2r
                    _circle_two(qx, qy, sx, sy, &t2x, &t2y, &t2r)
                    if t2r > r:
                        cx = t2x
                        cy = t2y
                        r = t2r
    return float(cx), float(cy), float(r)
