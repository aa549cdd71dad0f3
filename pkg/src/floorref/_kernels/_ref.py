"""Pure-Python/numpy reference implementations of the hot kernels.

Semantically identical to the compiled versions in ``_core.pyx``; selected at
import time when the extension is unavailable or FLOORREF_PURE_PYTHON is set.
"""

from __future__ import annotations

import math

import numpy as np

BACKEND = "python"

_LCG_MULT = 6364136223846793005
_LCG_INC = 1442695040888963407
_LCG_MASK = (1 << 64) - 1


def distort_radial(xy: np.ndarray, k1: float, k2: float, k3: float) -> np.ndarray:
    """Forward radial distortion of normalized image coordinates, shape (n, 2)."""
    xy = np.asarray(xy, dtype=np.float64)
    r2 = np.sum(xy * xy, axis=1)
    factor = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3))
    return xy * factor[:, None]


def undistort_radial(xy: np.ndarray, k1: float, k2: float, k3: float, max_iter: int = 20) -> np.ndarray:
    """Fixed-point inverse of the radial distortion, shape (n, 2).

    Iterates r_u <- r_d / (1 + k1 r_u^2 + k2 r_u^4 + k3 r_u^6) on the radius
    for a fixed iteration count (the contraction factor stays well below one
    in the |k1| <= 0.1 regime the camera model promises, so 20 iterations land
    far inside double precision). The fixed count keeps compiled and fallback
    backends bit-identical.
    """
    xy = np.asarray(xy, dtype=np.float64)
    rd = np.sqrt(np.sum(xy * xy, axis=1))
    ru = rd.copy()
    for _ in range(max_iter):
        r2 = ru * ru
        ru = rd / (1.0 + r2 * (k1 + r2 * (k2 + r2 * k3)))
    scale = np.ones_like(rd)
    nonzero = rd > 0.0
    scale[nonzero] = ru[nonzero] / rd[nonzero]
    return xy * scale[:, None]


def _shuffled(points: np.ndarray) -> np.ndarray:
    """Deterministic Fisher-Yates shuffle driven by a fixed 64-bit LCG."""
    n = points.shape[0]
    idx = list(range(n))
    state = 0x853C49E6748FEA9B
    for i in range(n - 1, 0, -1):
        state = (state * _LCG_MULT + _LCG_INC) & _LCG_MASK
        j = (state >> 16) % (i + 1)
        idx[i], idx[j] = idx[j], idx[i]
    return points[idx]


def _dist(ax: float, ay: float, bx: float, by: float) -> float:
    # explicit sqrt of squares, matching the compiled backend bit for bit
    dx = ax - bx
    dy = ay - by
    return math.sqrt(dx * dx + dy * dy)


def _circle_two(ax: float, ay: float, bx: float, by: float) -> tuple[float, float, float]:
    cx = (ax + bx) / 2.0
    cy = (ay + by) / 2.0
    r = max(_dist(cx, cy, ax, ay), _dist(cx, cy, bx, by))
    return cx, cy, r


def _circle_three(
    ax: float, ay: float, bx: float, by: float, px: float, py: float
) -> tuple[float, float, float] | None:
    # Circumcircle, evaluated about the bounding-box midpoint for conditioning.
    ox = (min(ax, bx, px) + max(ax, bx, px)) / 2.0
    oy = (min(ay, by, py) + max(ay, by, py)) / 2.0
    a0, a1 = ax - ox, ay - oy
    b0, b1 = bx - ox, by - oy
    p0, p1 = px - ox, py - oy
    d = (a0 * (b1 - p1) + b0 * (p1 - a1) + p0 * (a1 - b1)) * 2.0
    if d == 0.0:
        return None
    x = ox + ((a0 * a0 + a1 * a1) * (b1 - p1) + (b0 * b0 + b1 * b1) * (p1 - a1) + (p0 * p0 + p1 * p1) * (a1 - b1)) / d
    y = oy + ((a0 * a0 + a1 * a1) * (p0 - b0) + (b0 * b0 + b1 * b1) * (a0 - p0) + (p0 * p0 + p1 * p1) * (b0 - a0)) / d
    r = max(_dist(x, y, ax, ay), _dist(x, y, bx, by), _dist(x, y, px, py))
    return x, y, r


def _inside(cx: float, cy: float, r: float, px: float, py: float) -> bool:
    return _dist(px, py, cx, cy) <= r * (1.0 + 1e-14) + 1e-14


def enclosing_circle(points: np.ndarray) -> tuple[float, float, float]:
    """Smallest circle containing all 2D points, shape (n, 2) with n >= 1.

    Randomized incremental construction (Welzl-style with one- and two-point
    boundary passes); expected linear time, deterministic permutation.
    """
    pts = np.ascontiguousarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] == 0:
        raise ValueError("enclosing_circle expects a non-empty (n, 2) array")
    pts = _shuffled(pts)
    n = pts.shape[0]

    cx, cy, r = pts[0, 0], pts[0, 1], 0.0
    for i in range(1, n):
        px, py = pts[i, 0], pts[i, 1]
        if _inside(cx, cy, r, px, py):
            continue
        # p_i lies on the boundary of the circle over pts[:i+1]
        cx, cy, r = px, py, 0.0
        for j in range(i):
            qx, qy = pts[j, 0], pts[j, 1]
            if _inside(cx, cy, r, qx, qy):
                continue
            # p_i and p_j both lie on the boundary
            cx, cy, r = _circle_two(px, py, qx, qy)
            for k in range(j):
                sx, sy = pts[k, 0], pts[k, 1]
                if _inside(cx, cy, r, sx, sy):
                    continue
                c3 = _circle_three(px, py, qx, qy, sx, sy)
                if c3 is None:
                    # collinear triple: widest diameter circle of the three
                    pairs = (
                        _circle_two(px, py, qx, qy),
                        _circle_two(px, py, sx, sy),
                        _circle_two(qx, qy, sx, sy),
                    )
                    cx, cy, r = max(pairs, key=lambda c: c[2])
                else:
                    cx, cy, r = c3
    return float(cx), float(cy), float(r)
