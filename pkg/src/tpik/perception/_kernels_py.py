"""NumPy reference kernels for the depth pipeline.

The compiled backend in ``_kernels.pyx`` mirrors these routines expression
by expression (same operand order, no fused multiply-add), so both produce
bit-identical depth grids and search results.  Keep the two files in sync.

Array layouts shared with the compiled kernels:

* spheres: (n, 4) rows ``cx cy cz r`` in camera coordinates
* boxes:   (n, 15) rows ``cx cy cz  r00 r01 r02 r10 r11 r12 r20 r21 r22
  hx hy hz`` where ``r`` maps box-local to camera axes (row-major)
* points:  (n, 3) camera coordinates
"""

from __future__ import annotations

import numpy as np

COMPILED = False


def _pixel_rays(width, height, fx, fy, cx, cy):
    ax = (np.arange(width, dtype=float) - cx) / fx
    ay = (np.arange(height, dtype=float) - cy) / fy
    return ax[None, :], ay[:, None]


def render(width, height, fx, fy, cx, cy, spheres, boxes, points):
    """Z-buffer render of the primitives; +inf where nothing is hit.

    Rays go through pixel centers: direction (ax, ay, 1) with
    ax = (col - cx)/fx, ay = (row - cy)/fy.  The stored depth is the ray
    parameter t, which equals the z coordinate of the hit.
    """
    ax, ay = _pixel_rays(width, height, fx, fy, cx, cy)
    depth = np.full((height, width), np.inf)

    for i in range(spheres.shape[0]):
        sx, sy, sz, sr = spheres[i]
        a = ax * ax + ay * ay + 1.0
        b = -2.0 * (ax * sx + ay * sy + sz)
        c = sx * sx + sy * sy + sz * sz - sr * sr
        disc = b * b - 4.0 * a * c
        ok = disc >= 0.0
        sq = np.sqrt(np.where(ok, disc, 0.0))
        t_near = (-b - sq) / (2.0 * a)
        t_far = (-b + sq) / (2.0 * a)
        t = np.where(t_near > 0.0, t_near, t_far)
        hit = ok & (t > 0.0) & (t < depth)
        depth = np.where(hit, t, depth)

    for i in range(boxes.shape[0]):
        bx, by, bz = boxes[i, 0], boxes[i, 1], boxes[i, 2]
        r = boxes[i, 3:12]
        hx, hy, hz = boxes[i, 12], boxes[i, 13], boxes[i, 14]
        t_min = np.full((height, width), -np.inf)
        t_max = np.full((height, width), np.inf)
        miss = np.zeros((height, width), dtype=bool)
        for k, h in ((0, hx), (1, hy), (2, hz)):
            # Slab k in box-local coordinates; ray origin is the camera.
            o = -(r[k] * bx + r[3 + k] * by + r[6 + k] * bz)
            d = r[k] * ax + r[3 + k] * ay + r[6 + k]
            zero = d == 0.0
            if abs(o) > h:
                miss = miss | zero
            with np.errstate(divide="ignore", invalid="ignore"):
                t1 = (-h - o) / d
                t2 = (h - o) / d
            lo = np.minimum(t1, t2)
            hi = np.maximum(t1, t2)
            t_min = np.where(zero, t_min, np.maximum(t_min, lo))
            t_max = np.where(zero, t_max, np.minimum(t_max, hi))
        t = np.where(t_min > 0.0, t_min, t_max)
        hit = ~miss & (t_max >= t_min) & (t_max > 0.0) & (t > 0.0) & (t < depth)
        depth = np.where(hit, t, depth)

    for i in range(points.shape[0]):
        px, py, pz = points[i]
        if pz <= 0.0:
            continue
        col = int(np.floor(cx + fx * px / pz + 0.5))
        row = int(np.floor(cy + fy * py / pz + 0.5))
        if 0 <= row < height and 0 <= col < width and pz < depth[row, col]:
            depth[row, col] = pz

    return depth


def removal_mask(depth, fx, fy, cx, cy, boxes):
    """Boolean mask of finite pixels whose back-projection lies in any box."""
    height, width = depth.shape
    ax, ay = _pixel_rays(width, height, fx, fy, cx, cy)
    finite = np.isfinite(depth)
    mask = np.zeros((height, width), dtype=bool)
    for i in range(boxes.shape[0]):
        bx, by, bz = boxes[i, 0], boxes[i, 1], boxes[i, 2]
        r = boxes[i, 3:12]
        hx, hy, hz = boxes[i, 12], boxes[i, 13], boxes[i, 14]
        # 0 * inf at empty pixels gives nan; the finite gate discards it.
        with np.errstate(invalid="ignore"):
            px = ax * depth - bx
            py = ay * depth - by
            pz = depth - bz
            inside = finite
            for k, h in ((0, hx), (1, hy), (2, hz)):
                local = r[k] * px + r[3 + k] * py + r[6 + k] * pz
                inside = inside & (np.abs(local) <= h)
        mask = mask | inside
    return mask


def min_search(depth, fx, fy, cx, cy, target, rho, rect):
    """Closest back-projected pixel to ``target`` within an inf-norm cube.

    ``rect`` is (row0, row1, col0, col1), inclusive.  Membership uses the
    inf norm with radius ``rho``; the minimized quantity is the squared
    2-norm.  Ties keep the first pixel in row-major order.  Returns
    (found, row, col, vx, vy, vz, d2) with v = pixel point - target.
    """
    row0, row1, col0, col1 = rect
    tx, ty, tz = float(target[0]), float(target[1]), float(target[2])
    sub = depth[row0:row1 + 1, col0:col1 + 1]
    ax = (np.arange(col0, col1 + 1, dtype=float) - cx) / fx
    ay = (np.arange(row0, row1 + 1, dtype=float) - cy) / fy
    with np.errstate(invalid="ignore"):
        vx = ax[None, :] * sub - tx
        vy = ay[:, None] * sub - ty
        vz = sub - tz
        member = (np.isfinite(sub)
                  & (np.abs(vx) <= rho) & (np.abs(vy) <= rho) & (np.abs(vz) <= rho))
        if not member.any():
            return False, -1, -1, 0.0, 0.0, 0.0, np.inf
        d2 = vx * vx + vy * vy + vz * vz
        d2 = np.where(member, d2, np.inf)
    flat = int(np.argmin(d2))
    r, c = divmod(flat, sub.shape[1])
    return (True, row0 + r, col0 + c,
            float(vx[r, c]), float(vy[r, c]), float(vz[r, c]), float(d2[r, c]))
