# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled depth kernels.

Mirror of ``_kernels_py`` with identical operand order per pixel; the
build disables fused multiply-add (-ffp-contract=off) so both backends
produce bit-identical floats.  Keep the two files in sync.
"""

import numpy as np

cimport cython
from libc.math cimport INFINITY, fabs, floor, isfinite, sqrt

COMPILED = True


def render(int width, int height, double fx, double fy, double cx, double cy,
           double[:, ::1] spheres, double[:, ::1] boxes, double[:, ::1] points):
    depth_arr = np.full((height, width), np.inf)
    cdef double[:, ::1] depth = depth_arr
    cdef Py_ssize_t row, col, i, k
    cdef double ax, ay, best
    cdef double sx, sy, sz, sr, a, b, c, disc, sq, t_near, t_far, t
    cdef double bx, by, bz, h, o, d, t1, t2, lo, hi, t_min, t_max
    cdef double r[9]
    cdef double hbox[3]
    cdef double obox[3]
    cdef bint miss
    cdef Py_ssize_t n_sph = spheres.shape[0]
    cdef Py_ssize_t n_box = boxes.shape[0]
    cdef Py_ssize_t n_pts = points.shape[0]

    for row in range(height):
        ay = ((<double> row) - cy) / fy
        for col in range(width):
            ax = ((<double> col) - cx) / fx
            best = depth[row, col]

            for i in range(n_sph):
                sx = spheres[i, 0]
                sy = spheres[i, 1]
                sz = spheres[i, 2]
                sr = spheres[i, 3]
                a = ax * ax + ay * ay + 1.0
                b = -2.0 * (ax * sx + ay * sy + sz)
                c = sx * sx + sy * sy + sz * sz - sr * sr
                disc = b * b - 4.0 * a * c
                if disc >= 0.0:
                    sq = sqrt(disc)
                    t_near = (-b - sq) / (2.0 * a)
                    t_far = (-b + sq) / (2.0 * a)
                    t = t_near if t_near > 0.0 else t_far
                    if t > 0.0 and t < best:
                        best = t

            for i in range(n_box):
                bx = boxes[i, 0]
                by = boxes[i, 1]
                bz = boxes[i, 2]
                for k in range(9):
                    r[k] = boxes[i, 3 + k]
                hbox[0] = boxes[i, 12]
                hbox[1] = boxes[i, 13]
                hbox[2] = boxes[i, 14]
                t_min = -INFINITY
                t_max = INFINITY
                miss = False
                for k in range(3):
                    h = hbox[k]
                    o = -(r[k] * bx + r[3 + k] * by + r[6 + k] * bz)
                    d = r[k] * ax + r[3 + k] * ay + r[6 + k]
                    if d == 0.0:
                        if fabs(o) > h:
                            miss = True
                        continue
                    t1 = (-h - o) / d
                    t2 = (h - o) / d
                    if t1 < t2:
                        lo = t1
                        hi = t2
                    else:
                        lo = t2
                        hi = t1
                    if lo > t_min:
                        t_min = lo
                    if hi < t_max:
                        t_max = hi
                if miss or t_max < t_min or t_max <= 0.0:
                    continue
                t = t_min if t_min > 0.0 else t_max
                if t > 0.0 and t < best:
                    best = t

            depth[row, col] = best

    # Point returns land on the nearest pixel center, like _kernels_py.
    cdef double px, py, pz
    for i in range(n_pts):
        px = points[i, 0]
        py = points[i, 1]
        pz = points[i, 2]
        if pz <= 0.0:
            continue
        col = <Py_ssize_t> floor(cx + fx * px / pz + 0.5)
        row = <Py_ssize_t> floor(cy + fy * py / pz + 0.5)
        if 0 <= row < height and 0 <= col < width and pz < depth[row, col]:
            depth[row, col] = pz

    return depth_arr


def removal_mask(double[:, ::1] depth, double fx, double fy, double cx, double cy,
                 double[:, ::1] boxes):
    cdef Py_ssize_t height = depth.shape[0]
    cdef Py_ssize_t width = depth.shape[1]
    mask_arr = np.zeros((height, width), dtype=np.uint8)
    cdef unsigned char[:, ::1] mask = mask_arr
    cdef Py_ssize_t row, col, i, k
    cdef double ax, ay, dv, px, py, pz, local
    cdef double bx, by, bz
    cdef double r[9]
    cdef double hbox[3]
    cdef bint inside
    cdef Py_ssize_t n_box = boxes.shape[0]

    for row in range(height):
        ay = ((<double> row) - cy) / fy
        for col in range(width):
            dv = depth[row, col]
            if not isfinite(dv):
                continue
            ax = ((<double> col) - cx) / fx
            for i in range(n_box):
                bx = boxes[i, 0]
                by = boxes[i, 1]
                bz = boxes[i, 2]
                for k in range(9):
                    r[k] = boxes[i, 3 + k]
                hbox[0] = boxes[i, 12]
                hbox[1] = boxes[i, 13]
                hbox[2] = boxes[i, 14]
                px = ax * dv - bx
                py = ay * dv - by
                pz = dv - bz
                inside = True
                for k in range(3):
                    local = r[k] * px + r[3 + k] * py + r[6 + k] * pz
                    if fabs(local) > hbox[k]:
                        inside = False
                        break
                if inside:
                    mask[row, col] = 1
                    break
    return mask_arr


def min_search(double[:, ::1] depth, double fx, double fy, double cx, double cy,
               double[::1] target, double rho, rect):
    cdef Py_ssize_t row0 = rect[0]
    cdef Py_ssize_t row1 = rect[1]
    cdef Py_ssize_t col0 = rect[2]
    cdef Py_ssize_t col1 = rect[3]
    cdef double tx = target[0]
    cdef double ty = target[1]
    cdef double tz = target[2]
    cdef Py_ssize_t row, col
    cdef Py_ssize_t best_row = -1
    cdef Py_ssize_t best_col = -1
    cdef double ax, ay, dv, vx, vy, vz, d2
    cdef double best = INFINITY
    cdef double bvx = 0.0
    cdef double bvy = 0.0
    cdef double bvz = 0.0
    cdef bint found = False

    for row in range(row0, row1 + 1):
        ay = ((<double> row) - cy) / fy
        for col in range(col0, col1 + 1):
            dv = depth[row, col]
            if not isfinite(dv):
                continue
            ax = ((<double> col) - cx) / fx
            vx = ax * dv - tx
            vy = ay * dv - ty
            vz = dv - tz
            if fabs(vx) <= rho and fabs(vy) <= rho and fabs(vz) <= rho:
                d2 = vx * vx + vy * vy + vz * vz
                if d2 < best:
                    best = d2
                    best_row = row
                    best_col = col
                    bvx = vx
                    bvy = vy
                    bvz = vz
                    found = True

    if not found:
        return False, -1, -1, 0.0, 0.0, 0.0, np.inf
    return True, int(best_row), int(best_col), bvx, bvy, bvz, best
