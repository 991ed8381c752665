# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops: square assignment and pairwise IoU."""
import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()


def solve_square(double[:, ::1] cost):
    """Minimum-cost perfect matching on a square matrix.

    Shortest augmenting path with dual potentials, O(n^3). Returns the
    column assigned to each row.
    """
    cdef Py_ssize_t n = cost.shape[0]
    cdef Py_ssize_t i, j, i0, j0, j1
    cdef double delta, cur
    out = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] col_of = out
    if n == 0:
        return out
    cdef double[::1] u = np.zeros(n + 1)
    cdef double[::1] v = np.zeros(n + 1)
    cdef double[::1] minv = np.empty(n + 1)
    cdef Py_ssize_t[::1] p = np.zeros(n + 1, dtype=np.intp)
    cdef Py_ssize_t[::1] way = np.zeros(n + 1, dtype=np.intp)
    cdef unsigned char[::1] used = np.zeros(n + 1, dtype=np.uint8)

    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        for j in range(n + 1):
            minv[j] = INFINITY
            used[j] = 0
        while True:
            used[j0] = 1
            i0 = p[j0]
            delta = INFINITY
            j1 = 0
            for j in range(1, n + 1):
                if not used[j]:
                    cur = cost[i0 - 1, j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0 != 0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1

    for j in range(1, n + 1):
        col_of[p[j] - 1] = j - 1
    return out


def iou_matrix(double[:, ::1] a, double[:, ::1] b):
    """Pairwise IoU between ``(left, top, width, height)`` rows of ``a`` and ``b``."""
    cdef Py_ssize_t n = a.shape[0], m = b.shape[0], i, j
    cdef double ax2, ay2, iw, ih, inter, area_a
    out = np.zeros((n, m))
    cdef double[:, ::1] res = out
    for i in range(n):
        ax2 = a[i, 0] + a[i, 2]
        ay2 = a[i, 1] + a[i, 3]
        area_a = a[i, 2] * a[i, 3]
        for j in range(m):
            iw = min(ax2, b[j, 0] + b[j, 2]) - max(a[i, 0], b[j, 0])
            if iw <= 0:
                continue
            ih = min(ay2, b[j, 1] + b[j, 3]) - max(a[i, 1], b[j, 1])
            if ih <= 0:
                continue
            inter = iw * ih
            res[i, j] = min(1.0, inter / (area_a + b[j, 2] * b[j, 3] - inter))
    return out
