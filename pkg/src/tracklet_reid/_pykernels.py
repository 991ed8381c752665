"""Pure-Python implementations of the compiled kernels.

Same algorithms and the same floating-point operation order as ``_ckernels``,
so both backends return identical results.
"""
import math

import numpy as np


def solve_square(cost):
    """Minimum-cost perfect matching on a square matrix; returns the column per row."""
    n = cost.shape[0]
    out = np.empty(n, dtype=np.int64)
    if n == 0:
        return out
    a = cost.tolist()
    inf = math.inf
    u = [0.0] * (n + 1)
    v = [0.0] * (n + 1)
    p = [0] * (n + 1)
    way = [0] * (n + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [inf] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            row = a[i0 - 1]
            ui0 = u[i0]
            delta = inf
            j1 = 0
            for j in range(1, n + 1):
                if not used[j]:
                    cur = row[j - 1] - ui0 - v[j]
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
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    for j in range(1, n + 1):
        out[p[j] - 1] = j - 1
    return out


def iou_matrix(a, b):
    """Pairwise IoU between ``(left, top, width, height)`` rows of ``a`` and ``b``."""
    n, m = a.shape[0], b.shape[0]
    out = np.zeros((n, m))
    if n == 0 or m == 0:
        return out
    al, at, aw, ah = (a[:, k : k + 1] for k in range(4))
    bl, bt, bw, bh = (b[None, :, k] for k in range(4))
    iw = np.minimum(al + aw, bl + bw) - np.maximum(al, bl)
    ih = np.minimum(at + ah, bt + bh) - np.maximum(at, bt)
    mask = (iw > 0) & (ih > 0)
    inter = iw * ih
    union = aw * ah + bw * bh - inter
    np.divide(inter, union, out=out, where=mask)
    np.minimum(out, 1.0, out=out)
    return out
