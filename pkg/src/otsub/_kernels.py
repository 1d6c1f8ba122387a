"""Geometry kernels shared by the ground-space model and the bounds code."""

import numpy as np

from ._accel import njit


@njit
def pairwise_euclidean(x, y):
    n, m, dim = x.shape[0], y.shape[0], x.shape[1]
    out = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for k in range(dim):
                d = x[i, k] - y[j, k]
                acc += d * d
            out[i, j] = np.sqrt(acc)
    return out


@njit
def max_pairwise_euclidean(x):
    n, dim = x.shape[0], x.shape[1]
    best = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            acc = 0.0
            for k in range(dim):
                d = x[i, k] - x[j, k]
                acc += d * d
            if acc > best:
                best = acc
    return np.sqrt(best)


@njit
def farthest_point_cover_coords(x, radius, first):
    """Greedy farthest-point centers until every point is within ``radius``.

    Returns the center indices in selection order and, per point, the
    distance to its nearest center.
    """
    n, dim = x.shape[0], x.shape[1]
    near = np.full(n, np.inf)
    centers = np.empty(n, dtype=np.int64)
    k = 0
    c = first
    while True:
        centers[k] = c
        k += 1
        far = -1.0
        far_i = -1
        for i in range(n):
            acc = 0.0
            for t in range(dim):
                d = x[i, t] - x[c, t]
                acc += d * d
            d = np.sqrt(acc)
            if d < near[i]:
                near[i] = d
            if near[i] > far:
                far = near[i]
                far_i = i
        if far <= radius or k == n:
            break
        c = far_i
    return centers[:k], near


@njit
def farthest_point_cover_matrix(dist, radius, first):
    n = dist.shape[0]
    near = np.full(n, np.inf)
    centers = np.empty(n, dtype=np.int64)
    k = 0
    c = first
    while True:
        centers[k] = c
        k += 1
        far = -1.0
        far_i = -1
        for i in range(n):
            d = dist[c, i]
            if d < near[i]:
                near[i] = d
            if near[i] > far:
                far = near[i]
                far_i = i
        if far <= radius or k == n:
            break
        c = far_i
    return centers[:k], near
