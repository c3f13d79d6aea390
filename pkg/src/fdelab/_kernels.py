"""Hot loops used by the verification lab.

Every kernel exists twice: a numba ``@njit`` version and a pure-numpy
version with identical semantics.  Set ``FDE_LAB_NUMBA=0`` to force the
numpy path (numba is also skipped automatically when it is not importable).
``FDE_LAB_THREADS`` caps the numba thread pool.

Arrays passed in are 2-D ``(n_theta, n_entries)`` per segment or 3-D
``(n_segments, n_theta, n_entries)`` for batches; ``weights`` has length
``n_theta`` and multiplies the per-node max-abs value.
"""

import os

import numpy as np

_flag = os.environ.get("FDE_LAB_NUMBA", "1").strip().lower()
_want_numba = _flag not in ("0", "false", "no", "off")

try:
    if not _want_numba:
        raise ImportError("numba disabled by FDE_LAB_NUMBA")
    import numba
    from numba import njit, prange

    if "NUMBA_THREADING_LAYER" not in os.environ:
        # the system TBB is too old for numba; avoid the warning and use the builtin pool
        numba.config.THREADING_LAYER = "workqueue"

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False


# -- numpy reference implementations -------------------------------------


def weighted_sup_numpy(values, weights):
    if values.shape[0] == 0:
        return 0.0
    return float(np.max(np.max(np.abs(values), axis=1) * weights))


def pairwise_weighted_sup_numpy(stack, weights):
    n = stack.shape[0]
    out = np.zeros((n, n))
    for i in range(n):
        # one row at a time keeps memory at O(n * size) instead of O(n^2 * size)
        diff = np.abs(stack[i + 1 :] - stack[i])
        if diff.shape[0]:
            row = np.max(np.max(diff, axis=2) * weights, axis=1)
            out[i, i + 1 :] = row
            out[i + 1 :, i] = row
    return out


def farthest_point_numpy(dist, k):
    n = dist.shape[0]
    centers = np.empty(k, dtype=np.int64)
    assign = np.zeros(n, dtype=np.int64)
    centers[0] = 0
    nearest = dist[0].copy()
    for j in range(1, k):
        c = int(np.argmax(nearest))
        centers[j] = c
        closer = dist[c] < nearest
        nearest[closer] = dist[c][closer]
        assign[closer] = j
    return centers, assign, float(nearest.max()) if n else 0.0


def modulus_numpy(values, theta, delta):
    n = values.shape[0]
    best = 0.0
    for lag in range(1, n):
        gaps = theta[lag:] - theta[:-lag]
        ok = gaps < delta
        if not ok.any():
            break
        diff = np.max(np.abs(values[lag:][ok] - values[:-lag][ok]))
        best = max(best, float(diff))
    return best


# -- numba versions ------------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True)
    def weighted_sup_numba(values, weights):
        best = 0.0
        for j in range(values.shape[0]):
            m = 0.0
            for d in range(values.shape[1]):
                a = abs(values[j, d])
                if a > m:
                    m = a
            m *= weights[j]
            if m > best:
                best = m
        return best

    @njit(parallel=True, cache=True)
    def pairwise_weighted_sup_numba(stack, weights):
        n, nt, nd = stack.shape
        out = np.zeros((n, n))
        for i in prange(n):
            for k in range(i + 1, n):
                best = 0.0
                for j in range(nt):
                    m = 0.0
                    for d in range(nd):
                        a = abs(stack[i, j, d] - stack[k, j, d])
                        if a > m:
                            m = a
                    m *= weights[j]
                    if m > best:
                        best = m
                out[i, k] = best
        for i in range(n):
            for k in range(i + 1, n):
                out[k, i] = out[i, k]
        return out

    @njit(cache=True)
    def farthest_point_numba(dist, k):
        n = dist.shape[0]
        centers = np.empty(k, dtype=np.int64)
        assign = np.zeros(n, dtype=np.int64)
        nearest = dist[0].copy()
        centers[0] = 0
        for j in range(1, k):
            c = 0
            far = -1.0
            for i in range(n):
                if nearest[i] > far:
                    far = nearest[i]
                    c = i
            centers[j] = c
            for i in range(n):
                if dist[c, i] < nearest[i]:
                    nearest[i] = dist[c, i]
                    assign[i] = j
        radius = 0.0
        for i in range(n):
            if nearest[i] > radius:
                radius = nearest[i]
        return centers, assign, radius

    @njit(cache=True)
    def modulus_numba(values, theta, delta):
        n, nd = values.shape
        best = 0.0
        for a in range(n):
            for b in range(a + 1, n):
                if theta[b] - theta[a] >= delta:
                    break
                for d in range(nd):
                    v = abs(values[b, d] - values[a, d])
                    if v > best:
                        best = v
        return best

    threads = os.environ.get("FDE_LAB_THREADS")
    if threads:
        numba.set_num_threads(max(1, min(int(threads), numba.config.NUMBA_NUM_THREADS)))


def _pick(name):
    if HAVE_NUMBA:
        return globals()[name + "_numba"]
    return globals()[name + "_numpy"]


BACKEND = "numba" if HAVE_NUMBA else "numpy"


def weighted_sup(values, weights):
    """max_j weights[j] * max_d |values[j, d]|."""
    return float(_pick("weighted_sup")(np.ascontiguousarray(values, dtype=float),
                                       np.ascontiguousarray(weights, dtype=float)))


def pairwise_weighted_sup(stack, weights):
    """Symmetric matrix of weighted sup distances between the segments in ``stack``."""
    return _pick("pairwise_weighted_sup")(np.ascontiguousarray(stack, dtype=float),
                                          np.ascontiguousarray(weights, dtype=float))


def farthest_point(dist, k):
    """Greedy k-center on a distance matrix, seeded at index 0.

    Returns ``(centers, assignment, radius)`` where radius is the largest
    distance from a point to its nearest chosen center.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    centers, assign, radius = _pick("farthest_point")(np.ascontiguousarray(dist, dtype=float), int(k))
    return centers, assign, float(radius)


def modulus(values, theta, delta):
    """max |values[b] - values[a]| over node pairs with 0 <= theta[b] - theta[a] < delta."""
    return float(_pick("modulus")(np.ascontiguousarray(values, dtype=float),
                                  np.ascontiguousarray(theta, dtype=float), float(delta)))
