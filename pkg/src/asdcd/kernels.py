"""Compiled coordinate sweeps shared by every variant.

``mode`` selects how the shared primal vector is touched:

``PLAIN``   ordinary loads and stores (serial, and the lock-free wild variant)
``ATOMIC``  ordinary loads, atomic fetch-add for every scatter write
``LOCKED``  per-feature spinlocks over the row's support, taken in ascending
            feature order, held from the read of ``w`` to the end of the write

:func:`run_epochs` releases the GIL. Each worker thread calls it with its own
``tid``; the workers share ``w`` and ``alpha`` (each ``alpha_i`` belongs to one
block, so only ``w`` is contended) and meet at an in-kernel barrier after every
epoch.
"""
import math

import numpy as np
from numba import njit

from ._atomics import (
    atomic_add_f64,
    fetch_add_i64,
    load_acquire,
    release,
    sched_yield,
    store_release,
    try_acquire,
)
from .loss import SQUARED_HINGE, coordinate_step, dual_gradient

PLAIN = 0
ATOMIC = 1
LOCKED = 2

OK = 0
NUMERIC_FAILURE = 1

# busy-wait attempts before giving up the core; matters when threads > cores
SPIN_BEFORE_YIELD = 16

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


@njit(cache=True, nogil=True)
def _mix64(z):
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


@njit(cache=True, nogil=True)
def stream_key(seed, tid, epoch):
    """SplitMix64 key for the permutation of thread ``tid`` at ``epoch``."""
    k = _mix64(np.uint64(seed) + _GOLDEN)
    k = _mix64(k ^ (np.uint64(tid) + _GOLDEN))
    return _mix64(k ^ (np.uint64(epoch) + _GOLDEN))


@njit(cache=True, nogil=True)
def shuffle(arr, size, key):
    """Fisher-Yates over ``arr[:size]`` driven by a SplitMix64 counter stream."""
    state = key
    for k in range(size - 1, 0, -1):
        state = state + _GOLDEN
        r = _mix64(state)
        # modulo bias is below size / 2**64
        j = np.int64(r % np.uint64(k + 1))
        tmp = arr[k]
        arr[k] = arr[j]
        arr[j] = tmp


# first projected-gradient spread that triggers reactivation; tightened 10x per trigger
REACTIVATE_TOL = 0.1
REACTIVATE_TOL_MIN = 1e-14


@njit(cache=True, nogil=True)
def next_thresholds(pg_max, pg_min):
    """Shrinking thresholds for the next epoch from this epoch's extremes."""
    hi = pg_max if pg_max > 0.0 else math.inf
    lo = pg_min if pg_min < 0.0 else -math.inf
    return hi, lo


@njit(cache=True, nogil=True)
def _acquire_row(locks, indices, lo, hi):
    for p in range(lo, hi):
        j = indices[p]
        spins = 0
        while not try_acquire(locks, j):
            spins += 1
            if spins >= SPIN_BEFORE_YIELD:
                sched_yield()
                spins = 0


@njit(cache=True, nogil=True)
def _release_row(locks, indices, lo, hi):
    for p in range(lo, hi):
        release(locks, indices[p])


@njit(cache=True, nogil=True)
def shrink_test(code, C, upper, wx, a, pg_max_old, pg_min_old):
    """``(skip, projected_gradient)`` for one coordinate.

    A coordinate at a bound is skipped when its gradient points out of the
    domain by more than the previous epoch's extreme projected gradient.
    """
    g = dual_gradient(code, C, wx, a)
    if a == 0.0:
        if g > pg_max_old:
            return True, 0.0
        return False, min(g, 0.0)
    if a == upper:
        if g < pg_min_old:
            return True, 0.0
        return False, max(g, 0.0)
    return False, g


@njit(cache=True, nogil=True)
def shrink_block(code, C, indptr, indices, values, alpha, w, active, size, pg_max_old, pg_min_old):
    """Apply :func:`shrink_test` to ``active[:size]`` without updating; return the new size."""
    upper = C if code != SQUARED_HINGE else math.inf
    k = 0
    while k < size:
        i = active[k]
        wx = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            wx += w[indices[p]] * values[p]
        skip, _ = shrink_test(code, C, upper, wx, alpha[i], pg_max_old, pg_min_old)
        if skip:
            size -= 1
            active[k] = active[size]
            active[size] = i
        else:
            k += 1
    return size


@njit(cache=True, nogil=True)
def sweep(mode, code, C, indptr, indices, values, norm_sq, alpha, w, locks,
          active, size, shrink, pg_max_old, pg_min_old, stats):
    """Visit ``active[:size]`` once in its current order.

    With ``shrink`` set, coordinates rejected by :func:`shrink_test` are
    swapped to the tail and the active size reduced. Returns
    ``(status, new_size)``; ``stats`` receives the max and min projected
    gradient over the coordinates that stayed active.
    """
    upper = C if code != SQUARED_HINGE else math.inf
    pg_max = -math.inf
    pg_min = math.inf
    status = OK
    k = 0
    while k < size:
        i = active[k]
        lo = indptr[i]
        hi = indptr[i + 1]
        if mode == LOCKED:
            _acquire_row(locks, indices, lo, hi)
        wx = 0.0
        for p in range(lo, hi):
            wx += w[indices[p]] * values[p]
        a = alpha[i]
        skip = False
        if shrink:
            skip, pg = shrink_test(code, C, upper, wx, a, pg_max_old, pg_min_old)
            if not skip:
                pg_max = max(pg_max, pg)
                pg_min = min(pg_min, pg)
        if not skip:
            new = coordinate_step(code, C, wx, norm_sq[i], a)
            if new != new:
                status = NUMERIC_FAILURE
            elif new != a:
                delta = new - a
                alpha[i] = new
                if mode == ATOMIC:
                    for p in range(lo, hi):
                        atomic_add_f64(w, indices[p], delta * values[p])
                else:
                    for p in range(lo, hi):
                        w[indices[p]] += delta * values[p]
        if mode == LOCKED:
            _release_row(locks, indices, lo, hi)
        if status != OK:
            break
        if skip:
            size -= 1
            active[k] = active[size]
            active[size] = i
        else:
            k += 1
    stats[0] = pg_max
    stats[1] = pg_min
    return status, size


@njit(cache=True, nogil=True)
def barrier_wait(bar, parties):
    """Generation-counting barrier; ``bar = [arrived, generation]``."""
    gen = load_acquire(bar, 1)
    if fetch_add_i64(bar, 0, 1) == parties - 1:
        bar[0] = 0
        store_release(bar, 1, gen + 1)
        return
    spins = 0
    while load_acquire(bar, 1) == gen:
        spins += 1
        if spins >= SPIN_BEFORE_YIELD:
            sched_yield()
            spins = 0


@njit(cache=True, nogil=True)
def run_epochs(tid, nthreads, first_epoch, n_epochs, seed, mode, code, C,
               indptr, indices, values, norm_sq, alpha, w, locks,
               order, offsets, sizes, shrink, thresholds, pg_stats, bar, status):
    """Run ``n_epochs`` epochs of thread ``tid``'s block.

    The block is ``order[offsets[tid]:offsets[tid + 1]]`` of which the first
    ``sizes[tid]`` entries are active. ``pg_stats`` is double-buffered by
    epoch parity (as is ``status``) so a fast thread never overwrites values a
    slow thread has yet to read. ``thresholds = [hi, lo, reactivate_tol]``
    carries the shrinking state between calls; thread 0 writes it back.
    """
    start = offsets[tid]
    full = offsets[tid + 1] - start
    blk = order[start:offsets[tid + 1]]
    hi = thresholds[0]
    lo = thresholds[1]
    react = thresholds[2]
    for e in range(first_epoch, first_epoch + n_epochs):
        size = sizes[tid]
        shuffle(blk, size, stream_key(seed, tid, e))
        st, size = sweep(mode, code, C, indptr, indices, values, norm_sq, alpha, w, locks,
                         blk, size, shrink, hi, lo, pg_stats[e % 2, tid])
        sizes[tid] = size
        status[e % 2, tid] = st
        if nthreads > 1:
            barrier_wait(bar, nthreads)
        pg_max = -math.inf
        pg_min = math.inf
        failed = False
        for t in range(nthreads):
            pg_max = max(pg_max, pg_stats[e % 2, t, 0])
            pg_min = min(pg_min, pg_stats[e % 2, t, 1])
            failed = failed or status[e % 2, t] != OK
        if failed:
            break
        hi, lo = next_thresholds(pg_max, pg_min)
        if shrink and pg_max - pg_min <= react:
            # active coordinates look optimal: bring the shrunk ones back
            sizes[tid] = full
            hi = math.inf
            lo = -math.inf
            react = max(react * 0.1, REACTIVATE_TOL_MIN)
    if tid == 0:
        thresholds[0] = hi
        thresholds[1] = lo
        thresholds[2] = react


@njit(cache=True, nogil=True)
def accumulate_w(indptr, indices, values, alpha, d):
    """``sum_i alpha_i x_i`` accumulated in ascending ``i``."""
    w = np.zeros(d)
    for i in range(indptr.shape[0] - 1):
        a = alpha[i]
        if a != 0.0:
            for p in range(indptr[i], indptr[i + 1]):
                w[indices[p]] += a * values[p]
    return w


@njit(cache=True, nogil=True)
def row_dots(indptr, indices, values, w):
    """``X @ w`` for the folded rows."""
    n = indptr.shape[0] - 1
    out = np.empty(n)
    for i in range(n):
        s = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            s += w[indices[p]] * values[p]
        out[i] = s
    return out
