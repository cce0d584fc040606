import threading

import numpy as np

from asdcd import kernels
from asdcd._atomics import atomic_add_f64, fetch_add_i64, release, try_acquire
from numba import njit


def test_shuffle_is_a_permutation():
    arr = np.arange(100, dtype=np.int64)
    kernels.shuffle(arr, 100, np.uint64(kernels.stream_key(1, 0, 0)))
    assert sorted(arr.tolist()) == list(range(100))
    assert arr.tolist() != list(range(100))


def test_shuffle_touches_only_the_prefix():
    arr = np.arange(10, dtype=np.int64)
    kernels.shuffle(arr, 4, np.uint64(kernels.stream_key(3, 1, 2)))
    assert sorted(arr[:4].tolist()) == [0, 1, 2, 3]
    assert arr[4:].tolist() == list(range(4, 10))


def test_stream_keys_differ_by_thread_and_epoch():
    keys = {int(kernels.stream_key(7, t, e)) for t in range(8) for e in range(50)}
    assert len(keys) == 400
    assert kernels.stream_key(7, 2, 3) == kernels.stream_key(7, 2, 3)


def test_shuffle_is_roughly_uniform():
    counts = np.zeros((4, 4))
    for e in range(4000):
        arr = np.arange(4, dtype=np.int64)
        kernels.shuffle(arr, 4, np.uint64(kernels.stream_key(0, 0, e)))
        counts[np.arange(4), arr] += 1
    assert np.all(np.abs(counts - 1000) < 150)


@njit(nogil=True)
def _hammer(arr, counter, reps):
    for _ in range(reps):
        atomic_add_f64(arr, 0, 1.0)
        fetch_add_i64(counter, 0, 1)


@njit(nogil=True)
def _locked_increment(locks, cell, reps):
    for _ in range(reps):
        while not try_acquire(locks, 0):
            pass
        cell[0] += 1.0
        release(locks, 0)


def _run_threads(fn, n):
    threads = [threading.Thread(target=fn) for _ in range(n)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()


def test_atomic_adds_are_never_lost():
    arr = np.zeros(1)
    counter = np.zeros(1, dtype=np.int64)
    _run_threads(lambda: _hammer(arr, counter, 200_000), 4)
    assert arr[0] == 800_000.0 and counter[0] == 800_000


def test_spinlock_serializes_updates():
    locks = np.zeros(1, dtype=np.int64)
    cell = np.zeros(1)
    _run_threads(lambda: _locked_increment(locks, cell, 100_000), 4)
    assert cell[0] == 400_000.0 and locks[0] == 0


def test_barrier_releases_all_parties():
    bar = np.zeros(2, dtype=np.int64)
    rounds = 200
    hits = np.zeros(4, dtype=np.int64)

    @njit(nogil=True)
    def worker(tid, bar, hits):
        for _ in range(rounds):
            hits[tid] += 1
            kernels.barrier_wait(bar, 4)

    _run_threads_with_ids(lambda tid: worker(tid, bar, hits), 4)
    assert hits.tolist() == [rounds] * 4
    assert bar[1] == rounds and bar[0] == 0


def _run_threads_with_ids(fn, n):
    threads = [threading.Thread(target=fn, args=(t,)) for t in range(n)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()


def test_next_thresholds():
    assert kernels.next_thresholds(0.5, -0.25) == (0.5, -0.25)
    assert kernels.next_thresholds(-1.0, 1.0) == (np.inf, -np.inf)
