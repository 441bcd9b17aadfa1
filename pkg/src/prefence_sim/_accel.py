"""Hot kernels for the cache and IP-stride models.

Every kernel exists twice: a loop-style version compiled with numba's
``@njit`` and a vectorised pure-numpy version.  Both mutate the same array
layouts, so they are interchangeable.  The numba path is the default; set
``PREFENCE_SIM_NO_JIT=1`` (or run without numba installed) to select the
numpy path.

Array layouts
-------------
cache ``tags``/``ages``: int64 ``(sets, ways)``.  ``tags`` holds the line
address (``addr >> line_shift``) or -1 for an empty way; ``ages`` holds the
LRU age (0 = most recent) or -1 for an empty way.

stride ``table``: int64 ``(capacity, 7)``, columns given by the ``ST_*``
constants below.
"""
import os

import numpy as np

ST_VALID, ST_TAG, ST_LAST, ST_STRIDE, ST_CONF, ST_HAS_STRIDE, ST_STAMP = range(7)
ST_COLUMNS = 7
CONF_MAX = 3

NO_JIT = os.environ.get("PREFENCE_SIM_NO_JIT", "").strip().lower() not in ("", "0", "false", "no")

try:
    from numba import njit
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False


def new_cache_arrays(sets, ways):
    tags = np.full((sets, ways), -1, dtype=np.int64)
    ages = np.full((sets, ways), -1, dtype=np.int64)
    return tags, ages


def new_stride_table(capacity):
    return np.zeros((capacity, ST_COLUMNS), dtype=np.int64)


# ---------------------------------------------------------------------------
# pure-numpy path


def _lru_touch_np(tags, ages, s, line):
    row_t = tags[s]
    row_a = ages[s]
    valid = row_t >= 0
    found = np.flatnonzero(row_t == line)
    if found.size:
        w = found[0]
        row_a[valid & (row_a < row_a[w])] += 1
        row_a[w] = 0
        return True
    empty = np.flatnonzero(~valid)
    w = empty[0] if empty.size else int(np.argmax(row_a))
    row_a[valid] += 1
    row_t[w] = line
    row_a[w] = 0
    return False


def _lru_evict_np(tags, ages, s, line):
    row_t = tags[s]
    row_a = ages[s]
    found = np.flatnonzero(row_t == line)
    if not found.size:
        return False
    w = found[0]
    old = row_a[w]
    row_t[w] = -1
    row_a[w] = -1
    row_a[(row_t >= 0) & (row_a > old)] -= 1
    return True


def _stride_observe_np(table, tag, vaddr, threshold, line_shift):
    valid = table[:, ST_VALID] == 1
    stamp = int(table[:, ST_STAMP].max()) + 1
    found = np.flatnonzero(valid & (table[:, ST_TAG] == tag))
    if not found.size:
        free = np.flatnonzero(~valid)
        if free.size:
            i = free[0]
        else:
            i = int(np.argmin(table[:, ST_STAMP]))
        table[i] = (1, tag, vaddr, 0, 0, 0, stamp)
        return -1
    e = table[found[0]]
    delta = vaddr - e[ST_LAST]
    if e[ST_HAS_STRIDE] == 0:
        e[ST_STRIDE] = delta
        e[ST_HAS_STRIDE] = 1
        e[ST_CONF] = 1
    elif delta == e[ST_STRIDE]:
        e[ST_CONF] = min(e[ST_CONF] + 1, CONF_MAX)
    else:
        e[ST_STRIDE] = delta
        e[ST_CONF] = max(e[ST_CONF] - 1, 0)
    e[ST_LAST] = vaddr
    e[ST_STAMP] = stamp
    stride = int(e[ST_STRIDE])
    if e[ST_CONF] >= threshold and stride != 0:
        target = vaddr + stride
        if target >= 0 and (target >> line_shift) != (vaddr >> line_shift):
            return target
    return -1


def _replay_stride_trace_np(pcs, vaddrs, enabled, tags, ages, table,
                            line_shift, threshold, hit_latency, miss_latency):
    nsets = tags.shape[0]
    total = 0
    for i in range(len(vaddrs)):
        vaddr = int(vaddrs[i])
        line = vaddr >> line_shift
        if _lru_touch_np(tags, ages, line % nsets, line):
            total += hit_latency
        else:
            total += miss_latency
        if enabled[i]:
            target = _stride_observe_np(table, int(pcs[i]) & 0xFF, vaddr, threshold, line_shift)
            if target >= 0:
                tl = target >> line_shift
                _lru_touch_np(tags, ages, tl % nsets, tl)
    return total


# ---------------------------------------------------------------------------
# numba path (same semantics, written as plain loops)

if HAVE_NUMBA:

    @njit(cache=True)
    def _lru_touch_nb(tags, ages, s, line):
        ways = tags.shape[1]
        hit = -1
        for w in range(ways):
            if tags[s, w] == line:
                hit = w
                break
        if hit >= 0:
            old = ages[s, hit]
            for w in range(ways):
                if tags[s, w] >= 0 and ages[s, w] < old:
                    ages[s, w] += 1
            ages[s, hit] = 0
            return True
        slot = -1
        for w in range(ways):
            if tags[s, w] < 0:
                slot = w
                break
        if slot < 0:
            for w in range(ways):
                if ages[s, w] == ways - 1:
                    slot = w
                    break
        for w in range(ways):
            if tags[s, w] >= 0:
                ages[s, w] += 1
        tags[s, slot] = line
        ages[s, slot] = 0
        return False

    @njit(cache=True)
    def _lru_evict_nb(tags, ages, s, line):
        ways = tags.shape[1]
        hit = -1
        for w in range(ways):
            if tags[s, w] == line:
                hit = w
                break
        if hit < 0:
            return False
        old = ages[s, hit]
        tags[s, hit] = -1
        ages[s, hit] = -1
        for w in range(ways):
            if tags[s, w] >= 0 and ages[s, w] > old:
                ages[s, w] -= 1
        return True

    @njit(cache=True)
    def _stride_observe_nb(table, tag, vaddr, threshold, line_shift):
        cap = table.shape[0]
        idx = -1
        stamp = 0
        for i in range(cap):
            if table[i, ST_STAMP] > stamp:
                stamp = table[i, ST_STAMP]
            if idx < 0 and table[i, ST_VALID] == 1 and table[i, ST_TAG] == tag:
                idx = i
        stamp += 1
        if idx < 0:
            for i in range(cap):
                if table[i, ST_VALID] == 0:
                    idx = i
                    break
            if idx < 0:
                idx = 0
                for i in range(1, cap):
                    if table[i, ST_STAMP] < table[idx, ST_STAMP]:
                        idx = i
            table[idx, ST_VALID] = 1
            table[idx, ST_TAG] = tag
            table[idx, ST_LAST] = vaddr
            table[idx, ST_STRIDE] = 0
            table[idx, ST_CONF] = 0
            table[idx, ST_HAS_STRIDE] = 0
            table[idx, ST_STAMP] = stamp
            return -1
        delta = vaddr - table[idx, ST_LAST]
        if table[idx, ST_HAS_STRIDE] == 0:
            table[idx, ST_STRIDE] = delta
            table[idx, ST_HAS_STRIDE] = 1
            table[idx, ST_CONF] = 1
        elif delta == table[idx, ST_STRIDE]:
            if table[idx, ST_CONF] < CONF_MAX:
                table[idx, ST_CONF] += 1
        else:
            table[idx, ST_STRIDE] = delta
            if table[idx, ST_CONF] > 0:
                table[idx, ST_CONF] -= 1
        table[idx, ST_LAST] = vaddr
        table[idx, ST_STAMP] = stamp
        stride = table[idx, ST_STRIDE]
        if table[idx, ST_CONF] >= threshold and stride != 0:
            target = vaddr + stride
            if target >= 0 and (target >> line_shift) != (vaddr >> line_shift):
                return target
        return -1

    @njit(cache=True)
    def _replay_stride_trace_nb(pcs, vaddrs, enabled, tags, ages, table,
                                line_shift, threshold, hit_latency, miss_latency):
        nsets = tags.shape[0]
        total = 0
        for i in range(vaddrs.shape[0]):
            vaddr = vaddrs[i]
            line = vaddr >> line_shift
            if _lru_touch_nb(tags, ages, line % nsets, line):
                total += hit_latency
            else:
                total += miss_latency
            if enabled[i]:
                target = _stride_observe_nb(table, pcs[i] & 0xFF, vaddr, threshold, line_shift)
                if target >= 0:
                    tl = target >> line_shift
                    _lru_touch_nb(tags, ages, tl % nsets, tl)
        return total


NUMPY_KERNELS = {
    "lru_touch": _lru_touch_np,
    "lru_evict": _lru_evict_np,
    "stride_observe": _stride_observe_np,
    "replay_stride_trace": _replay_stride_trace_np,
}

if HAVE_NUMBA:
    NUMBA_KERNELS = {
        "lru_touch": _lru_touch_nb,
        "lru_evict": _lru_evict_nb,
        "stride_observe": _stride_observe_nb,
        "replay_stride_trace": _replay_stride_trace_nb,
    }
else:  # pragma: no cover
    NUMBA_KERNELS = {}

USING_NUMBA = HAVE_NUMBA and not NO_JIT
_active = NUMBA_KERNELS if USING_NUMBA else NUMPY_KERNELS

lru_touch = _active["lru_touch"]
lru_evict = _active["lru_evict"]
stride_observe = _active["stride_observe"]
replay_stride_trace = _active["replay_stride_trace"]
