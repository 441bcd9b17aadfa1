"""Time the numba kernels against the pure-numpy fallback.

    python3 benchmarks/bench_kernels.py --accesses 200000 --repeat 3

Both kernel sets replay the same traces on fresh arrays; the script checks
that they return identical totals before printing timings.
"""
import argparse
import time

import numpy as np

from prefence_sim import _accel
from prefence_sim.rng import XorShift64Star


def make_trace(n, seed):
    """Half sequential walks on four pcs, half scattered loads."""
    rng = XorShift64Star(seed)
    pcs = np.empty(n, dtype=np.int64)
    vaddrs = np.empty(n, dtype=np.int64)
    cursors = [0x100000 * (k + 1) for k in range(4)]
    for i in range(n):
        if rng.bit():
            k = rng.below(4)
            pcs[i] = 0x400 + k
            vaddrs[i] = cursors[k]
            cursors[k] += 64 * (k + 1)
        else:
            pcs[i] = 0x800 + rng.below(32)
            vaddrs[i] = 0x4000000 + 64 * rng.below(1 << 16)
    enabled = np.array([rng.below(10) != 0 for _ in range(n)], dtype=np.bool_)
    return pcs, vaddrs, enabled


def run_replay(kernels, trace):
    pcs, vaddrs, enabled = trace
    tags, ages = _accel.new_cache_arrays(64, 8)
    table = _accel.new_stride_table(16)
    return kernels["replay_stride_trace"](pcs, vaddrs, enabled, tags, ages, table, 6, 2, 96, 340)


def run_touch(kernels, trace):
    _, vaddrs, _ = trace
    tags, ages = _accel.new_cache_arrays(64, 8)
    touch = kernels["lru_touch"]
    hits = 0
    for v in vaddrs:
        line = int(v) >> 6
        hits += bool(touch(tags, ages, line % 64, line))
    return hits


def best_of(fn, repeat):
    best = float("inf")
    result = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - t0)
    return best, result


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--accesses", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args(argv)
    if not _accel.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")

    trace = make_trace(args.accesses, args.seed)
    warm = tuple(a[:64] for a in trace)
    run_replay(_accel.NUMBA_KERNELS, warm)  # trigger compilation outside the timing
    run_touch(_accel.NUMBA_KERNELS, warm)

    print(f"{args.accesses} accesses, best of {args.repeat}")
    for name, fn in (("replay_stride_trace", run_replay), ("lru_touch loop", run_touch)):
        t_np, r_np = best_of(lambda: fn(_accel.NUMPY_KERNELS, trace), args.repeat)
        t_nb, r_nb = best_of(lambda: fn(_accel.NUMBA_KERNELS, trace), args.repeat)
        if int(r_np) != int(r_nb):
            raise SystemExit(f"{name}: numpy {r_np} != numba {r_nb}")
        print(f"{name:22s} numpy {t_np * 1e3:9.1f} ms   numba {t_nb * 1e3:9.1f} ms   "
              f"speed-up {t_np / t_nb:6.1f}x")


if __name__ == "__main__":
    main()
