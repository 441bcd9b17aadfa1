"""The numba and numpy kernel sets must be interchangeable."""
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from prefence_sim import _accel

pytestmark = pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="numba not installed")

accesses = st.lists(st.tuples(st.integers(0, 600), st.integers(0, 1 << 16), st.booleans()),
                    min_size=1, max_size=300)


def _arrays(seq):
    pcs = np.array([p for p, _, _ in seq], dtype=np.int64)
    vaddrs = np.array([v * 8 for _, v, _ in seq], dtype=np.int64)
    enabled = np.array([e for _, _, e in seq], dtype=np.bool_)
    return pcs, vaddrs, enabled


@settings(max_examples=150, deadline=None)
@given(accesses, st.integers(1, 4), st.integers(1, 3))
def test_replay_kernels_agree(seq, capacity, threshold):
    pcs, vaddrs, enabled = _arrays(seq)
    results = []
    for kernels in (_accel.NUMPY_KERNELS, _accel.NUMBA_KERNELS):
        tags, ages = _accel.new_cache_arrays(4, 2)
        table = _accel.new_stride_table(capacity)
        total = kernels["replay_stride_trace"](pcs, vaddrs, enabled, tags, ages, table,
                                               6, threshold, 96, 340)
        results.append((int(total), tags.tobytes(), ages.tobytes(), table.tobytes()))
    assert results[0] == results[1]


@settings(max_examples=150, deadline=None)
@given(accesses)
def test_stride_and_lru_kernels_agree_step_by_step(seq):
    pcs, vaddrs, _ = _arrays(seq)
    state = {}
    for name, kernels in (("np", _accel.NUMPY_KERNELS), ("nb", _accel.NUMBA_KERNELS)):
        tags, ages = _accel.new_cache_arrays(4, 2)
        table = _accel.new_stride_table(3)
        out = []
        for i, (pc, v) in enumerate(zip(pcs, vaddrs)):
            line = int(v) >> 6
            if i % 7 == 3:
                out.append(bool(kernels["lru_evict"](tags, ages, line % 4, line)))
            else:
                out.append(bool(kernels["lru_touch"](tags, ages, line % 4, line)))
            out.append(int(kernels["stride_observe"](table, int(pc) & 0xFF, int(v), 2, 6)))
        state[name] = (out, tags.tobytes(), ages.tobytes(), table.tobytes())
    assert state["np"] == state["nb"]


def test_env_flag_selects_numpy(monkeypatch):
    import importlib
    monkeypatch.setenv("PREFENCE_SIM_NO_JIT", "1")
    mod = importlib.reload(_accel)
    try:
        assert not mod.USING_NUMBA
        assert mod.replay_stride_trace is mod.NUMPY_KERNELS["replay_stride_trace"]
    finally:
        monkeypatch.delenv("PREFENCE_SIM_NO_JIT")
        importlib.reload(_accel)


def test_benchmark_script_runs(capsys):
    import pathlib
    import runpy
    path = pathlib.Path(__file__).resolve().parent.parent / "benchmarks" / "bench_kernels.py"
    bench = runpy.run_path(str(path))
    bench["main"](["--accesses", "500", "--repeat", "1"])
    out = capsys.readouterr().out
    assert "replay_stride_trace" in out and "speed-up" in out
