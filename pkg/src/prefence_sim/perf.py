"""Analytic cycle model for the cost of scoping the prefetch-disable flag.

Total cycles = sum of load latencies under the cache + stride model,
plus a fixed cost per flag syscall and per prefetcher toggle.  The two
costs are the medians measured on the Intel test machine: about 430 time
units per set/clear syscall, and 4158 - 3842 = 316 extra units for a
context switch that has to flip the prefetcher state.

Modes:
  enabled      prefetcher on throughout, no syscalls
  disabled     prefetcher off for the whole run (stock kernel, MSR cleared)
  flag_scoped  the workload's critical section is wrapped in set/clear
"""
from dataclasses import dataclass

import numpy as np

from . import _accel
from .config import MachineConfig
from .errors import ConfigError
from .rng import XorShift64Star
from .scheduler import Access, ClearFlag, Scheduler, SetFlag

WORKLOADS = ("streaming", "pointer_chase", "mixed_crypto_app")
MODES = ("enabled", "disabled", "flag_scoped")

STREAM_PC = 0x400
STREAM_BASE = 0x1000000
CHASE_PC = 0x480
CHASE_BASE = 0x2000000
CRYPTO_PC = 0x510
CRYPTO_BASE = 0x4000000
APP_PC = 0x620
APP_BASE = 0x8000000


@dataclass(frozen=True)
class PerfCosts:
    syscall: int = 430
    toggle: int = 316


@dataclass(frozen=True)
class PerfRun:
    workload: str
    mode: str
    cycles: int
    access_cycles: int
    accesses: int
    critical_accesses: int
    prctl_calls: int
    toggles: int


@dataclass(frozen=True)
class PerfModelResult:
    workload: str
    cycles_enabled: int
    cycles_disabled: int
    cycles_flag_scoped: int
    critical_fraction: float

    @property
    def scoped_overhead(self):
        """Fraction of the enabled/disabled gap that flag scoping gives back."""
        gap = self.cycles_disabled - self.cycles_enabled
        if gap == 0:
            return 0.0
        return (self.cycles_flag_scoped - self.cycles_enabled) / gap


def workload_trace(workload, seed=0, line_size=64, streaming_lines=10_000, chase_nodes=4096,
                   requests=10, crypto_accesses=100, app_accesses=900):
    """List of (pc, vaddr, critical) for one workload."""
    if workload == "streaming":
        return [(STREAM_PC, STREAM_BASE + i * line_size, False) for i in range(streaming_lines)]
    if workload == "pointer_chase":
        from .attacks.scenarios import irregular_permutation
        order = irregular_permutation(XorShift64Star(seed), chase_nodes)
        return [(CHASE_PC, CHASE_BASE + i * line_size, False) for i in order]
    if workload == "mixed_crypto_app":
        trace = []
        for r in range(requests):
            c0 = CRYPTO_BASE + r * crypto_accesses * line_size
            a0 = APP_BASE + r * app_accesses * line_size
            trace += [(CRYPTO_PC, c0 + i * line_size, True) for i in range(crypto_accesses)]
            trace += [(APP_PC, a0 + i * line_size, False) for i in range(app_accesses)]
        return trace
    raise ConfigError(f"unknown workload {workload!r}; known: {', '.join(WORKLOADS)}")


def _program(trace, scoped):
    prog = []
    inside = False
    for pc, vaddr, critical in trace:
        if scoped and critical != inside:
            prog.append(SetFlag() if critical else ClearFlag())
            inside = critical
        prog.append(Access(pc, vaddr))
    if inside:
        prog.append(ClearFlag())
    return prog


class _StockKernel(Scheduler):
    """No defense in the kernel: the prefetcher keeps whatever state the MSR set."""

    def _refresh(self, domains, core):
        pass


def run_perf_model(workload, mode, machine=None, costs=PerfCosts(), seed=0, **sizes):
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}; known: {', '.join(MODES)}")
    machine = machine or MachineConfig()
    if machine.family not in (None, "ip_stride"):
        raise ConfigError("the perf model uses the ip_stride prefetcher")
    trace = workload_trace(workload, seed, machine.line_size, **sizes)
    topo = machine.topology(1, 1)
    cls = _StockKernel if mode == "disabled" else Scheduler
    sched = cls.build(topo, "ip_stride", machine.cache_kwargs(),
                      machine.prefetcher_kwargs(), quantum=max(machine.quantum, len(trace) * 2))
    if mode == "disabled":
        for d in sched.domains:
            d.prefetcher.set_enabled(False)
    task = sched.add_task(_program(trace, mode == "flag_scoped"), 0, workload)
    sched.run()
    critical = sum(1 for *_, c in trace if c)
    total = (task.cycles + sched.prctl_counter * costs.syscall
             + sched.toggle_counter * costs.toggle)
    return PerfRun(workload, mode, total, task.cycles, len(trace), critical,
                   sched.prctl_counter, sched.toggle_counter)


def replay_access_cycles(workload, mode, machine=None, seed=0, kernels=None, **sizes):
    """Load-latency total of a workload via the batch trace kernel.

    Independent of the scheduler: enablement per access is derived directly
    from the mode and the critical-section markers.
    """
    machine = machine or MachineConfig()
    kernels = kernels or {"replay_stride_trace": _accel.replay_stride_trace}
    trace = workload_trace(workload, seed, machine.line_size, **sizes)
    pcs = np.array([t[0] for t in trace], dtype=np.int64)
    vaddrs = np.array([t[1] for t in trace], dtype=np.int64)
    if mode == "enabled":
        enabled = np.ones(len(trace), dtype=np.bool_)
    elif mode == "disabled":
        enabled = np.zeros(len(trace), dtype=np.bool_)
    else:
        enabled = np.array([not t[2] for t in trace], dtype=np.bool_)
    tags, ages = _accel.new_cache_arrays(machine.sets, machine.ways)
    table = _accel.new_stride_table(machine.stride_capacity)
    shift = machine.line_size.bit_length() - 1
    return int(kernels["replay_stride_trace"](pcs, vaddrs, enabled, tags, ages, table, shift,
                                              machine.confidence_threshold,
                                              machine.latency_hit, machine.latency_miss))


def perf_model(workload, machine=None, costs=PerfCosts(), seed=0, **sizes):
    runs = {m: run_perf_model(workload, m, machine, costs, seed, **sizes) for m in MODES}
    e = runs["enabled"]
    frac = e.critical_accesses / e.accesses if e.accesses else 0.0
    return PerfModelResult(workload, runs["enabled"].cycles, runs["disabled"].cycles,
                           runs["flag_scoped"].cycles, frac)


def streaming_closed_form(n, machine=None):
    """(enabled, disabled) cycles for a sequential walk of ``n`` lines:
    the first threshold + 1 loads miss, every later one hits a prefetched line."""
    machine = machine or MachineConfig()
    warmup = min(n, machine.confidence_threshold + 1)
    enabled = warmup * machine.latency_miss + (n - warmup) * machine.latency_hit
    return enabled, n * machine.latency_miss
