"""Per-core round-robin scheduler with the prefetch-disable defense.

Each task carries a ``prefetch_disable`` flag.  The scheduler keeps one mask
bit per logical core, true while that core runs a flagged task, and after
every event re-derives each affected sharing domain's prefetcher state from
the enablement law: a domain's prefetcher is enabled iff no core in the
domain currently runs a flagged task.  Idle cores count as unflagged.

The whole machine is a single-threaded loop; SMT siblings are interleaved
tick by tick in core-id order.
"""
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from .cache import CacheState
from .errors import InvariantViolation, SchedulerError
from .prefetchers import MemoryAccess, make_prefetcher

RUNNABLE = "runnable"
RUNNING = "running"
FINISHED = "finished"

EVENT_KINDS = ("run", "switch", "prctl_set", "prctl_clear", "migrate", "spawn")


def _stages(stage):
    if stage is None:
        return ()
    if isinstance(stage, str):
        return (stage,)
    return tuple(stage)


# -- script actions ---------------------------------------------------------

@dataclass(frozen=True)
class Access:
    pc: int
    vaddr: int
    stage: object = None


@dataclass(frozen=True)
class Store:
    """Declare memory contents (one machine word).  No cache or prefetcher effect."""
    vaddr: int
    value: int
    stage: object = None


@dataclass(frozen=True)
class Flush:
    vaddr: int
    stage: object = None


@dataclass(frozen=True)
class Probe:
    """Timed reload of ``lines`` in order.

    Load ``i`` uses ``pcs[i]`` when given, else ``pc_base + i``.
    """
    lines: tuple
    pc_base: int = 0x9000
    pcs: tuple = ()
    label: str = ""
    record: bool = True
    stage: object = None


@dataclass(frozen=True)
class SetFlag:
    stage: object = None


@dataclass(frozen=True)
class ClearFlag:
    stage: object = None


@dataclass(frozen=True)
class Spawn:
    program: tuple
    name: Optional[str] = None
    stage: object = None


@dataclass(frozen=True)
class Yield:
    stage: object = None


@dataclass(frozen=True)
class End:
    stage: object = None


@dataclass(frozen=True)
class Nop:
    stage: object = None


@dataclass(eq=False)
class Task:
    tid: int
    program: list
    name: str = ""
    role: str = ""
    prefetch_disable: bool = False
    privileged: bool = False
    state: str = RUNNABLE
    assigned_core: Optional[int] = None
    ip: int = 0
    parent: Optional[int] = None
    cycles: int = 0
    observations: list = field(default_factory=list)

    @property
    def done(self):
        return self.ip >= len(self.program)


class Domain:
    def __init__(self, index, cores, cache, prefetcher):
        self.index = index
        self.cores = tuple(cores)
        self.cache = cache
        self.prefetcher = prefetcher
        self.disabled_ticks = 0

    @property
    def enabled(self):
        return self.prefetcher.enabled


class Scheduler:
    def __init__(self, topology, caches, prefetchers, quantum=100, check=True,
                 record_accesses=False):
        if quantum < 1:
            raise SchedulerError("quantum must be >= 1")
        if not (len(caches) == len(prefetchers) == topology.domain_count):
            raise SchedulerError("need one cache and one prefetcher per sharing domain")
        self.topology = topology
        self.quantum = quantum
        self.check = check
        self.domains = [
            Domain(i, cores, caches[i], prefetchers[i])
            for i, cores in enumerate(topology.sharing_domains)
        ]
        n = topology.logical_core_count
        self._domain_of = [topology.sharing_domain_of(c) for c in range(n)]
        self.current = [None] * n
        self.queues = [deque() for _ in range(n)]
        self.mask = [False] * n
        self.ran = [0] * n
        self.tasks = {}
        self.tick = 0
        self.switch_counter = 0
        self.toggle_counter = 0
        self.prctl_counter = 0
        self.prefetch_requests = 0
        self.training_mutations = 0
        self.watched = set()
        self.memory = {}
        self.events = []
        self.stage_trace = []
        self.record_accesses = record_accesses
        self.access_log = []
        self._next_tid = 1
        for d in self.domains:
            d.prefetcher.set_enabled(True)

    @classmethod
    def build(cls, topology, family="ip_stride", cache_kwargs=None, prefetcher_kwargs=None,
              quantum=100, **kwargs):
        cache_kwargs = dict(cache_kwargs or {})
        prefetcher_kwargs = dict(prefetcher_kwargs or {})
        prefetcher_kwargs.setdefault("line_size", cache_kwargs.get("line_size", 64))
        caches = [CacheState(**cache_kwargs) for _ in range(topology.domain_count)]
        prefetchers = [make_prefetcher(family, **prefetcher_kwargs)
                       for _ in range(topology.domain_count)]
        return cls(topology, caches, prefetchers, quantum=quantum, **kwargs)

    # -- bookkeeping ----------------------------------------------------------

    def domain_of(self, core):
        return self.domains[self._domain_of[core]]

    def _log(self, core, event, tid):
        d = self._domain_of[core]
        self.events.append((self.tick, core, event, tid, d, self.domains[d].prefetcher.enabled))

    def enablement_law(self, domain):
        return not any(self.mask[c] for c in self.domains[domain].cores)

    def _refresh(self, domains, core):
        """Apply the enablement law to ``domains`` after an event on ``core``."""
        for d in sorted(domains):
            want = self.enablement_law(d)
            pf = self.domains[d].prefetcher
            if pf.enabled != want:
                pf.set_enabled(want)
                self.toggle_counter += 1
        if self.check:
            self.check_invariants()

    def check_invariants(self):
        seen = set()
        for c, t in enumerate(self.current):
            expect = t is not None and t.prefetch_disable
            if self.mask[c] != expect:
                raise InvariantViolation(f"mask bit of core {c} is {self.mask[c]}, expected {expect}")
            if t is not None:
                if t.tid in seen or t.state != RUNNING or t.assigned_core != c:
                    raise InvariantViolation(f"task {t.tid} inconsistently scheduled on core {c}")
                seen.add(t.tid)
        for d in self.domains:
            flagged = any(self.current[c] is not None and self.current[c].prefetch_disable
                          for c in d.cores)
            if d.prefetcher.enabled == flagged:
                raise InvariantViolation(
                    f"domain {d.index}: prefetcher enabled={d.prefetcher.enabled} "
                    f"while flagged task scheduled={flagged}")

    def _place(self, core, task):
        self.current[core] = task
        self.ran[core] = 0
        if task is None:
            self.mask[core] = False
        else:
            task.state = RUNNING
            task.assigned_core = core
            self.mask[core] = task.prefetch_disable

    def _dequeue(self, task):
        for q in self.queues:
            if task in q:
                q.remove(task)
                return

    # -- task management ------------------------------------------------------

    def add_task(self, program, core=0, name=None, role="", prefetch_disable=False,
                 privileged=False, parent=None):
        self.topology._check(core)
        tid = self._next_tid
        self._next_tid += 1
        task = Task(tid, list(program), name or f"t{tid}", role, bool(prefetch_disable),
                    privileged, RUNNABLE, core, parent=parent)
        self.tasks[tid] = task
        self.queues[core].append(task)
        return task

    def spawn(self, parent, program, name=None):
        if parent.state != RUNNING:
            raise SchedulerError(f"spawn from task {parent.tid}, which is not running")
        child = self.add_task(program, parent.assigned_core, name, parent.role,
                              parent.prefetch_disable, parent.privileged, parent.tid)
        self._log(parent.assigned_core, "spawn", child.tid)
        return child

    def prctl_set(self, task, on):
        if task.state != RUNNING:
            raise SchedulerError(f"prctl from task {task.tid}, which is not running")
        core = task.assigned_core
        task.prefetch_disable = bool(on)
        self.mask[core] = task.prefetch_disable
        self.prctl_counter += 1
        self._refresh({self._domain_of[core]}, core)
        self._log(core, "prctl_set" if on else "prctl_clear", task.tid)

    @staticmethod
    def prctl_query(task):
        return task.prefetch_disable

    def context_switch(self, core, next_task):
        if next_task.state != RUNNABLE:
            raise SchedulerError(f"task {next_task.tid} is not runnable")
        self._dequeue(next_task)
        prev = self.current[core]
        if prev is not None and prev.state == RUNNING:
            prev.state = RUNNABLE
            self.queues[core].append(prev)
        self._place(core, next_task)
        self.switch_counter += 1
        self._refresh({self._domain_of[core]}, core)
        self._log(core, "switch", next_task.tid)

    def go_idle(self, core):
        """Deschedule whatever runs on ``core`` and leave it idle."""
        prev = self.current[core]
        if prev is not None and prev.state == RUNNING:
            prev.state = RUNNABLE
            self.queues[core].append(prev)
        self._place(core, None)
        self._refresh({self._domain_of[core]}, core)
        self._log(core, "switch", -1)

    def finish(self, core):
        task = self.current[core]
        if task is None:
            return
        task.state = FINISHED
        self._dispatch_next(core)

    def _dispatch_next(self, core):
        if self.queues[core]:
            self.context_switch(core, self.queues[core][0])
        else:
            self.go_idle(core)

    def migrate(self, task, to_core):
        self.topology._check(to_core)
        if task.state == FINISHED:
            raise SchedulerError(f"cannot migrate finished task {task.tid}")
        src = task.assigned_core
        if src == to_core:
            return
        if task.state == RUNNING:
            self.current[src] = None
            if self.queues[src]:
                nxt = self.queues[src].popleft()
                self._place(src, nxt)
                self.switch_counter += 1
            else:
                self._place(src, None)
        else:
            self._dequeue(task)
        task.state = RUNNABLE
        task.assigned_core = to_core
        if self.current[to_core] is None:
            self._place(to_core, task)
            self.switch_counter += 1
        else:
            self.queues[to_core].append(task)
        self._refresh({self._domain_of[src], self._domain_of[to_core]}, to_core)
        if self._domain_of[src] != self._domain_of[to_core]:
            self._log(src, "migrate_out", task.tid)
        self._log(to_core, "migrate", task.tid)

    # -- execution ------------------------------------------------------------

    def load(self, core, task, pc, vaddr, stage=None):
        dom = self.domain_of(core)
        cache = dom.cache
        latency = cache.access(vaddr)
        pf = dom.prefetcher
        watch = task.tid in self.watched and "S3" in _stages(stage)
        before = pf.snapshot() if watch else None
        contents = None
        if pf.family == "dmp":
            base = cache.line_base(vaddr)
            contents = [self.memory.get(base + off, 0) for off in range(0, cache.line_size, 8)]
        requests = pf.observe(MemoryAccess(pc, vaddr, core=core, task=task.tid), contents)
        for r in requests:
            cache.install(r.target)
        if watch and pf.snapshot() != before:
            self.training_mutations += 1
        self.prefetch_requests += len(requests)
        task.cycles += latency
        if self.record_accesses:
            self.access_log.append((self.tick, core, task.tid, pc, vaddr, len(requests)))
        return latency

    def execute(self, core, action):
        """Run one action in the context of the task on ``core``.

        Returns "yield", "end" or "ok".
        """
        task = self.current[core]
        if task is None:
            raise SchedulerError(f"core {core} is idle")
        for label in _stages(action.stage):
            entry = (label, task.role)
            if not self.stage_trace or self.stage_trace[-1] != entry:
                self.stage_trace.append(entry)
        kind = type(action)
        if kind is Access:
            self.load(core, task, action.pc, action.vaddr, action.stage)
            self._log(core, "run", task.tid)
        elif kind is Probe:
            cache = self.domain_of(core).cache
            pcs = action.pcs or [action.pc_base + i for i in range(len(action.lines))]
            lat = [self.load(core, task, pc, a, action.stage)
                   for pc, a in zip(pcs, action.lines)]
            if action.record:
                states = ["hit" if x == cache.latency_hit else "miss" for x in lat]
                task.observations.append((action.label, list(action.lines), lat, states))
            self._log(core, "run", task.tid)
        elif kind is Flush:
            self.domain_of(core).cache.flush(action.vaddr)
            self._log(core, "run", task.tid)
        elif kind is Store:
            self.memory[action.vaddr - action.vaddr % 8] = action.value
            self._log(core, "run", task.tid)
        elif kind is SetFlag:
            self.prctl_set(task, True)
        elif kind is ClearFlag:
            self.prctl_set(task, False)
        elif kind is Spawn:
            self.spawn(task, action.program, action.name)
        elif kind is Yield:
            return "yield"
        elif kind is End:
            return "end"
        elif kind is Nop:
            self._log(core, "run", task.tid)
        else:
            raise SchedulerError(f"unknown action {action!r}")
        return "ok"

    def step(self):
        for core in range(len(self.current)):
            if self.current[core] is None:
                if not self.queues[core]:
                    continue
                self.context_switch(core, self.queues[core][0])
            task = self.current[core]
            action = task.program[task.ip]
            task.ip += 1
            outcome = self.execute(core, action)
            self.ran[core] += 1
            if outcome == "end" or task.done:
                self.finish(core)
            elif outcome == "yield":
                if self.queues[core]:
                    self.context_switch(core, self.queues[core][0])
                else:
                    self.ran[core] = 0
            elif self.ran[core] >= self.quantum and self.queues[core]:
                self.context_switch(core, self.queues[core][0])
        for d in self.domains:
            if not d.prefetcher.enabled:
                d.disabled_ticks += 1
        self.tick += 1

    def busy(self):
        return any(t is not None for t in self.current) or any(self.queues)

    def run(self, max_ticks=10_000_000):
        start = self.tick
        while self.busy():
            if self.tick - start >= max_ticks:
                raise SchedulerError(f"simulation did not finish within {max_ticks} ticks")
            self.step()
        return self.tick - start

    def summary(self):
        return {
            "switch_counter": self.switch_counter,
            "toggle_counter": self.toggle_counter,
            "prctl_counter": self.prctl_counter,
            "ticks": self.tick,
            "disabled_ticks": {str(d.index): d.disabled_ticks for d in self.domains},
        }

    # -- state save/restore (scheduling state only) ---------------------------

    def save_state(self):
        tasks = tuple((t.tid, t.prefetch_disable, t.state, t.assigned_core, t.ip)
                      for t in self.tasks.values())
        return (
            tasks,
            tuple(t.tid if t is not None else 0 for t in self.current),
            tuple(tuple(t.tid for t in q) for q in self.queues),
            tuple(self.mask),
            tuple(d.prefetcher.enabled for d in self.domains),
            (self.switch_counter, self.toggle_counter, self.prctl_counter),
        )

    def restore_state(self, saved):
        tasks, current, queues, mask, enabled, counters = saved
        for tid, flag, state, core, ip in tasks:
            t = self.tasks[tid]
            t.prefetch_disable, t.state, t.assigned_core, t.ip = flag, state, core, ip
        self.current = [self.tasks[tid] if tid else None for tid in current]
        self.queues = [deque(self.tasks[tid] for tid in q) for q in queues]
        self.mask = list(mask)
        for d, on in zip(self.domains, enabled):
            d.prefetcher.enabled = on
        self.switch_counter, self.toggle_counter, self.prctl_counter = counters


def enablement_law(sched, domain):
    return sched.enablement_law(domain)


def context_switch(sched, core, next_task):
    sched.context_switch(core, next_task)


def migrate(sched, task, to_core):
    sched.migrate(task, to_core)


def step(sched):
    sched.step()
