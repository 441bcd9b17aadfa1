"""Exhaustive interleaving check of the enablement law.

A small machine (by default one physical core with two SMT siblings sharing
a prefetcher) runs ``n_tasks`` tasks, each of which may perform up to
``max_actions`` actions drawn from {set, clear, access, yield}.  Breadth-first
search explores every choice the scheduler could make: which queued task an
idle core dispatches, preemption by any queued task, migration of any live
task, and every task action.  After each transition an oracle that reads only
task records recomputes the law and compares it with the prefetcher bits.
"""
from collections import deque
from dataclasses import dataclass, field
from itertools import product

from .errors import SimError
from .scheduler import FINISHED, RUNNING, Scheduler
from .topology import build_topology

ACTIONS = ("set", "clear", "access", "yield")
ACCESS_PC = 0x700
ACCESS_BASE = 0x10000


@dataclass
class ModelCheckResult:
    states: int = 0
    transitions: int = 0
    violations: list = field(default_factory=list)  # (description, state key)

    @property
    def ok(self):
        return not self.violations


def oracle_violations(sched):
    """Problems in the scheduler state, judged from task records alone."""
    problems = []
    running = [t for t in sched.tasks.values() if t.state == RUNNING]
    for d in sched.domains:
        flagged = any(t.prefetch_disable and t.assigned_core in d.cores for t in running)
        if d.prefetcher.enabled == flagged:
            problems.append(f"domain {d.index} enabled={d.prefetcher.enabled} "
                            f"with flagged task running={flagged}")
    for core, cur in enumerate(sched.current):
        mine = [t for t in running if t.assigned_core == core]
        if len(mine) > 1 or (cur is None) != (not mine) or (cur is not None and cur is not mine[0]):
            problems.append(f"core {core} runs {cur and cur.tid} but records say "
                            f"{[t.tid for t in mine]}")
        want = cur is not None and cur.prefetch_disable
        if sched.mask[core] != want:
            problems.append(f"mask bit of core {core} is {sched.mask[core]}, expected {want}")
    return problems


def _key(sched):
    return sched.save_state()[:5]


def _moves(sched, max_actions, allow_migrate):
    """Enumerate (label, thunk) transitions from the current state."""
    moves = []
    n = len(sched.current)
    for core in range(n):
        cur = sched.current[core]
        for t in list(sched.queues[core]):
            verb = "dispatch" if cur is None else "preempt"
            moves.append((f"{verb} c{core} t{t.tid}",
                          lambda c=core, t=t: sched.context_switch(c, t)))
        if cur is None or cur.ip >= max_actions:
            continue
        for act in ACTIONS:
            if act == "yield":
                targets = list(sched.queues[core]) or [None]
                for t in targets:
                    moves.append((f"t{cur.tid} yield->{t and t.tid}",
                                  lambda c=core, cur=cur, t=t: _act(sched, c, cur, "yield", t,
                                                                    max_actions)))
            else:
                moves.append((f"t{cur.tid} {act}",
                              lambda c=core, cur=cur, a=act: _act(sched, c, cur, a, None,
                                                                  max_actions)))
    if allow_migrate:
        for t in sched.tasks.values():
            if t.state == FINISHED:
                continue
            for to in range(n):
                if to != t.assigned_core:
                    moves.append((f"migrate t{t.tid} c{to}",
                                  lambda t=t, to=to: sched.migrate(t, to)))
    return moves


def _act(sched, core, task, act, target, max_actions):
    task.ip += 1
    if act == "set":
        sched.prctl_set(task, True)
    elif act == "clear":
        sched.prctl_set(task, False)
    elif act == "access":
        pf = sched.domain_of(core).prefetcher
        before = None if pf.enabled else pf.snapshot()
        sched.load(core, task, ACCESS_PC + task.tid, ACCESS_BASE + 64 * (task.tid * 8 + task.ip))
        if before is not None and pf.snapshot() != before:
            raise SimError("disabled prefetcher changed state on an access")
    elif act == "yield" and target is not None:
        sched.context_switch(core, target)
    if task.ip >= max_actions and task.state == RUNNING:
        task.state = FINISHED
        sched.go_idle(core)


def check_interleavings(n_tasks=3, max_actions=4, physical_cores=1, smt_ways=2,
                        granularity="global", allow_migrate=True, scheduler_cls=Scheduler,
                        max_states=None):
    topo = build_topology(physical_cores, smt_ways, granularity)
    result = ModelCheckResult()
    seen = set()
    for placement in product(range(topo.logical_core_count), repeat=n_tasks):
        sched = scheduler_cls.build(topo, "ip_stride", check=False)
        for core in placement:
            sched.add_task([], core)
        frontier = deque([sched.save_state()])
        if _key(sched) in seen:
            continue
        seen.add(_key(sched))
        while frontier:
            state = frontier.popleft()
            result.states += 1
            sched.restore_state(state)
            for label, move in _moves(sched, max_actions, allow_migrate):
                sched.restore_state(state)
                result.transitions += 1
                try:
                    move()
                except SimError as exc:
                    result.violations.append((f"{label}: {exc}", _key(sched)))
                    continue
                for problem in oracle_violations(sched):
                    result.violations.append((f"{label}: {problem}", _key(sched)))
                k = _key(sched)
                if k not in seen:
                    seen.add(k)
                    frontier.append(sched.save_state())
            if max_states and result.states >= max_states:
                return result
    return result
