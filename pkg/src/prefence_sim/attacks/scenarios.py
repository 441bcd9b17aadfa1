"""Executable prefetching side channels.

Every scenario builds attacker and victim scripts for all trials up front
(secrets drawn from the seeded generator), runs them on the scheduler and
scores the attacker's guesses.  ``defended=True`` makes the victim wrap its
secret-dependent section in set/clear of its prefetch-disable flag.
"""
from ..cache import RandomFlushNoise, build_eviction_set
from ..config import MachineConfig
from ..errors import ConfigError
from ..rng import XorShift64Star
from ..scheduler import (Access, ClearFlag, Flush, Nop, Probe, Scheduler, SetFlag, Store,
                         Yield)
from .catalog import S1, S2, S3, S4, S5
from .leakage import LeakageReport

# Shin et al.: lookup table in shared memory, probe line right after it.
SHIN_TABLE = 0x40000
SHIN_TABLE_LINES = 16
SHIN_VICTIM_PC = 0x4A0
SHIN_PROBE_PC = 0x7F3

# AfterImage variant 1: attacker load aligned to the victim's branch-guarded load.
AI_ATTACKER_PC = 0x1123
AI_ATTACKER_PC_NO_COLLISION = 0x1124
AI_VICTIM_TAKEN_PC = 0x4523
AI_VICTIM_NOT_TAKEN_PC = 0x4560
AI_PRIME_REGION = 0x200000
AI_VICTIM_TAKEN_ADDR = 0x300800
AI_VICTIM_NOT_TAKEN_ADDR = 0x300C00
AI_EVSET_PC = 0x2200

# FetchBench-style SMS: victim footprint encodes a nibble.
SMS_VICTIM_REGION = 0x600000
SMS_ATTACKER_REGION = 0x700000
SMS_VICTIM_PC = 0x5500
SMS_ATTACKER_PC = 0x3300
SMS_PROBE_PC = 0x3400

# GoFetch-style DMP: an intermediate value is a pointer iff the secret bit is set.
DMP_VICTIM_LINE = 0x500000
DMP_POINTER = 0x180040
DMP_BLIND_MASK = 0xFFFF_0000_0000_0000
DMP_VICTIM_PC = 0x6A0
DMP_EVSET_PC = 0x2600


def _check_family(machine, family, scenario):
    if machine.family is not None and machine.family != family:
        raise ConfigError(
            f"scenario {scenario!r} needs the {family} prefetcher, config selects {machine.family}")


def _build(machine, family, seed, default_cores=1, default_ways=1, scheduler_cls=Scheduler):
    topo = machine.topology(default_cores, default_ways)
    sched = scheduler_cls.build(topo, family, machine.cache_kwargs(),
                                machine.prefetcher_kwargs(), machine.quantum)
    if machine.noise_flush_probability:
        noise_rng = XorShift64Star(seed ^ 0x5EED_0F_7015E)
        for d in sched.domains:
            d.cache.noise = RandomFlushNoise(noise_rng.fork(), machine.noise_flush_probability)
    return sched


def irregular_permutation(rng, n):
    """Random permutation of ``range(n)`` with no two equal consecutive deltas,
    so a stride prefetcher never gains confidence from it."""
    while True:
        p = rng.permutation(n)
        d = [b - a for a, b in zip(p, p[1:])]
        if all(x != y for x, y in zip(d, d[1:])):
            return p


def _wrap(section, defended):
    if defended:
        return [SetFlag()] + section + [ClearFlag()]
    return section


def _report(name, defended, trials, correct, chance, seed, samples, rows, sched):
    return LeakageReport(
        scenario=name, defended=defended, trials=trials, correct=correct,
        chance_level=chance, seed=seed, latency_samples=samples, probe_rows=rows,
        stage_trace=list(sched.stage_trace),
        victim_training_mutations=sched.training_mutations,
        scheduler=sched.summary(), events=sched.events, access_log=sched.access_log)


def _binary_outcome(observations, secrets, guess_from, class_prefix="bit"):
    correct = 0
    samples = {f"{class_prefix}0": [], f"{class_prefix}1": []}
    rows = []
    for t, ((_, lines, lat, states), secret) in enumerate(zip(observations, secrets)):
        guess = guess_from(states)
        correct += guess == secret
        samples[f"{class_prefix}{secret}"].append(max(lat))
        rows.extend((t, i, x, s) for i, (x, s) in enumerate(zip(lat, states)))
    return correct, samples, rows


def shin_victim_walk(bit, rng, line_size=64):
    order = list(range(SHIN_TABLE_LINES)) if bit else irregular_permutation(rng, SHIN_TABLE_LINES)
    walk = [Access(SHIN_VICTIM_PC, SHIN_TABLE + i * line_size, S3) for i in order]
    walk[-1] = Access(SHIN_VICTIM_PC, walk[-1].vaddr, (S3, S4))
    return walk


def run_shin(defended=False, trials=1000, seed=0, machine=None, record_accesses=False):
    """Stride walk over a lookup table (secret bit 1) versus an irregular
    permutation of the same lines (bit 0); the attacker flushes and reloads
    the line after the table."""
    machine = machine or MachineConfig()
    _check_family(machine, "ip_stride", "shin")
    sched = _build(machine, "ip_stride", seed)
    sched.record_accesses = record_accesses
    rng = XorShift64Star(seed)
    line = machine.line_size
    probe_addr = SHIN_TABLE + SHIN_TABLE_LINES * line
    secrets = []
    victim, attacker = [], [Nop(S1)]
    for t in range(trials):
        bit = rng.bit()
        secrets.append(bit)
        victim += _wrap(shin_victim_walk(bit, rng, line), defended) + [Yield()]
        attacker += [Flush(probe_addr, S2), Yield(),
                     Probe((probe_addr,), pcs=(SHIN_PROBE_PC,), label=f"trial{t}", stage=S5)]
    a = sched.add_task(attacker, 0, "attacker", role="attacker")
    v = sched.add_task(victim, 0, "victim", role="victim")
    sched.watched.add(v.tid)
    sched.run()
    correct, samples, rows = _binary_outcome(a.observations, secrets,
                                             lambda states: int(states[0] == "hit"))
    return _report("shin", defended, trials, correct, 0.5, seed, samples, rows, sched)


def run_afterimage_v1(defended=False, trials=1000, seed=0, machine=None, collide=True,
                      record_accesses=False):
    """Attacker primes the stride entry its load shares with the victim's
    branch-guarded load.  A taken branch mistrains the entry, so the
    attacker's trigger no longer prefetches into its Prime+Probe set."""
    machine = machine or MachineConfig()
    _check_family(machine, "ip_stride", "afterimage_v1")
    sched = _build(machine, "ip_stride", seed)
    sched.record_accesses = record_accesses
    cache = sched.domain_of(0).cache
    rng = XorShift64Star(seed)
    line = machine.line_size
    pc = AI_ATTACKER_PC if collide else AI_ATTACKER_PC_NO_COLLISION
    target = AI_PRIME_REGION + 4 * line
    evset = build_eviction_set(cache, target)
    ev_pcs = tuple(AI_EVSET_PC + i for i in range(len(evset)))
    secrets = []
    victim, attacker = [], [Nop(S1)]
    for t in range(trials):
        bit = rng.bit()
        secrets.append(bit)
        if bit:
            branch = [Access(AI_VICTIM_TAKEN_PC, AI_VICTIM_TAKEN_ADDR, S3)]
        else:
            branch = [Access(AI_VICTIM_NOT_TAKEN_PC, AI_VICTIM_NOT_TAKEN_ADDR, S3)]
        victim += _wrap(branch, defended) + [Yield()]
        attacker += [
            Probe(tuple(evset), pcs=ev_pcs, record=False, stage=S2),
            Access(pc, AI_PRIME_REGION, S3),
            Access(pc, AI_PRIME_REGION + line, S3),
            Access(pc, AI_PRIME_REGION + 2 * line, S3),
            Yield(),
            Access(pc, AI_PRIME_REGION + 3 * line, S4),
            Probe(tuple(reversed(evset)), pcs=tuple(reversed(ev_pcs)), label=f"trial{t}",
                  stage=S5),
        ]
    a = sched.add_task(attacker, 0, "attacker", role="attacker")
    v = sched.add_task(victim, 0, "victim", role="victim")
    sched.watched.add(v.tid)
    sched.run()
    # an evicted set member means the trigger prefetched: entry intact, branch not taken
    correct, samples, rows = _binary_outcome(a.observations, secrets,
                                             lambda states: int("miss" not in states))
    name = "afterimage_v1" if collide else "afterimage_v1_no_collision"
    return _report(name, defended, trials, correct, 0.5, seed, samples, rows, sched)


def run_sms(defended=False, trials=1000, seed=0, machine=None, trigger_offset=0,
            record_accesses=False):
    """The victim touches lines 1..4 of its region according to a secret
    nibble; the attacker's trigger access replays the footprint into its
    own region and a reload of lines 1..4 recovers the nibble."""
    machine = machine or MachineConfig()
    _check_family(machine, "sms", "sms")
    sched = _build(machine, "sms", seed)
    sched.record_accesses = record_accesses
    rng = XorShift64Star(seed)
    line = machine.line_size
    probe_lines = tuple(SMS_ATTACKER_REGION + (1 + i) * line for i in range(4))
    if trigger_offset * line >= machine.sms_region_size:
        raise ConfigError("trigger offset outside the SMS region")
    secrets = []
    victim, attacker = [], [Nop(S1)]
    for t in range(trials):
        nibble = rng.below(16)
        secrets.append(nibble)
        section = [Access(SMS_VICTIM_PC, SMS_VICTIM_REGION, S3)]
        section += [Access(SMS_VICTIM_PC + 1 + i, SMS_VICTIM_REGION + (1 + i) * line, S3)
                    for i in range(4) if nibble >> i & 1]
        victim += _wrap(section, defended) + [Yield()]
        attacker += [Flush(a, S2) for a in probe_lines]
        attacker += [
            Yield(),
            Access(SMS_ATTACKER_PC, SMS_ATTACKER_REGION + trigger_offset * line, S4),
            Probe(probe_lines, pc_base=SMS_PROBE_PC, label=f"trial{t}", stage=S5),
        ]
    a = sched.add_task(attacker, 0, "attacker", role="attacker")
    v = sched.add_task(victim, 0, "victim", role="victim")
    sched.watched.add(v.tid)
    sched.run()
    correct = 0
    samples = {}
    rows = []
    for t, ((_, lines, lat, states), secret) in enumerate(zip(a.observations, secrets)):
        guess = sum(1 << i for i, s in enumerate(states) if s == "hit")
        correct += guess == secret
        samples.setdefault(f"nibble{secret:x}", []).extend(lat)
        rows.extend((t, i, x, s) for i, (x, s) in enumerate(zip(lat, states)))
    name = "sms" if trigger_offset == 0 else f"sms_trigger{trigger_offset}"
    return _report(name, defended, trials, correct, 1 / 16, seed, samples, rows, sched)


def dmp_victim_section(bit, line_size=64):
    """Victim code for one secret bit.  Both branches perform the same
    accesses; only the stored intermediate value differs."""
    value = DMP_POINTER if bit else DMP_POINTER ^ DMP_BLIND_MASK
    return [
        Store(DMP_VICTIM_LINE + 8, value),
        Access(DMP_VICTIM_PC, DMP_VICTIM_LINE, (S3, S4)),
    ]


def run_dmp(defended=False, trials=1000, seed=0, machine=None, record_accesses=False):
    """The victim loads a line holding a valid pointer iff its secret bit is
    set; the DMP dereferences it into the attacker's Prime+Probe set."""
    machine = machine or MachineConfig()
    _check_family(machine, "dmp", "dmp")
    sched = _build(machine, "dmp", seed)
    sched.record_accesses = record_accesses
    cache = sched.domain_of(0).cache
    rng = XorShift64Star(seed)
    evset = build_eviction_set(cache, DMP_POINTER)
    ev_pcs = tuple(DMP_EVSET_PC + i for i in range(len(evset)))
    secrets = []
    victim, attacker = [], [Nop(S1)]
    for t in range(trials):
        bit = rng.bit()
        secrets.append(bit)
        victim += _wrap(dmp_victim_section(bit, machine.line_size), defended) + [Yield()]
        attacker += [
            Probe(tuple(evset), pcs=ev_pcs, record=False, stage=S2),
            Yield(),
            Probe(tuple(reversed(evset)), pcs=tuple(reversed(ev_pcs)), label=f"trial{t}",
                  stage=S5),
        ]
    a = sched.add_task(attacker, 0, "attacker", role="attacker")
    v = sched.add_task(victim, 0, "victim", role="victim")
    sched.watched.add(v.tid)
    sched.run()
    correct, samples, rows = _binary_outcome(a.observations, secrets,
                                             lambda states: int("miss" in states))
    return _report("dmp", defended, trials, correct, 0.5, seed, samples, rows, sched)


def run_smt_bypass_regression(trials=1000, seed=0, machine=None, protect=True,
                              scheduler_cls=Scheduler, record_accesses=False):
    """Victim on SMT sibling 0 protects a stride walk; the attacker on
    sibling 1 clears its own flag mid-walk (asking for the prefetcher back)
    and then reloads the line after the table."""
    machine = machine or MachineConfig()
    _check_family(machine, "ip_stride", "smt_bypass")
    sched = _build(machine, "ip_stride", seed, default_cores=1, default_ways=2,
                   scheduler_cls=scheduler_cls)
    topo = sched.topology
    if topo.logical_core_count < 2 or topo.sharing_domain_of(0) != topo.sharing_domain_of(1):
        raise ConfigError("smt_bypass needs logical cores 0 and 1 in one sharing domain")
    sched.record_accesses = record_accesses
    rng = XorShift64Star(seed)
    line = machine.line_size
    n = SHIN_TABLE_LINES
    probe_addr = SHIN_TABLE + n * line
    secrets = []
    victim, attacker = [], []
    for t in range(trials):
        bit = rng.bit()
        secrets.append(bit)
        walk = shin_victim_walk(bit, rng, line)
        if protect:
            victim += [SetFlag()] + walk + [ClearFlag(), Nop()]
        else:
            victim += [Nop()] + walk + [Nop(), Nop()]
        attacker += [Flush(probe_addr, S2), Nop(), ClearFlag()]
        attacker += [Nop() for _ in range(n - 1)]
        attacker += [Probe((probe_addr,), pcs=(SHIN_PROBE_PC,), label=f"trial{t}", stage=S5)]
    v = sched.add_task(victim, 0, "victim", role="victim")
    a = sched.add_task(attacker, 1, "attacker", role="attacker")
    sched.watched.add(v.tid)
    sched.run()
    correct, samples, rows = _binary_outcome(a.observations, secrets,
                                             lambda states: int(states[0] == "hit"))
    return _report("smt_bypass", protect, trials, correct, 0.5, seed, samples, rows, sched)


def _smt_entry(defended=False, trials=1000, seed=0, machine=None, **kw):
    return run_smt_bypass_regression(trials, seed, machine, protect=defended, **kw)


SCENARIOS = {
    "shin": run_shin,
    "afterimage_v1": run_afterimage_v1,
    "sms": run_sms,
    "dmp": run_dmp,
    "smt_bypass": _smt_entry,
}


def run_scenario(name, defended=False, trials=1000, seed=0, machine=None, **kw):
    try:
        fn = SCENARIOS[name]
    except KeyError:
        raise ConfigError(f"unknown scenario {name!r}; known: {', '.join(sorted(SCENARIOS))}") \
            from None
    return fn(defended=defended, trials=trials, seed=seed, machine=machine, **kw)
