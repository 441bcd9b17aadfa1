"""Behavioural models of the IP-stride, SMS and DMP prefetchers.

Every model carries an ``enabled`` bit.  While it is clear, ``observe``
returns no requests and leaves the state untouched: a disabled prefetcher
cannot be trained.  Toggling the bit never clears tables unless
``clear_on_disable`` is set.
"""
from collections import OrderedDict, deque
from dataclasses import dataclass
from typing import Optional

from . import _accel
from .errors import ConfigError

STRIDE = "stride"
SMS_REPLAY = "sms_replay"
DMP_DEREF = "dmp_deref"

FAMILIES = ("ip_stride", "sms", "dmp")


@dataclass(frozen=True)
class MemoryAccess:
    pc: int
    vaddr: int
    value: Optional[int] = None
    core: int = 0
    task: int = 0

    def __post_init__(self):
        if self.pc < 0 or self.vaddr < 0:
            raise ValueError("pc and vaddr must be non-negative")


@dataclass(frozen=True)
class PrefetchRequest:
    target: int
    cause: str
    origin_task: int


class _Prefetcher:
    family = None

    def __init__(self, clear_on_disable=False):
        self.enabled = True
        self.clear_on_disable = clear_on_disable

    def set_enabled(self, on):
        on = bool(on)
        if not on and self.clear_on_disable:
            self.reset()
        self.enabled = on


class StrideState(_Prefetcher):
    """IP-stride prefetcher.

    Entries are keyed by the low 8 bits of the load's pc.  A new entry has no
    stride and confidence 0; the first delta it sees becomes its stride with
    confidence 1.  Afterwards a repeated delta raises confidence (saturating
    at 3) and a different delta replaces the stride and lowers confidence by
    one.  One request for ``vaddr + stride`` is emitted whenever confidence
    is at least ``threshold`` after the update and the target lies on another
    line.  A full table replaces its least recently used entry.
    """

    family = "ip_stride"

    def __init__(self, capacity=16, threshold=2, line_size=64, clear_on_disable=False):
        super().__init__(clear_on_disable)
        if capacity < 1:
            raise ConfigError("stride table capacity must be >= 1")
        self.capacity = capacity
        self.threshold = threshold
        self.line_shift = line_size.bit_length() - 1
        self.table = _accel.new_stride_table(capacity)

    def observe(self, acc, line_contents=None):
        if not self.enabled:
            return []
        target = _accel.stride_observe(self.table, acc.pc & 0xFF, acc.vaddr,
                                       self.threshold, self.line_shift)
        if target < 0:
            return []
        return [PrefetchRequest(int(target), STRIDE, acc.task)]

    def entries(self):
        """Valid entries as dicts, for inspection and tests."""
        t = self.table
        rows = []
        for r in t[t[:, _accel.ST_VALID] == 1]:
            rows.append({
                "ip_tag": int(r[_accel.ST_TAG]),
                "last_addr": int(r[_accel.ST_LAST]),
                "stride": int(r[_accel.ST_STRIDE]) if r[_accel.ST_HAS_STRIDE] else None,
                "confidence": int(r[_accel.ST_CONF]),
            })
        return rows

    def reset(self):
        self.table.fill(0)

    def snapshot(self):
        return (self.enabled, self.table.tobytes())


class SmsState(_Prefetcher):
    """Spatial Memory Streaming prefetcher.

    Accesses inside the current training region set bits in its footprint.
    Leaving the region commits the footprint to the pattern table under the
    region's trigger offset (the offset of its first access).  The first
    access to a new region replays the pattern stored for its offset: every
    recorded line except the trigger line itself is requested.
    """

    family = "sms"

    def __init__(self, region_size=1024, line_size=64, capacity=16, clear_on_disable=False):
        super().__init__(clear_on_disable)
        if region_size % line_size or region_size < line_size:
            raise ConfigError("region_size must be a positive multiple of line_size")
        self.region_size = region_size
        self.line_size = line_size
        self.capacity = capacity
        self.patterns = OrderedDict()  # trigger offset -> footprint bitmask
        self.training = None  # [region_base, trigger_offset, footprint]

    @property
    def lines_per_region(self):
        return self.region_size // self.line_size

    def observe(self, acc, line_contents=None):
        if not self.enabled:
            return []
        base = acc.vaddr - acc.vaddr % self.region_size
        offset = (acc.vaddr % self.region_size) // self.line_size
        if self.training is not None and self.training[0] == base:
            self.training[2] |= 1 << offset
            return []
        if self.training is not None:
            self._commit()
        requests = []
        pattern = self.patterns.get(offset)
        if pattern is not None:
            self.patterns.move_to_end(offset)
            for i in range(self.lines_per_region):
                if i != offset and pattern >> i & 1:
                    requests.append(PrefetchRequest(base + i * self.line_size, SMS_REPLAY, acc.task))
        self.training = [base, offset, 1 << offset]
        return requests

    def _commit(self):
        _, trigger, footprint = self.training
        self.patterns[trigger] = footprint
        self.patterns.move_to_end(trigger)
        while len(self.patterns) > self.capacity:
            self.patterns.popitem(last=False)
        self.training = None

    def reset(self):
        self.patterns.clear()
        self.training = None

    def snapshot(self):
        training = tuple(self.training) if self.training is not None else None
        return (self.enabled, tuple(self.patterns.items()), training)


class DmpState(_Prefetcher):
    """Data memory-dependent prefetcher.

    Scans the words of each demanded line; every word-aligned value inside
    one of ``valid_ranges`` is treated as a pointer and its line requested.
    """

    family = "dmp"

    def __init__(self, valid_ranges=((0x100000, 0x200000),), history_depth=1,
                 word_size=8, line_size=64, clear_on_disable=False):
        super().__init__(clear_on_disable)
        ranges = sorted((int(lo), int(hi)) for lo, hi in valid_ranges)
        for lo, hi in ranges:
            if lo >= hi:
                raise ConfigError(f"empty pointer range [{lo:#x}, {hi:#x})")
        for (_, hi), (lo, _) in zip(ranges, ranges[1:]):
            if lo < hi:
                raise ConfigError("pointer ranges overlap")
        self.valid_ranges = tuple(ranges)
        self.history_depth = history_depth
        self.word_size = word_size
        self.line_shift = line_size.bit_length() - 1
        self.history = deque(maxlen=history_depth)

    def is_pointer(self, value):
        if value % self.word_size:
            return False
        return any(lo <= value < hi for lo, hi in self.valid_ranges)

    def observe(self, acc, line_contents=None):
        if not self.enabled:
            return []
        demanded = acc.vaddr >> self.line_shift
        self.history.append(demanded)
        requests = []
        seen = set()
        for value in line_contents or ():
            if not self.is_pointer(value):
                continue
            line = value >> self.line_shift
            if line == demanded or line in seen:
                continue
            seen.add(line)
            requests.append(PrefetchRequest(value, DMP_DEREF, acc.task))
        return requests

    def reset(self):
        self.history.clear()

    def snapshot(self):
        return (self.enabled, tuple(self.history))


def stride_observe(state, acc):
    return state.observe(acc)


def sms_observe(state, acc):
    return state.observe(acc)


def dmp_observe(state, acc, line_contents):
    return state.observe(acc, line_contents)


def set_enabled(state, on):
    state.set_enabled(on)


def reset_state(state):
    state.reset()


def make_prefetcher(family, line_size=64, stride_capacity=16, confidence_threshold=2,
                    sms_region_size=1024, sms_capacity=16,
                    dmp_valid_ranges=((0x100000, 0x200000),), dmp_history_depth=1,
                    clear_on_disable=False):
    if family == "ip_stride":
        return StrideState(stride_capacity, confidence_threshold, line_size, clear_on_disable)
    if family == "sms":
        return SmsState(sms_region_size, line_size, sms_capacity, clear_on_disable)
    if family == "dmp":
        return DmpState(dmp_valid_ranges, dmp_history_depth, 8, line_size, clear_on_disable)
    raise ConfigError(f"unknown prefetcher family {family!r} (xpt is catalog-only)")
