"""Set-associative LRU cache with fixed hit/miss latencies."""
from dataclasses import dataclass

import numpy as np

from . import _accel
from .errors import ConfigError

HIT = "hit"
MISS = "miss"


@dataclass
class ProbeResult:
    lines: list
    latencies: list
    states: list

    @property
    def hits(self):
        return [a for a, s in zip(self.lines, self.states) if s == HIT]

    def any_miss(self):
        return MISS in self.states


class RandomFlushNoise:
    """Optional noise channel: before each access, evict one random resident
    line with the given probability, standing in for unrelated activity since
    the previous access.  Seeded; off unless attached."""

    def __init__(self, rng, probability):
        if not 0.0 <= probability <= 1.0:
            raise ConfigError("noise probability must be in [0, 1]")
        self.rng = rng
        self.probability = probability

    def __call__(self, cache):
        if self.probability == 0.0 or self.rng.random() >= self.probability:
            return
        resident = np.argwhere(cache.tags >= 0)
        if len(resident) == 0:
            return
        s, w = resident[self.rng.below(len(resident))]
        _accel.lru_evict(cache.tags, cache.ages, int(s), int(cache.tags[s, w]))


class CacheState:
    def __init__(self, sets=64, ways=8, line_size=64, latency_hit=96, latency_miss=340, noise=None):
        if sets < 1 or ways < 1:
            raise ConfigError("cache needs at least one set and one way")
        if line_size < 1 or line_size & (line_size - 1):
            raise ConfigError(f"line_size must be a power of two, got {line_size}")
        self.sets = sets
        self.ways = ways
        self.line_size = line_size
        self.line_shift = line_size.bit_length() - 1
        self.latency_hit = latency_hit
        self.latency_miss = latency_miss
        self.noise = noise
        self.tags, self.ages = _accel.new_cache_arrays(sets, ways)

    def line_of(self, addr):
        return addr >> self.line_shift

    def line_base(self, addr):
        return (addr >> self.line_shift) << self.line_shift

    def set_index(self, addr):
        return (addr >> self.line_shift) % self.sets

    def access(self, addr):
        if self.noise is not None:
            self.noise(self)
        line = addr >> self.line_shift
        hit = _accel.lru_touch(self.tags, self.ages, line % self.sets, line)
        return self.latency_hit if hit else self.latency_miss

    def install(self, addr):
        line = addr >> self.line_shift
        _accel.lru_touch(self.tags, self.ages, line % self.sets, line)

    def flush(self, addr):
        line = addr >> self.line_shift
        _accel.lru_evict(self.tags, self.ages, line % self.sets, line)

    def contains(self, addr):
        line = addr >> self.line_shift
        return bool((self.tags[line % self.sets] == line).any())

    def probe(self, lines):
        lat = [self.access(a) for a in lines]
        return ProbeResult(list(lines), lat, [HIT if x == self.latency_hit else MISS for x in lat])

    def set_contents(self, s):
        """Resident line addresses of set ``s``, most recently used first."""
        row_t, row_a = self.tags[s], self.ages[s]
        order = sorted((int(a), int(t)) for t, a in zip(row_t, row_a) if t >= 0)
        return [t << self.line_shift for _, t in order]

    def snapshot(self):
        return self.tags.tobytes() + self.ages.tobytes()

    def clear(self):
        self.tags.fill(-1)
        self.ages.fill(-1)


def build_eviction_set(cache, target_addr):
    """``cache.ways`` addresses congruent with ``target_addr`` in set index,
    none on the target's own line.  Set stride is ``sets * line_size``."""
    stride = cache.sets * cache.line_size
    base = cache.line_base(target_addr)
    return [base + k * stride for k in range(1, cache.ways + 1)]


def access(cache, addr):
    return cache.access(addr)


def flush(cache, addr):
    cache.flush(addr)


def install(cache, addr):
    cache.install(addr)


def probe(cache, lines):
    return cache.probe(lines)
