from collections import OrderedDict

import pytest
from hypothesis import given, settings, strategies as st

from prefence_sim.errors import ConfigError
from prefence_sim.prefetchers import (DmpState, MemoryAccess, SmsState, StrideState, dmp_observe,
                                      make_prefetcher, reset_state, set_enabled, sms_observe,
                                      stride_observe)


def acc(pc, vaddr):
    return MemoryAccess(pc, vaddr)


def targets(reqs):
    return [r.target for r in reqs]


class StrideOracle:
    """Table of tag -> [last, stride, confidence], kept in LRU order."""

    def __init__(self, capacity=16, threshold=2, line=64):
        self.capacity, self.threshold, self.line = capacity, threshold, line
        self.entries = OrderedDict()

    def observe(self, pc, vaddr):
        tag = pc & 0xFF
        e = self.entries.get(tag)
        if e is None:
            if len(self.entries) == self.capacity:
                self.entries.popitem(last=False)
            self.entries[tag] = [vaddr, None, 0]
            return None
        self.entries.move_to_end(tag)
        delta = vaddr - e[0]
        if e[1] is None:
            e[1], e[2] = delta, 1
        elif delta == e[1]:
            e[2] = min(3, e[2] + 1)
        else:
            e[1], e[2] = delta, max(0, e[2] - 1)
        e[0] = vaddr
        if e[2] >= self.threshold and e[1] and (vaddr + e[1]) // self.line != vaddr // self.line:
            return vaddr + e[1]
        return None


SEQ = [0x1000, 0x1040, 0x1080, 0x10C0]


def test_stride_disabled_is_silent_and_frozen():
    s = StrideState()
    set_enabled(s, False)
    before = s.snapshot()
    assert all(stride_observe(s, acc(0x400, a)) == [] for a in SEQ)
    assert s.snapshot() == before


def test_stride_emits_on_third_access():
    s = StrideState()
    out = [targets(stride_observe(s, acc(0x400, a))) for a in SEQ]
    assert out == [[], [], [0x10C0], [0x1100]]
    assert s.entries()[0]["confidence"] == 3


def test_stride_tag_collision_shares_one_entry():
    s = StrideState()
    stride_observe(s, acc(0x7100, 0x2000))
    stride_observe(s, acc(0x7200, 0x2080))
    stride_observe(s, acc(0x7100, 0x2100))
    rows = s.entries()
    assert len(rows) == 1
    assert rows[0]["ip_tag"] == 0x00
    assert rows[0]["stride"] == 0x80 and rows[0]["confidence"] == 2


def test_stride_mismatch_lowers_confidence():
    s = StrideState()
    for a in (0x0, 0x40, 0x80, 0xC0):
        stride_observe(s, acc(1, a))
    stride_observe(s, acc(1, 0x1000))
    e = s.entries()[0]
    assert e["confidence"] == 2 and e["stride"] == 0x1000 - 0xC0


def test_stride_table_replaces_lru_entry():
    s = StrideState(capacity=2)
    stride_observe(s, acc(1, 0x0))
    stride_observe(s, acc(2, 0x0))
    stride_observe(s, acc(1, 0x40))  # tag 1 becomes most recent
    stride_observe(s, acc(3, 0x0))
    assert sorted(e["ip_tag"] for e in s.entries()) == [1, 3]


pc_st = st.sampled_from([0x400, 0x401, 0x402, 0x500, 0x7100, 0x7200])
addr_st = st.integers(0, 64).map(lambda k: 0x10000 + k * 0x20)


@settings(max_examples=300)
@given(st.lists(st.tuples(pc_st, addr_st), max_size=80), st.integers(1, 4), st.integers(1, 3))
def test_stride_matches_rule_oracle(seq, capacity, threshold):
    s = StrideState(capacity=capacity, threshold=threshold)
    o = StrideOracle(capacity, threshold)
    for pc, a in seq:
        got = targets(s.observe(acc(pc, a)))
        want = o.observe(pc, a)
        assert got == ([] if want is None else [want])


def test_stride_state_survives_disable():
    s = StrideState()
    for a in SEQ[:3]:
        stride_observe(s, acc(0x400, a))
    set_enabled(s, False)
    set_enabled(s, False)
    set_enabled(s, True)
    assert targets(stride_observe(s, acc(0x400, 0x10C0))) == [0x1100]


def test_clear_on_disable_wipes_state():
    s = StrideState(clear_on_disable=True)
    for a in SEQ[:3]:
        stride_observe(s, acc(0x400, a))
    set_enabled(s, False)
    set_enabled(s, True)
    assert s.entries() == []


def test_reset_examples():
    s = StrideState()
    for a in SEQ[:3]:
        stride_observe(s, acc(0x400, a))
    reset_state(s)
    assert stride_observe(s, acc(0x400, 0x10C0)) == []
    fresh = StrideState()
    reset_state(fresh)
    assert fresh.snapshot() == StrideState().snapshot()
    set_enabled(fresh, False)
    reset_state(fresh)
    assert StrideState().observe(acc(0x400, 0x0)) == []


A, B, C = 0x40000, 0x80000, 0xC0000


def test_sms_replays_footprint_without_trigger():
    s = SmsState()
    for off in (0, 3, 5):
        sms_observe(s, acc(0x10, A + off * 64))
    sms_observe(s, acc(0x10, C + 7 * 64))  # leaving A commits its pattern
    assert targets(sms_observe(s, acc(0x10, B))) == [B + 3 * 64, B + 5 * 64]


def test_sms_disabled_training_commits_nothing():
    s = SmsState()
    set_enabled(s, False)
    for off in (0, 3, 5):
        sms_observe(s, acc(0x10, A + off * 64))
    sms_observe(s, acc(0x10, C))
    set_enabled(s, True)
    assert sms_observe(s, acc(0x10, B)) == []


def test_sms_single_line_pattern_replays_nothing():
    s = SmsState()
    sms_observe(s, acc(0x10, A + 2 * 64))
    sms_observe(s, acc(0x10, C))
    assert s.patterns[2] == 1 << 2
    assert sms_observe(s, acc(0x10, B + 2 * 64)) == []


def test_sms_rejects_bad_region():
    with pytest.raises(ConfigError):
        SmsState(region_size=100)


def test_dmp_scan_rule():
    d = DmpState(valid_ranges=((0x100000, 0x200000),))
    assert dmp_observe(d, acc(1, 0x500000), [0x0, 0xFFFF_FFFF] + [0] * 6) == []
    assert targets(dmp_observe(d, acc(1, 0x500000), [0, 0x180040, 0, 0, 0, 0, 0, 0])) == [0x180040]
    blinded = 0x180040 | 0xFFFF_0000_0000_0000
    assert dmp_observe(d, acc(1, 0x500000), [blinded] + [0] * 7) == []
    assert dmp_observe(d, acc(1, 0x500000), [0x180041] + [0] * 7) == []


def test_dmp_disabled():
    d = DmpState()
    set_enabled(d, False)
    before = d.snapshot()
    assert dmp_observe(d, acc(1, 0x500000), [0x180040] * 8) == []
    assert d.snapshot() == before


def test_dmp_rejects_overlapping_ranges():
    with pytest.raises(ConfigError):
        DmpState(valid_ranges=((0, 0x100), (0x80, 0x200)))


def test_make_prefetcher_families():
    assert make_prefetcher("ip_stride").family == "ip_stride"
    assert make_prefetcher("sms").family == "sms"
    assert make_prefetcher("dmp").family == "dmp"
    with pytest.raises(ConfigError):
        make_prefetcher("xpt")


def test_enable_on_fresh_state_does_nothing():
    for fam in ("ip_stride", "sms", "dmp"):
        pf = make_prefetcher(fam)
        set_enabled(pf, True)
        assert pf.observe(acc(0x400, 0x1000), [0] * 8) == []


any_access = st.tuples(st.integers(0, 0xFFFF), st.integers(0, 1 << 22),
                       st.lists(st.integers(0, 1 << 22), min_size=8, max_size=8))


@settings(max_examples=100)
@given(st.sampled_from(["ip_stride", "sms", "dmp"]),
       st.lists(any_access, max_size=30), st.lists(any_access, max_size=30))
def test_disabled_models_are_frozen(family, warmup, seq):
    pf = make_prefetcher(family)
    for pc, a, words in warmup:
        pf.observe(acc(pc, a), words)
    set_enabled(pf, False)
    before = pf.snapshot()
    for pc, a, words in seq:
        assert pf.observe(acc(pc, a), words) == []
    assert pf.snapshot() == before
