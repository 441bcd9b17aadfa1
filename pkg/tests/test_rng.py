from collections import Counter

import pytest

from prefence_sim.rng import XorShift64Star, splitmix64


def test_splitmix64_reference_vector():
    # first output of the reference splitmix64 seeded with 0
    assert splitmix64(0) == 0xE220A8397B1DCDAF


def test_xorshift_step_by_hand():
    r = XorShift64Star(0)
    x = splitmix64(0)
    x ^= x >> 12
    x ^= (x << 25) & (2**64 - 1)
    x ^= x >> 27
    assert r.next_u64() == (x * 0x2545F4914F6CDD1D) % 2**64


def test_same_seed_same_stream():
    a, b = XorShift64Star(42), XorShift64Star(42)
    assert [a.next_u64() for _ in range(100)] == [b.next_u64() for _ in range(100)]
    assert XorShift64Star(1).next_u64() != XorShift64Star(2).next_u64()


def test_below_is_in_range_and_roughly_uniform():
    r = XorShift64Star(9)
    counts = Counter(r.below(6) for _ in range(60000))
    assert set(counts) == set(range(6))
    assert all(abs(v - 10000) < 500 for v in counts.values())


def test_permutation_and_bad_seed():
    p = XorShift64Star(5).permutation(50)
    assert sorted(p) == list(range(50))
    with pytest.raises(ValueError):
        XorShift64Star(-1)
