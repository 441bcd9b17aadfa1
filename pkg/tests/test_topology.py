import pytest
from hypothesis import given, strategies as st

from prefence_sim.errors import ConfigError
from prefence_sim.topology import Topology, build_topology, sharing_domain_of


def test_degenerate_machine():
    t = build_topology(1, 1, "per_physical_core")
    assert t.logical_core_count == 1
    assert t.sharing_domains == ((0,),)
    assert sharing_domain_of(t, 0) == 0


def test_two_by_two_per_physical_core():
    t = build_topology(2, 2, "per_physical_core")
    assert t.logical_core_count == 4
    assert t.sharing_domains == ((0, 1), (2, 3))
    assert sharing_domain_of(t, 3) == 1
    assert t.physical_core_of(2) == 1
    assert t.siblings(3) == (2, 3)


def test_global_domain():
    t = build_topology(2, 1, "global")
    assert t.logical_core_count == 2
    assert t.sharing_domains == ((0, 1),)
    assert sharing_domain_of(t, 1) == 0


def test_invalid_core_and_granularity():
    t = build_topology(2, 2)
    with pytest.raises(ConfigError):
        t.sharing_domain_of(4)
    with pytest.raises(ConfigError):
        build_topology(2, 2, "per_socket")
    with pytest.raises(ConfigError):
        build_topology(0, 2)


def test_hand_built_topology_rejects_bad_partitions():
    with pytest.raises(ConfigError, match="appears in domains"):
        Topology(2, 1, ((0, 1), (1,)))
    with pytest.raises(ConfigError, match="no sharing domain"):
        Topology(2, 1, ((0,),))
    with pytest.raises(ConfigError, match="split across"):
        Topology(1, 2, ((0,), (1,)))


@given(st.integers(1, 6), st.integers(1, 4), st.sampled_from(["per_physical_core", "global"]))
def test_domains_partition_cores_and_keep_siblings_together(p, w, g):
    t = build_topology(p, w, g)
    flat = sorted(c for d in t.sharing_domains for c in d)
    assert flat == list(range(p * w))
    for c in range(t.logical_core_count):
        assert c in t.cores_in_domain(t.sharing_domain_of(c))
        assert {t.sharing_domain_of(s) for s in t.siblings(c)} == {t.sharing_domain_of(c)}
        assert t.physical_core_of(c) * w + c % w == c
