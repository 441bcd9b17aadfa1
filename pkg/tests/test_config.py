import pytest
from hypothesis import given, strategies as st

from prefence_sim.config import (MachineConfig, ScenarioConfig, dump_config, load_config,
                                 parse_config)
from prefence_sim.errors import ConfigError

BASIC = """
[scenario]
name = shin
defended = true
trials = 50
seed = 7

[cache]
sets = 32
latency_hit = 90

[prefetcher]
dmp_valid_ranges = 0x100000-0x200000, 0x300000-0x380000

[output]
report = out/report.json
"""


def test_parse_basic():
    cfg = parse_config(BASIC)
    assert cfg.name == "shin" and cfg.defended and cfg.trials == 50 and cfg.seed == 7
    assert cfg.machine.sets == 32 and cfg.machine.latency_hit == 90
    assert cfg.machine.dmp_valid_ranges == ((0x100000, 0x200000), (0x300000, 0x380000))
    assert cfg.output("report") == "out/report.json"


def test_seed_is_mandatory():
    with pytest.raises(ConfigError, match="seed"):
        parse_config("[scenario]\nname = shin\n")


@pytest.mark.parametrize("text, msg", [
    ("[scenario]\nname = shin\nseed = 1\n[gpu]\nx = 1\n", "unknown section"),
    ("[scenario]\nname = shin\nseed = 1\ncolour = red\n", "unknown key"),
    ("[scenario]\nname = shin\nseed = 1\n[cache]\nsets = many\n", "integer"),
    ("[scenario]\nname = shin\nseed = x\n", "integer"),
    ("name = shin\n", "malformed"),
    ("[scenario]\nname = shin\nseed = 1\n[topology]\ndomain_granularity = socket\n",
     "domain_granularity"),
    ("[scenario]\nname = shin\nseed = 1\n[output]\nplot = a.png\n", "unknown key"),
])
def test_malformed_configs(text, msg):
    with pytest.raises(ConfigError, match=msg):
        parse_config(text)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="config not found"):
        load_config(tmp_path / "missing.cfg")


def test_load_from_file(tmp_path):
    p = tmp_path / "a.cfg"
    p.write_text(BASIC)
    assert load_config(p) == parse_config(BASIC)


ranges = st.lists(st.tuples(st.integers(0, 1 << 20), st.integers(1, 1 << 12)),
                  min_size=1, max_size=3).map(
    lambda xs: tuple(sorted({(lo << 12, (lo << 12) + n) for lo, n in xs})))

machines = st.builds(
    MachineConfig,
    physical_cores=st.one_of(st.none(), st.integers(1, 8)),
    smt_ways=st.one_of(st.none(), st.integers(1, 4)),
    domain_granularity=st.sampled_from(["per_physical_core", "global"]),
    family=st.one_of(st.none(), st.sampled_from(["ip_stride", "sms", "dmp"])),
    sets=st.integers(1, 4096), ways=st.integers(1, 32),
    line_size=st.sampled_from([32, 64, 128]),
    latency_hit=st.integers(1, 500), latency_miss=st.integers(1, 1000),
    noise_flush_probability=st.sampled_from([0.0, 0.25, 0.5, 1.0]),
    stride_capacity=st.integers(1, 64), confidence_threshold=st.integers(1, 3),
    sms_region_size=st.sampled_from([512, 1024, 2048]), sms_capacity=st.integers(1, 64),
    dmp_valid_ranges=ranges, dmp_history_depth=st.integers(1, 8),
    clear_on_disable=st.booleans(), quantum=st.integers(1, 1000),
)

paths = st.text("abcdefghij/_.", min_size=1, max_size=12).filter(lambda s: s.strip() == s)


@given(st.builds(ScenarioConfig,
                 name=st.sampled_from(["shin", "afterimage_v1", "sms", "dmp", "smt_bypass"]),
                 seed=st.integers(0, 2**64 - 1), defended=st.booleans(),
                 trials=st.integers(1, 10**6), machine=machines,
                 outputs=st.dictionaries(st.sampled_from(["report", "trace", "histogram"]),
                                         paths).map(lambda d: tuple(sorted(d.items())))))
def test_round_trip(cfg):
    assert parse_config(dump_config(cfg)) == cfg
