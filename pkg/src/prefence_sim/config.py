"""Scenario configuration files.

Format: INI-style sections with flat ``key = value`` lines.  Recognised keys:

    [scenario]   name, defended, trials, seed (seed is mandatory)
    [topology]   physical_cores, smt_ways, domain_granularity
    [cache]      sets, ways, line_size, latency_hit, latency_miss,
                 noise_flush_probability
    [prefetcher] family, stride_capacity, confidence_threshold,
                 sms_region_size, sms_capacity, dmp_valid_ranges,
                 dmp_history_depth, clear_on_disable
    [scheduler]  quantum
    [output]     report, trace, summary, histogram, probes, requests

``dmp_valid_ranges`` is a comma separated list of ``lo-hi`` hex ranges.
Topology and prefetcher family may be left out; each scenario then uses its
own defaults.
"""
import configparser
import io
from dataclasses import dataclass, field, fields
from typing import Optional

from .errors import ConfigError
from .topology import GRANULARITIES, build_topology

OUTPUT_KEYS = ("report", "trace", "summary", "histogram", "probes", "requests")


@dataclass(frozen=True)
class MachineConfig:
    physical_cores: Optional[int] = None
    smt_ways: Optional[int] = None
    domain_granularity: str = "per_physical_core"
    family: Optional[str] = None
    sets: int = 64
    ways: int = 8
    line_size: int = 64
    latency_hit: int = 96
    latency_miss: int = 340
    noise_flush_probability: float = 0.0
    stride_capacity: int = 16
    confidence_threshold: int = 2
    sms_region_size: int = 1024
    sms_capacity: int = 16
    dmp_valid_ranges: tuple = ((0x100000, 0x200000),)
    dmp_history_depth: int = 1
    clear_on_disable: bool = False
    quantum: int = 100

    def cache_kwargs(self):
        return dict(sets=self.sets, ways=self.ways, line_size=self.line_size,
                    latency_hit=self.latency_hit, latency_miss=self.latency_miss)

    def prefetcher_kwargs(self):
        return dict(line_size=self.line_size, stride_capacity=self.stride_capacity,
                    confidence_threshold=self.confidence_threshold,
                    sms_region_size=self.sms_region_size, sms_capacity=self.sms_capacity,
                    dmp_valid_ranges=self.dmp_valid_ranges,
                    dmp_history_depth=self.dmp_history_depth,
                    clear_on_disable=self.clear_on_disable)

    def topology(self, default_cores=1, default_ways=1):
        cores = self.physical_cores if self.physical_cores is not None else default_cores
        ways = self.smt_ways if self.smt_ways is not None else default_ways
        return build_topology(cores, ways, self.domain_granularity)


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    seed: int
    defended: bool = False
    trials: int = 1000
    machine: MachineConfig = field(default_factory=MachineConfig)
    outputs: tuple = ()  # sorted (key, path) pairs

    def output(self, key):
        return dict(self.outputs).get(key)


_SECTIONS = {
    "topology": ("physical_cores", "smt_ways", "domain_granularity"),
    "cache": ("sets", "ways", "line_size", "latency_hit", "latency_miss",
              "noise_flush_probability"),
    "prefetcher": ("family", "stride_capacity", "confidence_threshold", "sms_region_size",
                   "sms_capacity", "dmp_valid_ranges", "dmp_history_depth", "clear_on_disable"),
    "scheduler": ("quantum",),
}
_MACHINE_TYPES = {f.name: f.type for f in fields(MachineConfig)}


def _parse_bool(text, key):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {text!r}")


def _parse_int(text, key):
    try:
        return int(text.strip(), 0)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {text!r}") from None


def _parse_ranges(text):
    ranges = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        lo, sep, hi = part.partition("-")
        if not sep:
            raise ConfigError(f"dmp_valid_ranges: malformed range {part!r}")
        ranges.append((_parse_int(lo, "dmp_valid_ranges"), _parse_int(hi, "dmp_valid_ranges")))
    return tuple(ranges)


def _format_ranges(ranges):
    return ", ".join(f"{lo:#x}-{hi:#x}" for lo, hi in ranges)


def _machine_value(key, text):
    typ = _MACHINE_TYPES[key]
    if key == "dmp_valid_ranges":
        return _parse_ranges(text)
    if key == "clear_on_disable":
        return _parse_bool(text, key)
    if key == "noise_flush_probability":
        try:
            return float(text)
        except ValueError:
            raise ConfigError(f"{key}: expected a number, got {text!r}") from None
    if key in ("domain_granularity", "family"):
        return text.strip()
    if typ in (int, Optional[int]):
        return _parse_int(text, key)
    raise ConfigError(f"unhandled key {key}")  # pragma: no cover


def parse_config(text):
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    known = {"scenario", "output", *_SECTIONS}
    for section in parser.sections():
        if section not in known:
            raise ConfigError(f"unknown section [{section}]")
    if not parser.has_section("scenario"):
        raise ConfigError("missing [scenario] section")
    sc = parser["scenario"]
    for key in sc:
        if key not in ("name", "defended", "trials", "seed"):
            raise ConfigError(f"unknown key {key!r} in [scenario]")
    if "name" not in sc:
        raise ConfigError("[scenario] needs a name")
    if "seed" not in sc:
        raise ConfigError("[scenario] needs an explicit seed")
    seed = _parse_int(sc["seed"], "seed")
    if seed < 0 or seed >= 1 << 64:
        raise ConfigError("seed must fit in 64 bits")
    trials = _parse_int(sc.get("trials", "1000"), "trials")
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    defended = _parse_bool(sc.get("defended", "false"), "defended")

    values = {}
    for section, keys in _SECTIONS.items():
        if not parser.has_section(section):
            continue
        for key, text in parser[section].items():
            if key not in keys:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            values[key] = _machine_value(key, text)
    machine = MachineConfig(**values)
    if machine.domain_granularity not in GRANULARITIES:
        raise ConfigError(f"domain_granularity must be one of {GRANULARITIES}")

    outputs = []
    if parser.has_section("output"):
        for key, path in parser["output"].items():
            if key not in OUTPUT_KEYS:
                raise ConfigError(f"unknown key {key!r} in [output]")
            outputs.append((key, path.strip()))
    return ScenarioConfig(sc["name"].strip(), seed, defended, trials, machine,
                          tuple(sorted(outputs)))


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except FileNotFoundError:
        raise ConfigError(f"config not found: {path}") from None
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


def dump_config(cfg):
    parser = configparser.ConfigParser(interpolation=None)
    parser["scenario"] = {
        "name": cfg.name,
        "defended": str(cfg.defended).lower(),
        "trials": str(cfg.trials),
        "seed": str(cfg.seed),
    }
    m = cfg.machine
    for section, keys in _SECTIONS.items():
        entries = {}
        for key in keys:
            value = getattr(m, key)
            if value is None:
                continue
            if key == "dmp_valid_ranges":
                entries[key] = _format_ranges(value)
            elif isinstance(value, bool):
                entries[key] = str(value).lower()
            else:
                entries[key] = str(value)
        parser[section] = entries
    if cfg.outputs:
        parser["output"] = dict(cfg.outputs)
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()
