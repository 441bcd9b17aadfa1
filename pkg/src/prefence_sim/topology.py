"""Machine description: physical cores, SMT siblings and prefetcher sharing domains.

Logical core ids are dense and physical-major: way ``w`` of physical core
``p`` is logical core ``p * smt_ways + w``.  Each sharing domain owns exactly
one prefetcher and one cache.
"""
from dataclasses import dataclass, field

from .errors import ConfigError

GRANULARITIES = ("per_physical_core", "global")


@dataclass(frozen=True)
class Topology:
    physical_core_count: int
    smt_ways: int
    sharing_domains: tuple
    _domain_of: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = self.physical_core_count * self.smt_ways
        owner = [-1] * n
        for d, cores in enumerate(self.sharing_domains):
            for c in cores:
                if not 0 <= c < n:
                    raise ConfigError(f"core {c} outside 0..{n - 1}")
                if owner[c] != -1:
                    raise ConfigError(f"core {c} appears in domains {owner[c]} and {d}")
                owner[c] = d
        if -1 in owner:
            raise ConfigError(f"core {owner.index(-1)} is in no sharing domain")
        for p in range(self.physical_core_count):
            sib = {owner[c] for c in self.siblings(p * self.smt_ways)}
            if len(sib) != 1:
                raise ConfigError(f"siblings of physical core {p} split across domains {sorted(sib)}")
        object.__setattr__(self, "_domain_of", tuple(owner))

    @property
    def logical_core_count(self):
        return self.physical_core_count * self.smt_ways

    @property
    def domain_count(self):
        return len(self.sharing_domains)

    def physical_core_of(self, core):
        self._check(core)
        return core // self.smt_ways

    def siblings(self, core):
        p = core // self.smt_ways
        return tuple(range(p * self.smt_ways, (p + 1) * self.smt_ways))

    def sharing_domain_of(self, core):
        self._check(core)
        return self._domain_of[core]

    def cores_in_domain(self, domain):
        return self.sharing_domains[domain]

    def _check(self, core):
        if not isinstance(core, int) or not 0 <= core < self.logical_core_count:
            raise ConfigError(f"invalid logical core id {core!r}")


def build_topology(physical_cores, smt_ways, domain_granularity="per_physical_core"):
    if physical_cores < 1 or smt_ways < 1:
        raise ConfigError("physical_cores and smt_ways must both be >= 1")
    if domain_granularity == "per_physical_core":
        domains = tuple(
            tuple(range(p * smt_ways, (p + 1) * smt_ways)) for p in range(physical_cores)
        )
    elif domain_granularity == "global":
        domains = (tuple(range(physical_cores * smt_ways)),)
    else:
        raise ConfigError(f"unknown domain granularity {domain_granularity!r}")
    return Topology(physical_cores, smt_ways, domains)


def sharing_domain_of(topology, core):
    return topology.sharing_domain_of(core)
