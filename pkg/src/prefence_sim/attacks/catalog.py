"""Declarative catalog of the 13 published prefetching attacks.

Each flow lists the stages it passes through in order, with the context
that executes each one.  ``NOP`` marks a stage slot the attack skips.
Stage contexts come from the published attack descriptions; every ``NOP``
placement is our reading of which optional stage the description omits,
marked ``source="inferred"`` so it can be audited separately.
"""
from collections import Counter
from dataclasses import dataclass, field

S1, S2, S3, S4, S5, NOP = "S1", "S2", "S3", "S4", "S5", "NOP"
STAGE_NAMES = {
    S1: "S1_prepare",
    S2: "S2_reset",
    S3: "S3_train",
    S4: "S4_trigger",
    S5: "S5_extract",
    NOP: "NOP",
}
MANDATORY = (S3, S4, S5)
ATTACKER, VICTIM = "attacker", "victim"
SCOPES = ("SP", "CT", "CP", "KU", "TO")
FAMILIES = ("ip_stride", "sms", "dmp", "xpt")

PUBLISHED_FAMILY_COUNTS = {"ip_stride": 7, "dmp": 4, "sms": 1, "xpt": 1}
PUBLISHED_SCOPE_COUNTS = {"SP": 4, "CT": 2, "CP": 6, "KU": 1, "TO": 1}


@dataclass(frozen=True)
class Stage:
    label: str
    context: str = None
    source: str = "prose"


@dataclass(frozen=True)
class AttackFlow:
    name: str
    family: str
    scopes: tuple
    stages: tuple
    executable: bool = False
    target: str = ""
    scenario: str = ""
    side_channel: bool = True

    def executed(self):
        """Non-NOP (label, context) pairs with consecutive repeats collapsed."""
        out = []
        for st in self.stages:
            if st.label == NOP:
                continue
            entry = (st.label, st.context)
            if not out or out[-1] != entry:
                out.append(entry)
        return out


def _a(label):
    return Stage(label, ATTACKER)


def _v(label):
    return Stage(label, VICTIM)


def _nop():
    return Stage(NOP, None, "inferred")


CATALOG = (
    AttackFlow("Shin et al.", "ip_stride", ("CP",),
               (_a(S1), _a(S2), _v(S3), _v(S4), _a(S5)),
               executable=True, target="OpenSSL ECDH", scenario="shin"),
    AttackFlow("Augury OOB", "dmp", ("SP",),
               (_a(S1), _a(S2), _v(S3), _v(S4), _a(S5)), target="Custom"),
    AttackFlow("Augury SLH", "dmp", ("SP",),
               (_nop(), _nop(), _v(S3), _v(S4), _a(S5)), target="Custom"),
    AttackFlow("Augury Addr.", "dmp", ("SP",),
               (_a(S1), _a(S2), _v(S3), _v(S4), _a(S5)), target="---"),
    AttackFlow("AfterImage Var. 1", "ip_stride", ("CT", "CP"),
               (_a(S1), _a(S2), _a(S3), _v(S3), _v(S4), _a(S5)),
               executable=True, target="Custom", scenario="afterimage_v1"),
    AttackFlow("AfterImage Var. 2", "ip_stride", ("KU",),
               (_a(S1), _nop(), _a(S3), _v(S3), _v(S4), _a(S5)), target="Custom"),
    AttackFlow("AfterImage SGX", "ip_stride", ("TO",),
               (_nop(), _nop(), _v(S3), _v(S4), _a(S5)), target="Custom"),
    AttackFlow("AfterImage RSA", "ip_stride", ("CT",),
               (_a(S1), _nop(), _a(S3), _v(S3), _a(S4), _a(S5)), target="MbedTLS RSA"),
    AttackFlow("AfterImage Sync", "ip_stride", ("CP",),
               (_a(S1), _nop(), _a(S3), _v(S3), _a(S4), _a(S5)), target="OpenSSL RSA"),
    AttackFlow("Xiao et al.", "ip_stride", ("SP",),
               (_a(S1), _a(S2), _v(S3), _v(S4), _a(S5)), target="AES"),
    AttackFlow("FetchBench AES", "sms", ("CP",),
               (_a(S1), _a(S2), _v(S3), _a(S4), _a(S5)),
               executable=True, target="MbedTLS AES", scenario="sms"),
    AttackFlow("PrefetchX", "xpt", ("CP",),
               (_nop(), _a(S2), _a(S3), _v(S3), _a(S4), _a(S5)),
               target="MbedTLS RSA, GnuPG RSA"),
    AttackFlow("GoFetch", "dmp", ("CP",),
               (_a(S1), _a(S2), _v(S3), _v(S4), _a(S5)),
               executable=True, target="Go RSA, OpenSSL DHKE, CRYSTALS", scenario="dmp"),
)

# Stage flows of the executable scenarios as the simulator runs them.  The
# AfterImage scenario triggers from the attacker's own pattern (confidence
# lowering), so its S4 runs in the attacker context.
SCENARIO_FLOWS = {
    "shin": CATALOG[0],
    "afterimage_v1": AttackFlow(
        "AfterImage Var. 1 (simulated)", "ip_stride", ("CP",),
        (_a(S1), _a(S2), _a(S3), _v(S3), _a(S4), _a(S5)), executable=True,
        scenario="afterimage_v1"),
    "sms": CATALOG[10],
    "dmp": CATALOG[12],
    "smt_bypass": AttackFlow(
        "SMT sibling re-enable", "ip_stride", ("CT",),
        (_nop(), _a(S2), _v(S3), _v(S4), _a(S5)), executable=True, scenario="smt_bypass"),
}


@dataclass
class CatalogReport:
    flows: int
    violations: list = field(default_factory=list)  # (flow name, reason)
    family_counts: dict = field(default_factory=dict)
    scope_counts: dict = field(default_factory=dict)
    counts_match_published: bool = False

    @property
    def valid(self):
        return self.flows - len({name for name, _ in self.violations})

    @property
    def ok(self):
        return not self.violations

    def summary_line(self):
        return f"{self.valid}/{self.flows} flows valid"


def check_flow(flow):
    """List of invariant violations for one flow (empty when valid)."""
    problems = []
    if flow.family not in FAMILIES:
        problems.append(f"unknown prefetcher family {flow.family!r}")
    if not flow.scopes or any(s not in SCOPES for s in flow.scopes):
        problems.append(f"scope labels {flow.scopes} not in {SCOPES}")
    for st in flow.stages:
        if st.label not in STAGE_NAMES:
            problems.append(f"unknown stage label {st.label!r}")
        elif st.label != NOP and st.context not in (ATTACKER, VICTIM):
            problems.append(f"stage {st.label} has no executing context")
    present = {st.label for st in flow.stages}
    for label in MANDATORY:
        if label not in present:
            problems.append(f"missing mandatory stage {STAGE_NAMES[label]}")
    if flow.side_channel and S3 in present:
        if not any(st.label == S3 and st.context == VICTIM for st in flow.stages):
            problems.append("S3_train never executes in the victim context")
    return problems


def validate_catalog(catalog=CATALOG):
    catalog = list(catalog)
    report = CatalogReport(flows=len(catalog))
    families = Counter()
    scopes = Counter()
    for flow in catalog:
        for problem in check_flow(flow):
            report.violations.append((flow.name, problem))
        families[flow.family] += 1
        for s in flow.scopes:
            scopes[s] += 1
    report.family_counts = dict(sorted(families.items()))
    report.scope_counts = dict(sorted(scopes.items()))
    report.counts_match_published = (
        len(catalog) == 13
        and dict(families) == PUBLISHED_FAMILY_COUNTS
        and dict(scopes) == PUBLISHED_SCOPE_COUNTS
    )
    return report


def flows_to_json(catalog=CATALOG):
    return [
        {
            "name": f.name,
            "family": f.family,
            "scopes": list(f.scopes),
            "stages": [[s.label, s.context, s.source] for s in f.stages],
            "executable": f.executable,
            "target": f.target,
            "side_channel": f.side_channel,
        }
        for f in catalog
    ]


def flows_from_json(items):
    flows = []
    for item in items:
        flows.append(AttackFlow(
            item["name"], item["family"], tuple(item["scopes"]),
            tuple(Stage(*s) for s in item["stages"]),
            executable=item.get("executable", False), target=item.get("target", ""),
            side_channel=item.get("side_channel", True)))
    return flows
