"""Leakage reports and the chance-level statistics used to judge them."""
from dataclasses import dataclass, field

from scipy import stats


def chance_interval(trials, chance, confidence=0.99):
    """Central binomial interval (in correct-guess counts) around ``chance``."""
    lo, hi = stats.binom.interval(confidence, trials, chance)
    return int(lo), int(hi)


def at_chance(correct, trials, chance, confidence=0.99):
    lo, hi = chance_interval(trials, chance, confidence)
    return lo <= correct <= hi


def binomial_pvalue(correct, trials, chance):
    return float(stats.binomtest(correct, trials, chance).pvalue)


@dataclass
class LeakageReport:
    scenario: str
    defended: bool
    trials: int
    correct: int
    chance_level: float
    seed: int
    latency_samples: dict = field(default_factory=dict)  # class -> [latency, ...]
    probe_rows: list = field(default_factory=list)  # (trial, line_index, latency, state)
    stage_trace: list = field(default_factory=list)
    victim_training_mutations: int = 0
    scheduler: dict = field(default_factory=dict)
    events: list = field(default_factory=list, repr=False)
    access_log: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        if self.trials <= 0:
            raise ValueError("a leakage report needs at least one trial")
        if not 0 <= self.correct <= self.trials:
            raise ValueError("correct guesses out of range")

    @property
    def guess_accuracy(self):
        return self.correct / self.trials

    def at_chance(self, confidence=0.99):
        return at_chance(self.correct, self.trials, self.chance_level, confidence)

    def to_dict(self):
        medians = {}
        for cls, samples in sorted(self.latency_samples.items()):
            ordered = sorted(samples)
            medians[cls] = ordered[len(ordered) // 2] if ordered else None
        lo, hi = chance_interval(self.trials, self.chance_level)
        return {
            "scenario": self.scenario,
            "defended": self.defended,
            "trials": self.trials,
            "seed": self.seed,
            "correct": self.correct,
            "guess_accuracy": self.guess_accuracy,
            "chance_level": self.chance_level,
            "chance_interval": [lo, hi],
            "at_chance": self.at_chance(),
            "binomial_pvalue": binomial_pvalue(self.correct, self.trials, self.chance_level),
            "victim_training_mutations": self.victim_training_mutations,
            "median_latency": medians,
            "sample_counts": {k: len(v) for k, v in sorted(self.latency_samples.items())},
            "stage_trace_head": [list(s) for s in self.stage_trace[:16]],
            "scheduler": self.scheduler,
        }
