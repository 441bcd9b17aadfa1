import pytest

from prefence_sim.attacks import (SCENARIO_FLOWS, run_afterimage_v1, run_dmp, run_scenario,
                                  run_shin, run_smt_bypass_regression, run_sms)
from prefence_sim.attacks.leakage import LeakageReport, at_chance, chance_interval
from prefence_sim.attacks.scenarios import dmp_victim_section, irregular_permutation
from prefence_sim.config import MachineConfig
from prefence_sim.errors import ConfigError
from prefence_sim.rng import XorShift64Star

from mutants import PerCoreEnablementScheduler

TRIALS = 300


def test_chance_interval_is_binomial():
    lo, hi = chance_interval(1000, 0.5)
    assert (lo, hi) == (459, 541)
    assert at_chance(500, 1000, 0.5) and not at_chance(990, 1000, 0.5)


def test_report_guards():
    with pytest.raises(ValueError):
        LeakageReport("x", False, 0, 0, 0.5, 1)
    with pytest.raises(ValueError):
        LeakageReport("x", False, 10, 11, 0.5, 1)


def test_irregular_permutation_has_no_repeated_delta():
    p = irregular_permutation(XorShift64Star(3), 16)
    d = [b - a for a, b in zip(p, p[1:])]
    assert sorted(p) == list(range(16))
    assert all(x != y for x, y in zip(d, d[1:]))


def test_shin_leaks_without_defense():
    r = run_shin(False, TRIALS, seed=1)
    assert r.guess_accuracy == 1.0
    assert r.latency_samples["bit1"] and set(r.latency_samples["bit1"]) == {96}
    assert r.victim_training_mutations > 0


def test_shin_defended_is_at_chance():
    r = run_shin(True, TRIALS, seed=1)
    assert r.at_chance()
    assert {x for v in r.latency_samples.values() for x in v} == {340}
    assert r.victim_training_mutations == 0


def test_shin_single_trial_is_reproducible():
    a, b = run_shin(False, 1, seed=99), run_shin(False, 1, seed=99)
    assert a.to_dict() == b.to_dict()


def test_afterimage():
    assert run_afterimage_v1(False, TRIALS, seed=2).guess_accuracy == 1.0
    assert run_afterimage_v1(True, TRIALS, seed=2).at_chance()
    assert run_afterimage_v1(False, TRIALS, seed=2, collide=False).at_chance()


def test_sms():
    r = run_sms(False, TRIALS, seed=3)
    assert r.guess_accuracy == 1.0 and r.chance_level == 1 / 16
    assert run_sms(True, TRIALS, seed=3).at_chance()
    assert run_sms(False, TRIALS, seed=3, trigger_offset=8).at_chance()


def test_dmp():
    assert run_dmp(False, TRIALS, seed=4).guess_accuracy == 1.0
    assert run_dmp(True, TRIALS, seed=4).at_chance()


def test_dmp_victim_is_constant_time():
    zero, one = dmp_victim_section(0), dmp_victim_section(1)
    strip = lambda sec: [(type(a).__name__, a.vaddr) for a in sec]
    assert strip(zero) == strip(one)
    assert zero[0].value != one[0].value


def test_smt_bypass():
    assert run_smt_bypass_regression(TRIALS, seed=5, protect=True).at_chance()
    assert run_smt_bypass_regression(TRIALS, seed=5, protect=False).guess_accuracy == 1.0
    mutant = run_smt_bypass_regression(TRIALS, seed=5, scheduler_cls=PerCoreEnablementScheduler)
    assert mutant.guess_accuracy == 1.0


@pytest.mark.parametrize("name", sorted(SCENARIO_FLOWS))
def test_stage_trace_follows_declared_flow(name):
    r = run_scenario(name, defended=False, trials=3, seed=6)
    assert r.stage_trace[:len(SCENARIO_FLOWS[name].executed())] == SCENARIO_FLOWS[name].executed()


def test_scenario_errors():
    with pytest.raises(ConfigError, match="unknown scenario"):
        run_scenario("spectre", trials=1)
    with pytest.raises(ConfigError, match="needs the ip_stride"):
        run_shin(trials=1, machine=MachineConfig(family="dmp"))
    with pytest.raises(ConfigError):
        run_smt_bypass_regression(1, machine=MachineConfig(physical_cores=2, smt_ways=1))


def test_noise_lowers_accuracy_but_stays_seeded():
    m = MachineConfig(sets=4, ways=2, noise_flush_probability=1.0)
    a = run_shin(False, 200, seed=8, machine=m)
    b = run_shin(False, 200, seed=8, machine=m)
    assert a.to_dict() == b.to_dict()
    assert a.guess_accuracy < 1.0
