from prefence_sim.modelcheck import check_interleavings

from mutants import PerCoreEnablementScheduler


def test_small_exhaustive_check_is_clean():
    r = check_interleavings(n_tasks=2, max_actions=3)
    assert r.ok and r.states > 100


def test_cross_domain_migration_is_clean():
    r = check_interleavings(n_tasks=2, max_actions=2, physical_cores=2, smt_ways=1)
    assert r.ok


def test_mutant_is_caught():
    r = check_interleavings(n_tasks=2, max_actions=2, scheduler_cls=PerCoreEnablementScheduler)
    assert not r.ok
