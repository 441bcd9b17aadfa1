"""Deliberately broken schedulers used to show the checks can fail."""
from prefence_sim.scheduler import Scheduler


class PerCoreEnablementScheduler(Scheduler):
    """Decides the shared prefetcher from the event's own core only.

    This is the SMT mistake: a sibling that clears its flag, or an unflagged
    task switched in on the sibling, re-enables the prefetcher while a flagged
    task is still running next door.
    """

    def _refresh(self, domains, core):
        d = self.domain_of(core)
        want = not self.mask[core]
        if d.prefetcher.enabled != want:
            d.prefetcher.set_enabled(want)
            self.toggle_counter += 1

    def check_invariants(self):
        pass
