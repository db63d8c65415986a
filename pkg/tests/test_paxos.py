import pytest

from qtree.figures import scenario_trace
from qtree.harness import check_endtoend, check_refinement, extract
from qtree.labels import add, commit
from qtree.sim.config import FaultPlan, SimConfig
from qtree.sim.kernel import Kernel, deliver, run, timeout

from sweeps import Family, sweep_family


def paxos(**kw):
    return SimConfig(protocol="paxos", **kw)


class TestSingleDecree:
    def test_fault_free_run_decides_one_value(self):
        trace = run(paxos(seed=1))
        values = {d.value for d in trace.decisions()}
        assert len(values) == 1 and values <= {"v1", "v2", "v3"}

    def test_fig3_linearization_points(self):
        trace = scenario_trace("fig3")
        assert extract(trace)[0] == [add(1, "v1", 0), add(3, "v2", 0), add(2, "v1", 1), commit(3)]
        assert [(d.proc, d.value) for d in trace.decisions()] == [(3, "v2")]

    def test_add_precedes_propose_and_commit_precedes_decide(self):
        trace = run(paxos(seed=4))
        for i, e in enumerate(trace.events):
            if e.kind == "decide":
                before = trace.events[i - 1]
                assert before.kind == "linpoint" and before.label.op == "commit"

    def test_rounds_are_owned_by_their_leader(self):
        kernel = Kernel(paxos(n=3))
        p2 = kernel.processes[2]
        assert p2.next_round() == 2
        p2.max_joined = 4
        assert p2.next_round() == 5
        with pytest.raises(RuntimeError):
            p2.start_round(3)

    def test_no_vote_below_joined_round(self):
        # p2 joins round 2, then sees round 1's proposal and must refuse to vote
        script = (timeout(1), deliver(1, 1, "START"), deliver(1, 2, "START"),
                  deliver(1, 1, "JOIN"), deliver(2, 1, "JOIN"),
                  timeout(2), deliver(2, 2, "START"),
                  deliver(1, 2, "PROPOSE", r=1))
        kernel = Kernel(paxos(schedule=script))
        kernel.run()
        assert kernel.processes[2].votes == {}
        assert not kernel.processes[2].may_vote(1, 0)
        assert kernel.processes[2].may_vote(2, 0)

    def test_leader_adopts_reported_vote(self):
        # p1 gets v1 voted by p2; p3's round-3 quorum includes p2's report
        script = (timeout(1), deliver(1, 1, "START"), deliver(1, 2, "START"),
                  deliver(1, 1, "JOIN"), deliver(2, 1, "JOIN"),
                  deliver(1, 2, "PROPOSE"),
                  timeout(3), deliver(3, 2, "START"), deliver(3, 3, "START"),
                  deliver(2, 3, "JOIN"), deliver(3, 3, "JOIN"))
        trace = run(paxos(schedule=script))
        assert extract(trace)[0][-1] == add(3, "v1", 1)

    @pytest.mark.parametrize("crash", [{}, {1: 10}, {3: 0}])
    def test_minority_crash_sweep(self, crash):
        for seed in range(30):
            trace = run(paxos(seed=seed, faults=FaultPlan(drop_prob=0.1, crash_at=crash)))
            assert check_refinement(trace).passed
            assert check_endtoend(trace).safe


class TestMultiPaxos:
    def test_every_instance_decided_fault_free(self):
        trace = run(SimConfig(protocol="multipaxos", instances=3, seed=2))
        assert {d.sn for d in trace.decisions()} == {0, 1, 2}

    def test_small_sweep_clean(self):
        for n in (3, 4, 5):
            res = sweep_family(Family(f"mp{n}", "multipaxos", n, f=(n - 1) // 2, instances=3), range(15))
            assert not res.refinement_failures and not res.safety_violations and not res.discordant

    def test_instances_get_their_own_trees(self):
        trace = run(SimConfig(protocol="multipaxos", instances=2, seed=0))
        groups = extract(trace)
        assert set(groups) <= {0, 1}
        assert all(label.sn == sn for sn, seq in groups.items() for label in seq)
