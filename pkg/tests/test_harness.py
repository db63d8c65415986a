import pytest

from qtree.core import SINGLE_DECREE, SMR
from qtree.harness import (
    check_endtoend, check_refinement, check_sequences, extract, format_report, lemma1_matches, mode_for,
)
from qtree.labels import add, commit
from qtree.sim.kernel import parse_trace

HEADER = "# protocol={p} n=3 f=1 seed=0 mode={m} byzantine={b} values=v1,v2\n"


def trace_of(body, protocol="paxos", byzantine="-"):
    return parse_trace(HEADER.format(p=protocol, m=mode_for(protocol), b=byzantine) + body)


class TestExtract:
    def test_groups_by_instance_in_trace_order(self):
        trace = trace_of(
            "step=1 kind=linpoint proc=1 sn=2 op=add r=1 v=v1 rp=0 res=OK\n"
            "step=2 kind=linpoint proc=1 sn=1 op=add r=1 v=v2 rp=0 res=OK\n"
            "step=3 kind=linpoint proc=1 sn=2 op=commit r=1 res=OK\n", protocol="pbft")
        assert extract(trace) == {2: [add(1, "v1", 0, sn=2), commit(1, sn=2)], 1: [add(1, "v2", 0, sn=1)]}

    def test_empty(self):
        assert extract(trace_of("")) == {}

    def test_single_instance_protocols_use_instance_zero(self):
        trace = trace_of("step=1 kind=linpoint proc=1 op=add r=1 v=v1 rp=0 res=OK\n")
        assert list(extract(trace)) == [0]


class TestRefinement:
    def test_two_commits_same_round(self):
        trace = trace_of(
            "step=1 kind=linpoint proc=1 op=add r=1 v=v1 rp=0 res=OK\n"
            "step=2 kind=linpoint proc=1 op=commit r=1 res=OK\n"
            "step=3 kind=linpoint proc=2 op=commit r=1 res=OK\n")
        report = check_refinement(trace)
        assert not report.passed and report.concordant
        assert report.lines() == [
            "instance=0 declarative=reject:P1-dup-commit:2 replay=reject:replay-mismatch:2 concordant=true"
        ]
        assert report.first_failure().sn == 0

    def test_mode_from_header_or_protocol(self):
        body = ("step=1 kind=linpoint proc=1 op=add r=1 v=v1 rp=0 res=OK\n"
                "step=2 kind=linpoint proc=1 op=add r=2 v=v2 rp=1 res=OK\n")
        assert not check_refinement(trace_of(body)).passed
        assert check_refinement(trace_of(body, protocol="raft")).passed
        assert check_refinement(trace_of(body), mode=SMR).passed

    def test_mode_for(self):
        assert [mode_for(p) for p in ("paxos", "multipaxos", "pbft", "raft", "hotstuff")] == \
            [SINGLE_DECREE] * 3 + [SMR] * 2

    def test_format_report(self):
        report = check_sequences({0: [add(1, "v", 0), commit(1)]}, SINGLE_DECREE)
        text = format_report(report)
        assert text.splitlines()[0] == "refinement=pass instances=1 mode=single-decree"


class TestEndToEnd:
    def test_agreement_violation(self):
        trace = trace_of("step=1 kind=decide proc=1 sn=0 v=v1 id=1\nstep=2 kind=decide proc=2 sn=0 v=v2 id=2\n")
        report = check_endtoend(trace)
        assert not report.safe and report.violations[0].startswith("agreement")

    def test_validity_violation(self):
        report = check_endtoend(trace_of("step=1 kind=decide proc=1 sn=0 v=evil id=1\n"))
        assert [v.split(":")[0] for v in report.violations] == ["validity"]

    def test_byzantine_decisions_ignored(self):
        trace = trace_of("step=1 kind=decide proc=1 sn=0 v=v1 id=1\nstep=2 kind=decide proc=2 sn=0 v=evil id=2\n",
                         protocol="pbft", byzantine="2")
        assert check_endtoend(trace).safe

    def test_smr_requires_same_entry(self):
        body = "step=1 kind=decide proc=1 sn=0 v=v1 id=1\nstep=2 kind=decide proc=2 sn=0 v=v1 id=2\n"
        assert check_endtoend(trace_of(body, protocol="paxos")).safe
        assert not check_endtoend(trace_of(body, protocol="raft")).safe


class TestLemma1:
    def test_matches_on_correct_sequence(self):
        assert lemma1_matches([add(1, "a", 0), add(2, "b", 0)], SINGLE_DECREE)

    def test_refuses_incorrect_sequence(self):
        with pytest.raises(ValueError):
            lemma1_matches([commit(1)], SINGLE_DECREE)
