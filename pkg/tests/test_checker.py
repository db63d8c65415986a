import itertools

import pytest
from hypothesis import given, settings, strategies as st

from qtree.checker import (
    P0_MISSING_ADD, P1_DUP_ADD, P1_DUP_COMMIT, P2A_VALUE_MISMATCH, P2_MISSING_PARENT, P3_CONFLICT,
    REPLAY_MISMATCH, check_declarative, check_equivalence, count_sequences, enumerate_sequences,
    label_universe, lemma1_statuses, replay, replay_tree,
)
from qtree.core import SINGLE_DECREE, SMR, Ret, UsageError
from qtree.labels import LabelParseError, add, commit, format_sequence, parse_label, parse_sequence
from qtree.rounds import PAIR_ZERO

from oracles import oracle_accepts, oracle_statuses

FIG2 = [add(1, "v1", 0), add(3, "v2", 0), add(2, "v1", 1), commit(3)]


class TestLabels:
    def test_text_roundtrip(self):
        seq = FIG2 + [add((1, 2), "x", PAIR_ZERO, sn=4), commit(2, res=Ret.FAIL)]
        assert parse_sequence(format_sequence(seq)) == seq

    def test_str_form(self):
        assert [str(x) for x in FIG2] == ["add(1,v1,0)", "add(3,v2,0)", "add(2,v1,1)", "commit(3)"]
        assert str(commit(2, res=Ret.FAIL)) == "commit(2)=>FAIL"

    def test_parse_errors_carry_line_numbers(self):
        with pytest.raises(LabelParseError, match="line 2"):
            parse_sequence("op=commit r=1\nop=add r=2\n")
        with pytest.raises(LabelParseError, match="line 1"):
            parse_sequence("op=jump r=1\n")

    def test_comments_and_blank_lines_skipped(self):
        assert parse_sequence("# nothing\n\n") == []

    def test_zero_round_label_rejected(self):
        with pytest.raises(ValueError):
            commit(0)
        with pytest.raises(LabelParseError):
            parse_label("op=commit r=0")


class TestDeclarative:
    def test_walkthrough_accepted(self):
        assert check_declarative(FIG2)
        assert replay(FIG2)

    def test_empty_sequence_is_correct(self):
        assert check_declarative([]) and replay([])

    @pytest.mark.parametrize("seq, rule, index", [
        ([add(1, "a", 0), add(1, "a", 0)], P1_DUP_ADD, 1),
        ([add(1, "a", 0), commit(1), commit(1)], P1_DUP_COMMIT, 2),
        ([commit(1)], P0_MISSING_ADD, 0),
        ([add(2, "a", 1)], P2_MISSING_PARENT, 0),
        ([add(2, "a", 0), add(1, "a", 2)], P2_MISSING_PARENT, 1),
        ([add(1, "a", 0), add(2, "b", 1)], P2A_VALUE_MISMATCH, 1),
        ([add(1, "a", 0), commit(1), add(2, "b", 0)], P3_CONFLICT, 2),
        ([add(1, "a", 0), add(2, "b", 0), commit(1)], P3_CONFLICT, 2),
    ])
    def test_rejections(self, seq, rule, index):
        verdict = check_declarative(seq)
        assert (verdict.rule, verdict.index) == (rule, index)
        assert str(verdict) == f"reject:{rule}:{index}"
        assert not replay(seq)

    def test_value_mismatch_allowed_in_smr(self):
        assert check_declarative([add(1, "a", 0), add(2, "b", 1)], SMR)

    def test_refuses_failed_labels_and_mixed_instances(self):
        with pytest.raises(UsageError):
            check_declarative([commit(1, res=Ret.FAIL)])
        with pytest.raises(UsageError):
            check_declarative([add(1, "a", 0, sn=0), add(1, "a", 0, sn=1)])


class TestReplay:
    def test_failed_label_must_really_fail(self):
        assert replay([commit(1, res=Ret.FAIL)])
        verdict = replay([add(1, "a", 0, res=Ret.FAIL)])
        assert (verdict.rule, verdict.index) == (REPLAY_MISMATCH, 0)

    def test_failed_label_does_not_change_tree(self):
        verdict, tree = replay_tree([add(1, "a", 0), add(1, "a", 0, res=Ret.FAIL)])
        assert verdict and sorted(tree.nodes) == [0, 1]

    def test_pair_rounds(self):
        seq = [add((1, 0), "a", PAIR_ZERO), add((1, 1), "b", (1, 0)), commit((1, 1))]
        assert replay(seq, SMR) and check_declarative(seq, SMR)


class TestLemma1:
    def test_walkthrough_statuses(self):
        statuses = {r: s.value for r, s in lemma1_statuses(FIG2).items()}
        assert statuses == {0: "COMMITTED", 1: "GHOST", 2: "GHOST", 3: "COMMITTED"}

    def test_rejects_incorrect_sequence(self):
        with pytest.raises(ValueError):
            lemma1_statuses([commit(1)])


class TestEnumeration:
    def test_universe_bounds(self):
        universe = label_universe(3, ["a", "b"])
        assert len(universe) == 3 * 2 * 3 + 3
        assert {x.rp for x in universe if x.op == "add"} == {0, 1, 2}

    def test_counts_match_enumeration(self):
        assert sum(1 for _ in enumerate_sequences(2, 2, ["a"])) == count_sequences(2, 2, 1)
        assert count_sequences(0, 3, 2) == 1

    def test_small_exhaustive_equivalence(self):
        for mode in (SINGLE_DECREE, SMR):
            report = check_equivalence(3, 3, ["a", "b"], mode)
            assert report.discordant == []
            assert report.accepted + report.rejected == report.total

    def test_broken_checker_is_reported(self):
        always = lambda seq, mode: replay([], mode)
        report = check_equivalence(1, 1, ["a"], SINGLE_DECREE, declarative=always)
        assert [tuple(map(str, seq)) for seq, _, _ in report.discordant] == [("commit(1)",)]


# -- properties against the independent reference model ---------------------

UNIVERSE = label_universe(4, ["a", "b"])
labels = st.sampled_from(UNIVERSE + [x.with_result(Ret.FAIL) for x in UNIVERSE])
modes = st.sampled_from([SINGLE_DECREE, SMR])


class TestProperties:
    @settings(max_examples=400, deadline=None)
    @given(st.lists(labels, max_size=8), modes)
    def test_replay_agrees_with_reference(self, seq, mode):
        assert replay(seq, mode).accepted == oracle_accepts(seq, mode == SINGLE_DECREE)[0]

    @settings(max_examples=400, deadline=None)
    @given(st.lists(st.sampled_from(UNIVERSE), max_size=8), modes)
    def test_declarative_agrees_with_replay(self, seq, mode):
        d, r = check_declarative(seq, mode), replay(seq, mode)
        assert d.accepted == r.accepted
        if not d.accepted:
            # both stop at the same label
            assert d.index == r.index

    @settings(max_examples=300, deadline=None)
    @given(st.lists(st.sampled_from(UNIVERSE), max_size=8), modes)
    def test_prefix_closed(self, seq, mode):
        if check_declarative(seq, mode):
            for k in range(len(seq)):
                assert check_declarative(seq[:k], mode)

    @settings(max_examples=300, deadline=None)
    @given(st.lists(st.sampled_from(UNIVERSE), max_size=8), modes)
    def test_lemma1_matches_tree_and_reference(self, seq, mode):
        verdict, tree = replay_tree(seq, mode)
        if verdict:
            lemma = lemma1_statuses(seq, mode)
            assert lemma == tree.statuses()
            assert {r: s.value for r, s in lemma.items()} == oracle_statuses(seq, mode == SINGLE_DECREE)

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.sampled_from(UNIVERSE), max_size=8))
    def test_single_decree_agreement(self, seq):
        """Committed nodes of a correct single-decree sequence all carry one value."""
        if check_declarative(seq, SINGLE_DECREE):
            _, tree = replay_tree(seq, SINGLE_DECREE)
            values = {n.value for r, n in tree.nodes.items() if r and n.status.value == "COMMITTED"}
            assert len(values) <= 1

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.sampled_from(UNIVERSE), max_size=8), modes)
    def test_committed_nodes_lie_on_trunk(self, seq, mode):
        verdict, tree = replay_tree(seq, mode)
        if verdict:
            committed = {r for r, n in tree.nodes.items() if n.status.value == "COMMITTED"}
            assert committed <= set(tree.trunk())


def test_exhaustive_length_two_against_reference():
    for mode in (SINGLE_DECREE, SMR):
        for seq in itertools.product(UNIVERSE, repeat=2):
            assert replay(list(seq), mode).accepted == oracle_accepts(seq, mode == SINGLE_DECREE)[0]


def test_pinned_enumeration_count():
    # regression value: 1 + 21 + 21**2 + 21**3 sequences of at most 3 labels
    assert sum(1 for _ in enumerate_sequences(3, 3, ["a", "b"])) == 9724
    assert list(enumerate_sequences(1, 1, ["a"])) == [(), (add(1, "a", 0),), (commit(1),)]
