"""Deciding correctness of QTree invocation sequences.

Two independent routes are provided:

* :func:`replay` executes the labels on a fresh :class:`~qtree.core.QTree`
  and compares each recorded result with the actual one.
* :func:`check_declarative` evaluates the structural characterization of
  correct sequences of successful labels (no tree is built).

:func:`lemma1_statuses` recomputes node statuses straight from a sequence,
and :func:`enumerate_sequences` drives exhaustive comparisons.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

from .core import SINGLE_DECREE, NodeStatus, QTree, Ret, UsageError
from .labels import ADD, COMMIT, Label, add, commit
from .rounds import NAT, Round, form_of, is_zero, zero_round

P1_DUP_ADD = "P1-dup-add"
P1_DUP_COMMIT = "P1-dup-commit"
P0_MISSING_ADD = "P0-missing-add"
P2_MISSING_PARENT = "P2-missing-parent"
P2A_VALUE_MISMATCH = "P2a-value-mismatch"
P3_CONFLICT = "P3-conflict"
REPLAY_MISMATCH = "replay-mismatch"

RULES = (
    P1_DUP_ADD, P1_DUP_COMMIT, P0_MISSING_ADD, P2_MISSING_PARENT,
    P2A_VALUE_MISMATCH, P3_CONFLICT, REPLAY_MISMATCH,
)


@dataclass(frozen=True)
class Verdict:
    accepted: bool
    rule: Optional[str] = None
    index: Optional[int] = None

    def __bool__(self) -> bool:
        return self.accepted

    def __str__(self) -> str:
        if self.accepted:
            return "accept"
        return f"reject:{self.rule}:{self.index}"


ACCEPT = Verdict(True)


def reject(rule: str, index: int) -> Verdict:
    return Verdict(False, rule, index)


def _single_instance(seq: Sequence[Label]) -> None:
    if len({label.sn for label in seq}) > 1:
        raise UsageError("sequence mixes several QTree instances")


def _form(seq: Sequence[Label]) -> str:
    return form_of(seq[0].r) if seq else NAT


def check_declarative(seq: Sequence[Label], mode: str = SINGLE_DECREE) -> Verdict:
    """Check a sequence of successful labels against the structural properties.

    The sequence is scanned left to right and the first label at which some
    property can no longer hold is reported.
    """
    _single_instance(seq)
    if any(not label.ok for label in seq):
        raise UsageError("declarative check only takes successful labels")

    added: Dict[Round, Tuple[str, Round]] = {}
    committed: List[Round] = []
    for i, label in enumerate(seq):
        r = label.r
        if label.op == ADD:
            if r in added:
                return reject(P1_DUP_ADD, i)
            rp = label.rp
            if not is_zero(rp):
                if rp not in added or not rp < r:
                    return reject(P2_MISSING_PARENT, i)
                if mode == SINGLE_DECREE and added[rp][0] != label.v:
                    return reject(P2A_VALUE_MISMATCH, i)
            # this add may be the (r', r'') half of a forbidden triple
            if any(rp < c < r for c in committed):
                return reject(P3_CONFLICT, i)
            added[r] = (label.v, rp)
        else:
            if r in committed:
                return reject(P1_DUP_COMMIT, i)
            if r not in added:
                return reject(P0_MISSING_ADD, i)
            if any(parent < r < other for other, (_, parent) in added.items()):
                return reject(P3_CONFLICT, i)
            committed.append(r)
    return ACCEPT


def apply(tree: QTree, label: Label) -> Ret:
    if label.op == ADD:
        return tree.add(label.r, label.v, label.rp)
    return tree.commit(label.r)


def replay_tree(seq: Sequence[Label], mode: str = SINGLE_DECREE) -> Tuple[Verdict, QTree]:
    """Replay ``seq`` and return the verdict with the tree reached.

    On a mismatch the tree is left in the state just before the offending
    label.
    """
    _single_instance(seq)
    tree = QTree(mode, _form(seq))
    for i, label in enumerate(seq):
        probe = tree.copy() if not label.ok else tree
        actual = apply(probe, label)
        if actual is not label.res:
            return reject(REPLAY_MISMATCH, i), tree
    return ACCEPT, tree


def replay(seq: Sequence[Label], mode: str = SINGLE_DECREE) -> Verdict:
    return replay_tree(seq, mode)[0]


def lemma1_statuses(seq: Sequence[Label], mode: str = SINGLE_DECREE) -> Dict[Round, NodeStatus]:
    """Node statuses implied by a correct sequence, computed without a tree.

    A node is COMMITTED if it is the root or its round was committed; else
    GHOST if a node with a strictly greater round lies on another branch;
    else ADDED.
    """
    verdict = check_declarative(seq, mode)
    if not verdict:
        raise ValueError(f"sequence is not correct ({verdict})")
    zero = zero_round(_form(seq))
    parent = {zero: zero}
    for label in seq:
        if label.op == ADD:
            parent[label.r] = label.rp
    committed = {label.r for label in seq if label.op == COMMIT}

    def chain(r):
        out = {r}
        while r != zero:
            r = parent[r]
            out.add(r)
        return out

    chains = {r: chain(r) for r in parent}

    def conflict(a, b):
        return a not in chains[b] and b not in chains[a]

    out = {}
    for r in parent:
        if r == zero or r in committed:
            out[r] = NodeStatus.COMMITTED
        elif any(other > r and conflict(r, other) for other in parent):
            out[r] = NodeStatus.GHOST
        else:
            out[r] = NodeStatus.ADDED
    return out


def label_universe(max_round: int, values: Iterable[str]) -> List[Label]:
    """Every successful label with rounds in 1..max_round and parents below max_round."""
    values = list(values)
    universe = []
    for r in range(1, max_round + 1):
        for v in values:
            for rp in range(0, max_round):
                universe.append(add(r, v, rp))
        universe.append(commit(r))
    return universe


def enumerate_sequences(max_len: int, max_round: int, values: Iterable[str]) -> Iterator[Tuple[Label, ...]]:
    """Yield every sequence of at most ``max_len`` labels from the universe, shortest first."""
    universe = label_universe(max_round, values)
    for length in range(max_len + 1):
        yield from itertools.product(universe, repeat=length)


def count_sequences(max_len: int, max_round: int, n_values: int) -> int:
    size = max_round * n_values * max_round + max_round
    return sum(size ** k for k in range(max_len + 1))


@dataclass
class EquivalenceReport:
    mode: str
    total: int = 0
    accepted: int = 0
    rejected: int = 0
    discordant: List[Tuple[Tuple[Label, ...], Verdict, Verdict]] = field(default_factory=list)


def check_equivalence(max_len: int, max_round: int, values: Sequence[str], mode: str,
                      declarative=check_declarative, replayer=replay) -> EquivalenceReport:
    """Run both checkers on every enumerated sequence and collect disagreements."""
    report = EquivalenceReport(mode)
    for seq in enumerate_sequences(max_len, max_round, values):
        d = declarative(seq, mode)
        p = replayer(seq, mode)
        report.total += 1
        if d.accepted:
            report.accepted += 1
        else:
            report.rejected += 1
        if d.accepted != p.accepted:
            report.discordant.append((seq, d, p))
    return report
