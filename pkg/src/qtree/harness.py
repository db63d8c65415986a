"""Offline refinement and end-to-end safety checks over finished traces."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .checker import REPLAY_MISMATCH, Verdict, check_declarative, lemma1_statuses, replay, replay_tree
from .core import SINGLE_DECREE, SMR, Ret
from .labels import Label
from .sim.kernel import Trace

SMR_PROTOCOLS = ("raft", "hotstuff")


def mode_for(protocol: str) -> str:
    return SMR if protocol in SMR_PROTOCOLS else SINGLE_DECREE


def extract(trace: Trace) -> Dict[int, List[Label]]:
    """Linearization-point labels grouped by instance, in trace order."""
    out: Dict[int, List[Label]] = {}
    for event in trace.linpoints():
        out.setdefault(event.label.sn, []).append(event.label)
    return out


@dataclass
class InstanceReport:
    sn: int
    declarative: Verdict
    replay: Verdict
    # set when replay rejects a FAIL label that the declarative rules never see
    unseen_failure: bool = False

    @property
    def concordant(self) -> bool:
        return self.unseen_failure or self.declarative.accepted == self.replay.accepted

    @property
    def passed(self) -> bool:
        return self.declarative.accepted and self.replay.accepted

    def line(self) -> str:
        return (f"instance={self.sn} declarative={self.declarative} "
                f"replay={self.replay} concordant={str(self.concordant).lower()}")


@dataclass
class RefinementReport:
    mode: str
    instances: List[InstanceReport] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(i.passed for i in self.instances)

    @property
    def concordant(self) -> bool:
        return all(i.concordant for i in self.instances)

    def lines(self) -> List[str]:
        return [i.line() for i in self.instances]

    def first_failure(self) -> Optional[InstanceReport]:
        return next((i for i in self.instances if not i.passed), None)


def check_sequences(groups: Dict[int, Sequence[Label]], mode: str) -> RefinementReport:
    report = RefinementReport(mode)
    for sn in sorted(groups):
        seq = list(groups[sn])
        report.instances.append(_check_instance(sn, seq, mode))
    return report


def _check_instance(sn: int, seq: List[Label], mode: str) -> InstanceReport:
    """The declarative rules only speak about successful labels, so they see
    the successful subsequence; a rejection index is mapped back to ``seq``."""
    positions = [i for i, x in enumerate(seq) if x.res is Ret.OK]
    declarative = check_declarative([seq[i] for i in positions], mode)
    if not declarative.accepted:
        declarative = Verdict(False, declarative.rule, positions[declarative.index])
    replayed = replay(seq, mode)
    unseen = (not replayed.accepted and replayed.rule == REPLAY_MISMATCH
              and seq[replayed.index].res is not Ret.OK)
    return InstanceReport(sn, declarative, replayed, unseen)


def check_refinement(trace: Trace, mode: Optional[str] = None) -> RefinementReport:
    mode = mode or trace.header.get("mode") or mode_for(trace.header.get("protocol", ""))
    return check_sequences(extract(trace), mode)


# -- QTree-independent safety ------------------------------------------------------

@dataclass
class SafetyReport:
    violations: List[str] = field(default_factory=list)
    decisions: int = 0

    @property
    def safe(self) -> bool:
        return not self.violations


def _ids(text: Optional[str]) -> frozenset:
    if not text or text == "-":
        return frozenset()
    return frozenset(int(x) for x in text.split(","))


def check_endtoend(trace: Trace, client_values: Optional[Iterable[str]] = None,
                   byzantine: Optional[Iterable[int]] = None) -> SafetyReport:
    """Agreement and validity of the decisions of correct processes.

    Per instance all correct decisions must carry one value; for the
    state-machine protocols the decided entries must also be the same entry
    (same term for Raft, same round for HotStuff), which makes the decided
    logs prefix-compatible.  Every decided value must be a client value.
    """
    header = trace.header
    values = set(client_values if client_values is not None else header.get("values", "").split(","))
    faulty = frozenset(byzantine) if byzantine is not None else _ids(header.get("byzantine"))
    smr = mode_for(header.get("protocol", "")) == SMR
    report = SafetyReport()
    seen: Dict[int, Tuple[str, Optional[str], int]] = {}
    for d in trace.decisions():
        if d.proc in faulty:
            continue
        report.decisions += 1
        if d.value not in values:
            report.violations.append(f"validity: p{d.proc} decided {d.value} for sn={d.sn} at step {d.step}")
        first = seen.setdefault(d.sn, (d.value, d.ident, d.proc))
        if first[0] != d.value or (smr and first[1] != d.ident):
            report.violations.append(
                f"agreement: sn={d.sn} p{first[2]} decided {first[0]}/{first[1]} "
                f"but p{d.proc} decided {d.value}/{d.ident} at step {d.step}"
            )
    return report


def client_accepted(trace: Trace, f: Optional[int] = None) -> Dict[int, str]:
    """Per instance, the value a client accepts: the first one that ``f + 1``
    distinct processes have decided (so at least one of them is correct)."""
    f = int(trace.header.get("f", "0")) if f is None else f
    backers: Dict[Tuple[int, str], set] = {}
    accepted: Dict[int, str] = {}
    for d in trace.decisions():
        if d.sn in accepted:
            continue
        procs = backers.setdefault((d.sn, d.value), set())
        procs.add(d.proc)
        if len(procs) >= f + 1:
            accepted[d.sn] = d.value
    return accepted


def lemma1_matches(seq: Sequence[Label], mode: str) -> bool:
    """Lemma 1 statuses equal the replayed statuses (``seq`` must be correct)."""
    verdict, tree = replay_tree(seq, mode)
    if not verdict:
        raise ValueError(f"sequence is not correct ({verdict})")
    return lemma1_statuses(seq, mode) == tree.statuses()


def format_report(refinement: RefinementReport, safety: Optional[SafetyReport] = None) -> str:
    lines = refinement.lines()
    verdict = "pass" if refinement.passed and refinement.concordant else "fail"
    summary = f"refinement={verdict} instances={len(refinement.instances)} mode={refinement.mode}"
    if safety is not None:
        summary += f" safety={'safe' if safety.safe else 'unsafe'} decisions={safety.decisions}"
        lines += [f"violation {v}" for v in safety.violations]
    return "\n".join([summary] + lines) + "\n"
