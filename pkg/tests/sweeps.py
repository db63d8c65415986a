"""The seed sweep matrix shared by the sweep tests and the acceptance suite."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

from qtree.harness import check_endtoend, check_refinement, lemma1_matches
from qtree.sim.config import STRATEGIES, FaultPlan, SimConfig
from qtree.sim.kernel import run

DROPS = (0.0, 0.1, 0.3)
DUPLICATE = 0.1


@dataclass(frozen=True)
class Family:
    """One protocol setting swept over seeds and drop probabilities."""

    name: str
    protocol: str
    n: int
    f: int = 1
    instances: int = 1
    strategy: Optional[str] = None

    @property
    def crashes(self) -> bool:
        return self.protocol in ("paxos", "multipaxos", "raft")

    def faults(self, seed: int, drop: float) -> FaultPlan:
        kw = {}
        if self.strategy is not None:
            # the leader of round 1 is the faulty process, the harshest placement
            kw.update(byzantine=frozenset({1}), strategy=self.strategy)
        if self.crashes and seed % 3:
            rng = random.Random(f"{self.name}/{seed}")
            victims = rng.sample(range(1, self.n + 1), self.f)
            kw["crash_at"] = {p: rng.randrange(5, 150) for p in victims}
        return FaultPlan(drop_prob=drop, duplicate_prob=DUPLICATE, **kw)

    def config(self, seed: int, drop: float) -> SimConfig:
        return SimConfig(protocol=self.protocol, n=self.n, f=self.f, seed=seed,
                         instances=self.instances, faults=self.faults(seed, drop))


def families() -> List[Family]:
    out = [Family("paxos-n3", "paxos", 3)]
    out += [Family(f"multipaxos-n{n}", "multipaxos", n, f=(n - 1) // 2, instances=3) for n in (3, 4, 5)]
    out += [Family(f"raft-n{n}", "raft", n, f=(n - 1) // 2) for n in (3, 5)]
    for proto in ("pbft", "hotstuff"):
        out.append(Family(f"{proto}-n4", proto, 4))
        out += [Family(f"{proto}-n4-{s}", proto, 4, strategy=s) for s in STRATEGIES]
    return out


@dataclass
class FamilyResult:
    family: Family
    runs: int = 0
    sequences: int = 0
    decisions: int = 0
    refinement_failures: List[Tuple[int, float, str]] = field(default_factory=list)
    discordant: List[Tuple[int, float, str]] = field(default_factory=list)
    safety_violations: List[Tuple[int, float, str]] = field(default_factory=list)
    lemma1_prefixes: int = 0
    lemma1_mismatches: List[Tuple[int, float, int]] = field(default_factory=list)


def sweep_family(family: Family, seeds: range, lemma1_samples: int = 1) -> FamilyResult:
    """Run every (seed, drop) pair; Lemma 1 is checked on sampled accepted prefixes."""
    res = FamilyResult(family)
    for seed in seeds:
        for drop in DROPS:
            trace = run(family.config(seed, drop))
            report = check_refinement(trace)
            safety = check_endtoend(trace)
            res.runs += 1
            res.decisions += safety.decisions
            res.sequences += len(report.instances)
            for inst in report.instances:
                if not inst.passed:
                    res.refinement_failures.append((seed, drop, inst.line()))
                if not inst.concordant:
                    res.discordant.append((seed, drop, inst.line()))
            res.safety_violations += [(seed, drop, v) for v in safety.violations]
            if report.passed:
                rng = random.Random(f"lemma1/{family.name}/{seed}/{drop}")
                for sn, seq in _groups(trace).items():
                    for _ in range(lemma1_samples):
                        k = rng.randint(0, len(seq))
                        res.lemma1_prefixes += 1
                        if not lemma1_matches(seq[:k], report.mode):
                            res.lemma1_mismatches.append((seed, drop, k))
    return res


def _groups(trace):
    from qtree.harness import extract
    return extract(trace)
