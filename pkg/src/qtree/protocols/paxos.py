"""Single-decree Paxos and Multi-Paxos with configurable phase quorums.

Linearization points are emitted by the leader itself:

* ``add(r, v, r')`` when it broadcasts ``PROPOSE(r)`` carrying ``v``, where
  ``r'`` is the highest vote round reported by its JOIN quorum;
* ``commit(r)`` when it updates ``decidedVal`` after a VOTE quorum.

Multi-Paxos keeps one QTree instance per sequence number ``sn`` (numbered
from 0).  A leader sends one START per round; JOINs carry the vote of every
instance and the leader then proposes instances one at a time, moving on
to ``sn + 1`` in the same round right after deciding ``sn``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from ..labels import add as add_label, commit as commit_label
from ..sim.config import SimConfig
from ..sim.kernel import Context, Message, Payload, Process
from .common import QuorumTracker, client_value
from .registry import ProtocolSpec


# -- payloads --------------------------------------------------------------

@dataclass(frozen=True)
class Start(Payload):
    kind = "START"
    r: int


@dataclass(frozen=True)
class Join(Payload):
    kind = "JOIN"
    r: int
    vr: int
    vv: Optional[str]


@dataclass(frozen=True)
class MultiJoin(Payload):
    """JOIN carrying the (round, value) vote of every instance the sender voted in."""

    kind = "JOIN"
    r: int
    votes: Tuple[Tuple[int, int, str], ...]

    def summary_fields(self):
        text = ",".join(f"{sn}:{vr}:{vv}" for sn, vr, vv in self.votes) or "-"
        return [("r", str(self.r)), ("votes", text)]


@dataclass(frozen=True)
class Propose(Payload):
    kind = "PROPOSE"
    r: int
    v: str


@dataclass(frozen=True)
class MultiPropose(Payload):
    kind = "PROPOSE"
    r: int
    v: str
    sn: int


@dataclass(frozen=True)
class Vote(Payload):
    kind = "VOTE"
    r: int


@dataclass(frozen=True)
class MultiVote(Payload):
    kind = "VOTE"
    r: int
    sn: int


# -- process ---------------------------------------------------------------

@dataclass
class LeaderRound:
    """What a leader knows about one of its own rounds."""

    selection: Dict[int, Tuple[int, Optional[str]]]
    proposed: Dict[int, str]
    decided: set


class PaxosProcess(Process):
    """Acceptor and (for its own rounds) proposer.

    Process ``p`` leads the rounds ``r`` with ``(r - 1) % n + 1 == p``.
    """

    multi = False

    def __init__(self, pid: int, ctx: Context, config: SimConfig):
        super().__init__(pid, ctx, config)
        self.max_joined = 0
        # per instance: (maxVotedRound, maxVotedValue)
        self.votes: Dict[int, Tuple[int, Optional[str]]] = {}
        self.voted_in: set = set()
        self.decided_val: Dict[int, str] = {}
        self.last_started = 0
        self.joins = QuorumTracker()
        self.vote_msgs = QuorumTracker()
        self.rounds: Dict[int, LeaderRound] = {}

    @property
    def instances(self) -> List[int]:
        return list(range(self.config.instances)) if self.multi else [0]

    # -- proposer side -------------------------------------------------------

    def next_round(self) -> int:
        r = max(self.last_started, self.max_joined) + 1
        while self.config.leader(r) != self.pid:
            r += 1
        return r

    def wants_timeout(self) -> bool:
        undecided = any(sn not in self.decided_val for sn in self.instances)
        return undecided and self.next_round() <= self.config.max_round

    def on_timeout(self) -> None:
        r = self.next_round()
        if r > self.config.max_round:
            return
        self.start_round(r)

    def start_round(self, r: int) -> None:
        if self.config.leader(r) != self.pid:
            raise RuntimeError(f"process {self.pid} does not lead round {r}")
        self.last_started = r
        self.ctx.broadcast(Start(r))

    def select(self, joins: Tuple[Message, ...]) -> Dict[int, Tuple[int, Optional[str]]]:
        """Per instance, the highest-round vote reported by the JOIN quorum."""
        best: Dict[int, Tuple[int, Optional[str]]] = {}
        for m in joins:
            for sn, vr, vv in self.reported(m.payload):
                if vr > best.get(sn, (0, None))[0]:
                    best[sn] = (vr, vv)
                elif vr and vr == best[sn][0] and vv != best[sn][1]:
                    # one leader proposes one value per (round, sn)
                    raise AssertionError(f"round {vr} reported with two values for sn={sn}")
        return best

    @staticmethod
    def reported(join) -> List[Tuple[int, int, Optional[str]]]:
        if isinstance(join, MultiJoin):
            return list(join.votes)
        return [(0, join.vr, join.vv)] if join.vr else []

    def propose_next(self, r: int) -> None:
        state = self.rounds[r]
        for sn in self.instances:
            if sn in self.decided_val or sn in state.proposed:
                continue
            vr, vv = state.selection.get(sn, (0, None))
            v = vv if vr else client_value(self.config, r)
            state.proposed[sn] = v
            self.ctx.linpoint(add_label(r, v, vr, sn=sn))
            self.ctx.broadcast(MultiPropose(r, v, sn) if self.multi else Propose(r, v))
            return

    def on_join(self, msg: Message) -> None:
        r = msg.payload.r
        if self.config.leader(r) != self.pid or r in self.rounds or r > self.last_started:
            return
        if self.joins.add(r, msg) >= self.config.q1:
            selection = self.select(self.joins.messages(r))
            self.rounds[r] = LeaderRound(selection, {}, set())
            self.propose_next(r)

    def on_vote(self, msg: Message) -> None:
        r = msg.payload.r
        sn = getattr(msg.payload, "sn", 0)
        state = self.rounds.get(r)
        if state is None or sn not in state.proposed or sn in state.decided:
            return
        if self.vote_msgs.add((r, sn), msg) >= self.config.q2:
            state.decided.add(sn)
            v = state.proposed[sn]
            self.ctx.linpoint(commit_label(r, sn=sn))
            self.decided_val[sn] = v
            self.ctx.decide(sn, v, str(r))
            self.propose_next(r)

    # -- acceptor side ---------------------------------------------------------

    def join_payload(self, r: int):
        if self.multi:
            votes = tuple((sn, vr, vv) for sn, (vr, vv) in sorted(self.votes.items()))
            return MultiJoin(r, votes)
        vr, vv = self.votes.get(0, (0, None))
        return Join(r, vr, vv)

    def on_start(self, msg: Message) -> None:
        r = msg.payload.r
        if self.max_joined < r:
            self.max_joined = r
            self.ctx.send(msg.src, self.join_payload(r))

    def may_vote(self, r: int, sn: int) -> bool:
        return self.max_joined <= r and (r, sn) not in self.voted_in

    def on_propose(self, msg: Message) -> None:
        r, v = msg.payload.r, msg.payload.v
        sn = getattr(msg.payload, "sn", 0)
        if not self.may_vote(r, sn):
            return
        self.voted_in.add((r, sn))
        self.max_joined = max(self.max_joined, r)
        self.votes[sn] = (r, v)
        self.ctx.send(msg.src, MultiVote(r, sn) if self.multi else Vote(r))

    def on_message(self, msg: Message) -> None:
        handler = {
            "START": self.on_start,
            "JOIN": self.on_join,
            "PROPOSE": self.on_propose,
            "VOTE": self.on_vote,
        }.get(msg.kind)
        if handler is not None:
            handler(msg)


class MultiPaxosProcess(PaxosProcess):
    multi = True


SPEC = ProtocolSpec("paxos", PaxosProcess)
MULTI_SPEC = ProtocolSpec("multipaxos", MultiPaxosProcess)

__all__ = [
    "Start", "Join", "MultiJoin", "Propose", "MultiPropose", "Vote", "MultiVote",
    "PaxosProcess", "MultiPaxosProcess", "SPEC", "MULTI_SPEC"
]
