"""Raft leader election and log replication over (term, index) rounds.

Log indices start at 0.  Entries are ``(term, value)`` pairs.  A process
whose log is empty reports ``lidx = -1`` with last term ``0``.

Linearization points, emitted by the leader of term ``t`` inside its
LOGREQ action:

* ``commit((t, i))`` for each index in ``(old_didx, didx]`` whose entry has
  term ``t``, when a LOGRESP quorum for the previous LOGREQ allows ``didx``
  to advance;
* ``add((t, i), v, (log[i-1].term, i-1))`` for each index appended by this
  LOGREQ.  Index 0 uses the zero round as its parent.  Entries are
  announced once, when first appended, so heartbeats carry no adds.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

from ..labels import add as add_label, commit as commit_label
from ..rounds import PAIR_ZERO
from ..sim.config import SimConfig
from ..sim.kernel import Context, Message, Payload, Process, hidden_field
from .common import QuorumTracker
from .registry import ProtocolSpec

FOLLOWER = "follower"
CANDIDATE = "candidate"
LEADER = "leader"

Entry = Tuple[int, str]


@dataclass(frozen=True)
class VoteReq(Payload):
    kind = "VOTEREQ"
    t: int
    li: int
    lt: int


@dataclass(frozen=True)
class VoteResp(Payload):
    kind = "VOTERESP"
    t: int
    li: int


@dataclass(frozen=True)
class LogReq(Payload):
    kind = "LOGREQ"
    t: int
    li: int
    di: int
    log: Tuple[Entry, ...] = hidden_field()


@dataclass(frozen=True)
class LogResp(Payload):
    kind = "LOGRESP"
    t: int
    li: int


class RaftProcess(Process):
    def __init__(self, pid: int, ctx: Context, config: SimConfig):
        super().__init__(pid, ctx, config)
        self.term = 0
        self.voted_term = 0
        self.role = FOLLOWER
        self.log: List[Entry] = []
        self.didx = -1
        self.decided_upto = -1
        self.votes = QuorumTracker()
        self.acks = QuorumTracker()
        # leader bookkeeping for the current term
        self.sent_logreq = False
        self.prev_lidx: Optional[int] = None
        self.next_value = 0

    @property
    def lidx(self) -> int:
        return len(self.log) - 1

    @property
    def last_term(self) -> int:
        return self.log[-1][0] if self.log else 0

    def round_of(self, i: int):
        return PAIR_ZERO if i < 0 else (self.log[i][0], i)

    def wants_timeout(self) -> bool:
        return self.role == LEADER or self.term < self.config.max_round

    def on_timeout(self) -> None:
        if self.role == LEADER:
            self.log_request()
        elif self.term < self.config.max_round:
            self.vote_request()

    # -- election ----------------------------------------------------------

    def vote_request(self) -> None:
        self.term += 1
        self.role = CANDIDATE
        self.sent_logreq = False
        self.ctx.broadcast(VoteReq(self.term, self.lidx, self.last_term))

    def up_to_date(self, li: int, lt: int) -> bool:
        """The candidate's last entry is at least as recent as ours."""
        return (self.last_term, self.lidx) <= (lt, li)

    def on_votereq(self, msg: Message) -> None:
        p = msg.payload
        if p.t >= self.term and self.voted_term < p.t and self.up_to_date(p.li, p.lt):
            if p.t > self.term or msg.src != self.pid:
                self.step_down(p.t)
            self.voted_term = p.t
            self.ctx.send(msg.src, VoteResp(p.t, self.lidx))

    def on_voteresp(self, msg: Message) -> None:
        p = msg.payload
        if self.role != CANDIDATE or p.t != self.term:
            return
        if self.votes.add(p.t, msg) >= self.config.q1:
            self.role = LEADER
            self.sent_logreq = False
            self.prev_lidx = None
            self.log_request()

    def step_down(self, t: int) -> None:
        if t > self.term or self.role != FOLLOWER:
            self.role = FOLLOWER
        self.term = t

    # -- replication -------------------------------------------------------

    def fresh_value(self) -> str:
        values = self.config.client_values
        v = values[self.next_value % len(values)]
        self.next_value += 1
        return v

    def log_request(self) -> None:
        t = self.term
        acked = False
        if self.sent_logreq:
            acked = self.acks.count((t, self.prev_lidx)) >= self.config.q2
            if acked and self.prev_lidx > self.didx and self.log[self.prev_lidx][0] == t:
                old = self.didx
                self.didx = self.prev_lidx
                for i in range(old + 1, self.didx + 1):
                    if self.log[i][0] == t:
                        self.ctx.linpoint(commit_label((t, i)))
                self.learn_decisions()
        if not self.sent_logreq or (acked and len(self.log) < self.config.max_round):
            self.append(t)
        self.sent_logreq = True
        self.prev_lidx = self.lidx
        self.ctx.broadcast(LogReq(t, self.lidx, self.didx, tuple(self.log)))

    def append(self, t: int) -> None:
        v = self.fresh_value()
        self.log.append((t, v))
        i = self.lidx
        self.ctx.linpoint(add_label((t, i), v, self.round_of(i - 1)))

    def acked_by(self, msg: Message) -> None:
        p = msg.payload
        if self.role != LEADER or p.t != self.term or self.prev_lidx is None:
            return
        if p.li >= self.prev_lidx:
            self.acks.add((p.t, self.prev_lidx), msg)

    def on_logreq(self, msg: Message) -> None:
        p = msg.payload
        if msg.src == self.pid:
            # the leader's own copy counts as its acknowledgement
            self.ctx.send(self.pid, LogResp(p.t, p.li))
            return
        if p.t >= self.term and p.li >= self.lidx:
            self.step_down(p.t)
            self.log = list(p.log[: p.li + 1])
            self.didx = p.di
            self.learn_decisions()
            self.ctx.send(msg.src, LogResp(p.t, self.lidx))

    def learn_decisions(self) -> None:
        for i in range(self.decided_upto + 1, self.didx + 1):
            term, v = self.log[i]
            self.ctx.decide(i, v, str(term))
        self.decided_upto = max(self.decided_upto, self.didx)

    def on_message(self, msg: Message) -> None:
        handler = {
            "VOTEREQ": self.on_votereq,
            "VOTERESP": self.on_voteresp,
            "LOGREQ": self.on_logreq,
            "LOGRESP": self.acked_by,
        }.get(msg.kind)
        if handler is not None:
            handler(msg)


SPEC = ProtocolSpec("raft", RaftProcess)
