"""PBFT as a composition of independent single-decree instances.

Sequence numbers run from 1 to ``config.instances``.  All processes start
in round 1, whose leader opens it on its first timeout without a
ROUND-CHANGE certificate.  Later rounds start when their leader holds a
quorum of ROUND-CHANGE messages; the PROPOSE embeds that quorum so every
joiner can re-check which value the leader was obliged to pick.

Linearization points come from an omniscient observer of all sends:

* ``sn.add(r, v, r')`` at the first send of ``VOTE(r, sn, v)`` at a moment
  when a quorum of distinct processes has already sent the matching
  ``JOIN(r, sn, v)`` (with honest processes this is the first honest VOTE);
* ``sn.commit(r)`` at the first decision of a correct process for ``sn`` in
  round ``r``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Dict, List, Optional, Set, Tuple

from ..labels import add as add_label, commit as commit_label
from ..sim.config import SimConfig
from ..sim.kernel import Context, Message, Observer, Payload, Process, cert_field
from .byzantine import ProtocolHooks, byzantine_factory
from .common import QuorumTracker, cert_senders, client_value, other_value
from .registry import ProtocolSpec

# a vote together with the JOIN quorum that justified it
VoteProof = Tuple[Message, Tuple[Message, ...]]


@dataclass(frozen=True)
class Propose(Payload):
    kind = "PROPOSE"
    r: int
    sn: int
    v: str
    rp: int
    rc: Tuple[Message, ...] = cert_field(default=())


@dataclass(frozen=True)
class Join(Payload):
    kind = "JOIN"
    r: int
    sn: int
    v: str
    rp: int


@dataclass(frozen=True)
class Vote(Payload):
    kind = "VOTE"
    r: int
    sn: int
    v: str
    rp: int


@dataclass(frozen=True)
class RoundChange(Payload):
    kind = "ROUND-CHANGE"
    r: int
    proofs: Tuple[VoteProof, ...] = ()

    def summary_fields(self):
        votes = ",".join(
            f"{m.payload.sn}:{m.payload.r}:{m.payload.v}" for m, _ in self.proofs
        ) or "-"
        return [("r", str(self.r)), ("votes", votes)]


def quorum(config: SimConfig) -> int:
    return config.q2


class PBFTProcess(Process):
    def __init__(self, pid: int, ctx: Context, config: SimConfig):
        super().__init__(pid, ctx, config)
        self.q = quorum(config)
        self.cur_round = 1
        self.kicked_off = False
        self.proposed: Set[int] = set()
        self.accepted: Dict[Tuple[int, int], Propose] = {}
        self.voted: Set[Tuple[int, int]] = set()
        self.highest: Dict[int, VoteProof] = {}
        self.decided: Dict[int, str] = {}
        self.joins = QuorumTracker()
        self.votes = QuorumTracker()
        self.round_changes = QuorumTracker()

    @property
    def instances(self) -> List[int]:
        return list(range(1, self.config.instances + 1))

    def leader(self, r: int) -> int:
        return self.config.leader(r)

    # -- timeouts and round change ------------------------------------------

    def wants_timeout(self) -> bool:
        undecided = any(sn not in self.decided for sn in self.instances)
        return undecided and self.cur_round < self.config.max_round

    def on_timeout(self) -> None:
        if self.cur_round == 1 and self.leader(1) == self.pid and not self.kicked_off:
            self.kicked_off = True
            self.propose(1, ())
            return
        if self.cur_round >= self.config.max_round:
            return
        self.cur_round += 1
        proofs = tuple(self.highest[sn] for sn in sorted(self.highest))
        self.ctx.send(self.leader(self.cur_round), RoundChange(self.cur_round, proofs))

    # -- certificate checks ------------------------------------------------

    def valid_proof(self, proof, sender: int) -> bool:
        try:
            vote, joins = proof
        except (TypeError, ValueError):
            return False
        if not isinstance(vote, Message) or not self.ctx.verify(vote):
            return False
        if vote.kind != "VOTE" or vote.authentic_from != sender:
            return False
        p = vote.payload
        match = lambda j: (j.r, j.sn, j.v, j.rp) == (p.r, p.sn, p.v, p.rp)
        return len(cert_senders(self.ctx, joins, "JOIN", match)) >= self.q

    def valid_round_change(self, msg: Message, r: int) -> bool:
        if not self.ctx.verify(msg) or msg.kind != "ROUND-CHANGE" or msg.payload.r != r:
            return False
        return all(self.valid_proof(proof, msg.authentic_from) for proof in msg.payload.proofs)

    def valid_rc_cert(self, rc: Tuple[Message, ...], r: int) -> bool:
        senders = set()
        for m in rc:
            if not isinstance(m, Message) or not self.valid_round_change(m, r):
                return False
            senders.add(m.authentic_from)
        return len(senders) >= self.q

    @staticmethod
    def selection(rc: Tuple[Message, ...], sn: int) -> Optional[Tuple[int, str]]:
        """Highest-round vote for ``sn`` carried by a ROUND-CHANGE certificate."""
        best = None
        for m in rc:
            for vote, _ in m.payload.proofs:
                p = vote.payload
                if p.sn == sn and (best is None or p.r > best[0]):
                    best = (p.r, p.v)
        return best

    def selection_ok(self, p: Propose) -> bool:
        if p.r == 1:
            return not p.rc and p.rp == 0 and p.v in self.config.client_values
        if not self.valid_rc_cert(p.rc, p.r):
            return False
        chosen = self.selection(p.rc, p.sn)
        if chosen is None:
            return p.rp == 0 and p.v in self.config.client_values
        return (p.rp, p.v) == chosen

    # -- leader ----------------------------------------------------------------

    def propose(self, r: int, rc: Tuple[Message, ...]) -> None:
        self.proposed.add(r)
        for sn in self.instances:
            if sn in self.decided:
                continue
            chosen = self.selection(rc, sn)
            rp, v = chosen if chosen is not None else (0, client_value(self.config, r))
            self.ctx.broadcast(Propose(r, sn, v, rp, rc))

    def on_round_change(self, msg: Message) -> None:
        r = msg.payload.r
        if self.leader(r) != self.pid or r < self.cur_round or r in self.proposed:
            return
        if not self.valid_round_change(msg, r):
            return
        if self.round_changes.add(r, msg) >= self.q:
            self.cur_round = r
            self.propose(r, self.round_changes.messages(r))

    # -- replicas --------------------------------------------------------------

    def on_propose(self, msg: Message) -> None:
        p = msg.payload
        key = (p.r, p.sn)
        if msg.src != self.leader(p.r) or p.r < self.cur_round or key in self.accepted:
            return
        if p.sn not in self.instances or not self.selection_ok(p):
            return
        self.cur_round = p.r
        self.accepted[key] = p
        self.ctx.broadcast(Join(p.r, p.sn, p.v, p.rp))
        self.try_vote(p.r, p.sn)

    def on_join(self, msg: Message) -> None:
        p = msg.payload
        self.joins.add((p.r, p.sn, p.v, p.rp), msg)
        self.try_vote(p.r, p.sn)
        self.try_decide(p.r, p.sn)

    def try_vote(self, r: int, sn: int) -> None:
        prop = self.accepted.get((r, sn))
        if prop is None or r != self.cur_round or (r, sn) in self.voted:
            return
        key = (r, sn, prop.v, prop.rp)
        if self.joins.count(key) < self.q:
            return
        self.voted.add((r, sn))
        sent = self.ctx.broadcast(Vote(r, sn, prop.v, prop.rp))
        if sent:
            self.highest[sn] = (sent[0], self.joins.first(key, self.q))
        self.try_decide(r, sn)

    def on_vote(self, msg: Message) -> None:
        p = msg.payload
        self.votes.add((p.r, p.sn, p.v, p.rp), msg)
        self.try_decide(p.r, p.sn)

    def try_decide(self, r: int, sn: int) -> None:
        prop = self.accepted.get((r, sn))
        if prop is None or r != self.cur_round or sn in self.decided:
            return
        key = (r, sn, prop.v, prop.rp)
        if self.joins.count(key) >= self.q and self.votes.count(key) >= self.q:
            self.decided[sn] = prop.v
            self.ctx.decide(sn, prop.v, str(r))

    def on_message(self, msg: Message) -> None:
        handler = {
            "PROPOSE": self.on_propose,
            "JOIN": self.on_join,
            "VOTE": self.on_vote,
            "ROUND-CHANGE": self.on_round_change,
        }.get(msg.kind)
        if handler is not None:
            handler(msg)


class PBFTObserver(Observer):
    """Detects the global linearization points from the stream of sends and decisions."""

    def __init__(self, kernel, q: Optional[int] = None):
        self.kernel = kernel
        self.q = q if q is not None else quorum(kernel.config)
        self.join_senders: Dict[tuple, Set[int]] = {}
        self.voted_keys: Dict[tuple, int] = {}
        self.added: Set[Tuple[int, int]] = set()
        self.committed: Set[Tuple[int, int]] = set()

    def on_send(self, msg: Message) -> None:
        p = msg.payload
        if msg.kind == "JOIN":
            key = (p.r, p.sn, p.v, p.rp)
            self.join_senders.setdefault(key, set()).add(msg.authentic_from)
            if key in self.voted_keys:
                self._maybe_add(key, self.voted_keys[key])
        elif msg.kind == "VOTE":
            key = (p.r, p.sn, p.v, p.rp)
            self.voted_keys.setdefault(key, msg.authentic_from)
            self._maybe_add(key, msg.authentic_from)

    def _maybe_add(self, key, proc: int) -> None:
        r, sn, v, rp = key
        if (sn, r) in self.added or len(self.join_senders.get(key, ())) < self.q:
            return
        self.added.add((sn, r))
        self.kernel.linpoint(proc, add_label(r, v, rp, sn=sn))

    def on_decide(self, pid: int, sn: int, value: str, ident: Optional[str]) -> None:
        if pid in self.kernel.byzantine or ident is None:
            return
        r = int(ident)
        if (sn, r) in self.committed:
            return
        self.committed.add((sn, r))
        self.kernel.linpoint(pid, commit_label(r, sn=sn))


class PBFTHooks(ProtocolHooks):
    withheld = frozenset({"VOTE"})
    certified = frozenset({"PROPOSE"})

    def equivocate(self, payload, config):
        if isinstance(payload, (Propose, Join, Vote)):
            return dataclasses.replace(payload, v=other_value(config, payload.v))
        return payload

    def eager(self, process, msg):
        p = msg.payload
        if isinstance(p, Propose):
            return [(None, Vote(p.r, p.sn, p.v, p.rp))]
        return []

    def has_certificate(self, payload):
        return isinstance(payload, Propose) and bool(payload.rc)


HOOKS = PBFTHooks()
SPEC = ProtocolSpec("pbft", PBFTProcess, byzantine_factory(PBFTProcess, HOOKS), PBFTObserver)
