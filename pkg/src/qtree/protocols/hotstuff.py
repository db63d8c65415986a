"""Four-phase HotStuff refining a single QTree instance in smr mode.

Nodes form a command tree hanging off the genesis block, which plays the
role of the QTree root (round 0).  Every round is one-shot: its leader
proposes one node, and the phases PRECOMMIT, COMMIT and DECIDE each carry a
certificate of a quorum of votes for that node from the previous phase.

Linearization points come from an omniscient observer of all sends:

* ``add(r, n.value, n.parent.round)`` at the first send of a valid
  ``PRECOMMIT(r)`` carrying node ``n``;
* ``commit(r)`` at the first send of a valid ``DECIDE(r)``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import List, Optional, Set, Tuple

from ..labels import add as add_label, commit as commit_label
from ..sim.config import SimConfig
from ..sim.kernel import Context, Message, Observer, Payload, Process, cert_field
from .byzantine import ProtocolHooks, byzantine_factory
from .common import QuorumTracker, client_value, other_value
from .registry import ProtocolSpec


@dataclass(frozen=True)
class HSNode:
    round: int
    value: str
    parent: Optional["HSNode"] = None

    @property
    def parent_round(self) -> int:
        return 0 if self.parent is None else self.parent.round

    def branch(self) -> List["HSNode"]:
        """Nodes from the first one after genesis down to this one."""
        out = []
        node = self
        while node is not None:
            out.append(node)
            node = node.parent
        return out[::-1]

    def extends(self, other: Optional["HSNode"]) -> bool:
        """``other`` lies strictly above this node on its parent chain (genesis always does)."""
        if other is None:
            return True
        node = self.parent
        while node is not None:
            if node == other:
                return True
            node = node.parent
        return False

    def __str__(self) -> str:
        return f"{self.round}:{self.value}:{self.parent_round}"


def node_text(node: Optional[HSNode]) -> str:
    return "-" if node is None else str(node)


@dataclass(frozen=True)
class _NodeMsg(Payload):
    r: int
    node: HSNode

    def summary_fields(self):
        out = [("r", str(self.r)), ("node", node_text(self.node))]
        for f in dataclasses.fields(self):
            if f.metadata.get("cert"):
                ids = sorted({m.authentic_from for m in getattr(self, f.name)})
                out.append((f.name, ",".join(map(str, ids)) or "-"))
        return out


@dataclass(frozen=True)
class Propose(_NodeMsg):
    kind = "PROPOSE"
    rc: Tuple[Message, ...] = cert_field(default=())


@dataclass(frozen=True)
class Join(_NodeMsg):
    kind = "JOIN"


@dataclass(frozen=True)
class Precommit(_NodeMsg):
    kind = "PRECOMMIT"
    cert: Tuple[Message, ...] = cert_field(default=())


@dataclass(frozen=True)
class PrecommitVote(_NodeMsg):
    kind = "PRECOMMIT_VOTE"


@dataclass(frozen=True)
class Commit(_NodeMsg):
    kind = "COMMIT"
    cert: Tuple[Message, ...] = cert_field(default=())


@dataclass(frozen=True)
class CommitVote(_NodeMsg):
    kind = "COMMIT_VOTE"


@dataclass(frozen=True)
class Decide(_NodeMsg):
    kind = "DECIDE"
    cert: Tuple[Message, ...] = cert_field(default=())


@dataclass(frozen=True)
class RoundChange(Payload):
    """Carries ``preNode`` and the PRECOMMIT message that certified it."""

    kind = "ROUND-CHANGE"
    r: int
    pre: Optional[HSNode] = None
    just: Optional[Message] = None

    def summary_fields(self):
        return [("r", str(self.r)), ("pre", node_text(self.pre))]


# which vote kind each certificate-carrying phase embeds
CERT_OF = {"PRECOMMIT": "JOIN", "COMMIT": "PRECOMMIT_VOTE", "DECIDE": "COMMIT_VOTE"}


def phase_cert_ok(verify, msg_payload, quorum: int) -> bool:
    """A PRECOMMIT/COMMIT/DECIDE payload embeds a quorum of matching votes."""
    vote_kind = CERT_OF[msg_payload.kind]
    r, node = msg_payload.r, msg_payload.node
    senders = set()
    for m in msg_payload.cert:
        if not isinstance(m, Message) or not verify(m) or m.kind != vote_kind:
            return False
        if m.payload.r != r or m.payload.node != node:
            return False
        senders.add(m.authentic_from)
    return len(senders) >= quorum


class HotStuffProcess(Process):
    def __init__(self, pid: int, ctx: Context, config: SimConfig):
        super().__init__(pid, ctx, config)
        self.q = config.q2
        self.cur_round = 1
        self.kicked_off = False
        self.pre_node: Optional[HSNode] = None
        self.pre_just: Optional[Message] = None
        self.voted_node: Optional[HSNode] = None
        self.decided_node: Optional[HSNode] = None
        self.executed: List[HSNode] = []
        self.joined: Set[int] = set()
        self.phase_done: Set[Tuple[str, int]] = set()
        self.tracker = QuorumTracker()

    def leader(self, r: int) -> int:
        return self.config.leader(r)

    def valid_cert(self, payload) -> bool:
        return phase_cert_ok(self.ctx.verify, payload, self.q)

    # -- round change ---------------------------------------------------------

    def wants_timeout(self) -> bool:
        return self.cur_round < self.config.max_round

    def on_timeout(self) -> None:
        if self.cur_round == 1 and self.leader(1) == self.pid and not self.kicked_off:
            self.kicked_off = True
            self.propose(1, ())
            return
        if self.cur_round >= self.config.max_round:
            return
        self.cur_round += 1
        self.ctx.send(self.leader(self.cur_round), RoundChange(self.cur_round, self.pre_node, self.pre_just))

    def justified(self, msg: Message, r: int) -> bool:
        if not self.ctx.verify(msg) or msg.kind != "ROUND-CHANGE" or msg.payload.r != r:
            return False
        pre, just = msg.payload.pre, msg.payload.just
        if pre is None:
            return just is None
        if not isinstance(just, Message) or not self.ctx.verify(just) or just.kind != "PRECOMMIT":
            return False
        return just.payload.node == pre and pre.round < r and self.valid_cert(just.payload)

    @staticmethod
    def highest_pre(rc: Tuple[Message, ...]) -> Optional[HSNode]:
        best = None
        for m in rc:
            pre = m.payload.pre
            if pre is not None and (best is None or pre.round > best.round):
                best = pre
        return best

    def propose(self, r: int, rc: Tuple[Message, ...]) -> None:
        self.phase_done.add(("PROPOSE", r))
        node = HSNode(r, client_value(self.config, r), self.highest_pre(rc))
        self.ctx.broadcast(Propose(r, node, rc))

    def on_round_change(self, msg: Message) -> None:
        r = msg.payload.r
        if self.leader(r) != self.pid or r < self.cur_round or ("PROPOSE", r) in self.phase_done:
            return
        if not self.justified(msg, r):
            return
        if self.tracker.add(("RC", r), msg) >= self.q:
            self.cur_round = r
            self.propose(r, self.tracker.messages(("RC", r)))

    # -- replica actions -----------------------------------------------------------

    def proposal_ok(self, p: Propose) -> bool:
        node = p.node
        if not isinstance(node, HSNode) or node.round != p.r or node.value not in self.config.client_values:
            return False
        if p.r == 1:
            return not p.rc and node.parent is None
        senders = set()
        for m in p.rc:
            if not isinstance(m, Message) or not self.justified(m, p.r):
                return False
            senders.add(m.authentic_from)
        if len(senders) < self.q:
            return False
        return node.parent == self.highest_pre(p.rc) and node.parent_round < p.r

    def safe_to_join(self, node: HSNode) -> bool:
        voted_round = 0 if self.voted_node is None else self.voted_node.round
        return node.extends(self.voted_node) or voted_round < node.parent_round

    def on_propose(self, msg: Message) -> None:
        p = msg.payload
        if msg.src != self.leader(p.r) or p.r < self.cur_round or p.r in self.joined:
            return
        if not self.proposal_ok(p) or not self.safe_to_join(p.node):
            return
        self.cur_round = p.r
        self.joined.add(p.r)
        self.ctx.send(self.leader(p.r), Join(p.r, p.node))

    def from_current_leader(self, msg: Message) -> bool:
        return msg.src == self.leader(msg.payload.r) and msg.payload.r == self.cur_round

    def on_precommit(self, msg: Message) -> None:
        p = msg.payload
        if not self.from_current_leader(msg) or ("PRECOMMIT_VOTE", p.r) in self.phase_done:
            return
        if not self.valid_cert(p):
            return
        self.phase_done.add(("PRECOMMIT_VOTE", p.r))
        self.pre_node, self.pre_just = p.node, msg
        self.ctx.send(msg.src, PrecommitVote(p.r, p.node))

    def on_commit(self, msg: Message) -> None:
        p = msg.payload
        if not self.from_current_leader(msg) or ("COMMIT_VOTE", p.r) in self.phase_done:
            return
        if not self.valid_cert(p):
            return
        self.phase_done.add(("COMMIT_VOTE", p.r))
        self.voted_node = p.node
        self.ctx.send(msg.src, CommitVote(p.r, p.node))

    def on_decide(self, msg: Message) -> None:
        p = msg.payload
        if msg.src != self.leader(p.r) or not self.valid_cert(p):
            return
        if self.decided_node is not None and self.decided_node.round >= p.r:
            return
        self.decided_node = p.node
        for depth, node in enumerate(p.node.branch()):
            if depth >= len(self.executed) or self.executed[depth] != node:
                self.ctx.decide(depth, node.value, str(node.round))
        self.executed = p.node.branch()

    # -- leader phase transitions -----------------------------------------------------

    def on_vote(self, msg: Message, phase: str, make) -> None:
        p = msg.payload
        if self.leader(p.r) != self.pid or p.r != self.cur_round or (phase, p.r) in self.phase_done:
            return
        key = (msg.kind, p.r, p.node)
        if self.tracker.add(key, msg) >= self.q:
            self.phase_done.add((phase, p.r))
            self.ctx.broadcast(make(p.r, p.node, self.tracker.first(key, self.q)))

    def on_message(self, msg: Message) -> None:
        kind = msg.kind
        if kind == "PROPOSE":
            self.on_propose(msg)
        elif kind == "JOIN":
            self.on_vote(msg, "PRECOMMIT", Precommit)
        elif kind == "PRECOMMIT":
            self.on_precommit(msg)
        elif kind == "PRECOMMIT_VOTE":
            self.on_vote(msg, "COMMIT", Commit)
        elif kind == "COMMIT":
            self.on_commit(msg)
        elif kind == "COMMIT_VOTE":
            self.on_vote(msg, "DECIDE", Decide)
        elif kind == "DECIDE":
            self.on_decide(msg)
        elif kind == "ROUND-CHANGE":
            self.on_round_change(msg)


class HotStuffObserver(Observer):
    def __init__(self, kernel, q: Optional[int] = None):
        self.kernel = kernel
        self.q = q if q is not None else kernel.config.q2
        self.added: Set[int] = set()
        self.committed: Set[int] = set()

    def on_send(self, msg: Message) -> None:
        p = msg.payload
        if msg.kind == "PRECOMMIT" and p.r not in self.added:
            if phase_cert_ok(self.kernel.verify, p, self.q):
                self.added.add(p.r)
                self.kernel.linpoint(msg.src, add_label(p.r, p.node.value, p.node.parent_round))
        elif msg.kind == "DECIDE" and p.r not in self.committed:
            if phase_cert_ok(self.kernel.verify, p, self.q):
                self.committed.add(p.r)
                self.kernel.linpoint(msg.src, commit_label(p.r))


class HotStuffHooks(ProtocolHooks):
    withheld = frozenset({"PRECOMMIT", "COMMIT", "DECIDE"})
    certified = frozenset({"PROPOSE", "PRECOMMIT", "COMMIT", "DECIDE"})

    def equivocate(self, payload, config):
        if isinstance(payload, _NodeMsg):
            node = payload.node
            forged = HSNode(node.round, other_value(config, node.value), node.parent)
            return dataclasses.replace(payload, node=forged)
        return payload

    def eager(self, process, msg):
        p = msg.payload
        if isinstance(p, Propose):
            leader = process.leader(p.r)
            return [(leader, PrecommitVote(p.r, p.node)), (leader, CommitVote(p.r, p.node))]
        return []


HOOKS = HotStuffHooks()
SPEC = ProtocolSpec("hotstuff", HotStuffProcess, byzantine_factory(HotStuffProcess, HOOKS), HotStuffObserver)
