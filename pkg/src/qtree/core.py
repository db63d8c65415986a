"""The sequential QTree object and its multi-instance composition."""

from __future__ import annotations

import copy
import enum
from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional

from .rounds import NAT, Round, check_round, format_round, is_zero, parse_round, zero_round

SINGLE_DECREE = "single-decree"
SMR = "smr"
MODES = (SINGLE_DECREE, SMR)


class NodeStatus(enum.Enum):
    ADDED = "ADDED"
    GHOST = "GHOST"
    COMMITTED = "COMMITTED"


class Ret(enum.Enum):
    OK = "OK"
    FAIL = "FAIL"

    def __bool__(self) -> bool:
        return self is Ret.OK


class UnknownRound(KeyError):
    """A round was looked up that has no node in the tree."""


class UsageError(ValueError):
    """An operation was invoked outside its contract."""


# legal status changes; GHOST and COMMITTED are terminal
TRANSITIONS = {
    (NodeStatus.ADDED, NodeStatus.GHOST),
    (NodeStatus.ADDED, NodeStatus.COMMITTED),
}

ROOT_VALUE_TEXT = "-"


@dataclass
class Node:
    round: Round
    value: Optional[str]
    parent: Round
    status: NodeStatus


class QTree:
    """A single QTree instance.

    ``add`` and ``commit`` return :class:`Ret` values; invalid invocations
    leave the tree untouched and return ``Ret.FAIL`` rather than raising.
    """

    def __init__(self, mode: str = SINGLE_DECREE, form: str = NAT):
        if mode not in MODES:
            raise UsageError(f"unknown mode {mode!r}")
        self.mode = mode
        self.form = form
        self.zero = zero_round(form)
        self.nodes: Dict[Round, Node] = {
            self.zero: Node(self.zero, None, self.zero, NodeStatus.COMMITTED)
        }

    def copy(self) -> "QTree":
        twin = copy.copy(self)
        twin.nodes = {r: copy.copy(n) for r, n in self.nodes.items()}
        return twin

    def __contains__(self, r: Round) -> bool:
        return r in self.nodes

    def __getitem__(self, r: Round) -> Node:
        try:
            return self.nodes[r]
        except KeyError:
            raise UnknownRound(r) from None

    def status(self, r: Round) -> NodeStatus:
        return self[r].status

    def statuses(self) -> Dict[Round, NodeStatus]:
        return {r: n.status for r, n in self.nodes.items()}

    # -- structure -------------------------------------------------------

    def ancestors(self, r: Round) -> Iterator[Round]:
        """Yield ``r`` and then every round on its parent chain up to the root."""
        node = self[r]
        while True:
            yield node.round
            if is_zero(node.round):
                return
            node = self.nodes[node.parent]

    def is_ancestor(self, a: Round, b: Round) -> bool:
        """True if ``a`` lies on ``b``'s parent chain (``a == b`` included)."""
        self[a]
        return any(x == a for x in self.ancestors(b))

    def conflicting(self, ra: Round, rb: Round) -> bool:
        self[ra], self[rb]
        return not (self.is_ancestor(ra, rb) or self.is_ancestor(rb, ra))

    def max_committed(self) -> Round:
        return max(r for r, n in self.nodes.items() if n.status is NodeStatus.COMMITTED)

    def trunk(self) -> List[Round]:
        return list(reversed(list(self.ancestors(self.max_committed()))))

    def decided_value(self) -> Optional[str]:
        if self.mode != SINGLE_DECREE:
            raise UsageError("decided_value is only defined for single-decree trees")
        for r, n in sorted(self.nodes.items()):
            if n.status is NodeStatus.COMMITTED and not is_zero(r):
                return n.value
        return None

    # -- predicates on a candidate node (side-effect free) -------------

    def link(self, r: Round, rp: Round) -> bool:
        return rp in self.nodes and rp < r

    def new_round(self, r: Round) -> bool:
        return r not in self.nodes

    def extends_trunk(self, r: Round, rp: Round) -> bool:
        """The candidate (r, parent rp) extends the trunk head or sits below it."""
        head = self.max_committed()
        if r < head:
            return True
        if rp not in self.nodes:
            return False
        # the candidate extends ``head`` iff head is on rp's chain
        return any(x == head for x in self.ancestors(rp))

    def value_constraint(self, v: str, rp: Round) -> bool:
        if is_zero(rp):
            return True
        return rp in self.nodes and self.nodes[rp].value == v

    def valid(self, r: Round, rp: Round) -> bool:
        return self.link(r, rp) and self.new_round(r) and self.extends_trunk(r, rp)

    def accepts(self, r: Round, v: str, rp: Round) -> bool:
        """Whether ``add(r, v, rp)`` would succeed in the current state."""
        ok = self.valid(r, rp)
        if ok and self.mode == SINGLE_DECREE:
            ok = self.value_constraint(v, rp)
        return ok

    # -- methods -----------------------------------------------------------

    def add(self, r: Round, v: str, rp: Round) -> Ret:
        check_round(r, self.form)
        if is_zero(r):
            raise UsageError("add requires a round above zero")
        check_round(rp, self.form)
        if not self.accepts(r, v, rp):
            return Ret.FAIL
        node = Node(r, v, rp, NodeStatus.ADDED)
        if any(other > r for other in self.nodes):
            node.status = NodeStatus.GHOST
        self.nodes[r] = node
        for other in self.nodes.values():
            if other.round < r and other.status is not NodeStatus.GHOST:
                if self.conflicting(r, other.round):
                    other.status = NodeStatus.GHOST
        return Ret.OK

    def commit(self, r: Round) -> Ret:
        node = self.nodes.get(r)
        if node is None or node.status is not NodeStatus.ADDED:
            return Ret.FAIL
        node.status = NodeStatus.COMMITTED
        return Ret.OK

    # -- snapshot text -------------------------------------------------------

    def snapshot(self) -> str:
        lines = []
        for r in sorted(self.nodes):
            n = self.nodes[r]
            value = ROOT_VALUE_TEXT if n.value is None else n.value
            lines.append(
                f"round={format_round(r)} parent={format_round(n.parent)} "
                f"value={value} status={n.status.value}"
            )
        return "\n".join(lines) + "\n"

    @classmethod
    def from_snapshot(cls, text: str, mode: str = SINGLE_DECREE) -> "QTree":
        rows = []
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            try:
                fields = dict(item.split("=", 1) for item in line.split())
                rows.append((
                    parse_round(fields["round"]),
                    parse_round(fields["parent"]),
                    None if fields["value"] == ROOT_VALUE_TEXT else fields["value"],
                    NodeStatus(fields["status"]),
                ))
            except (KeyError, ValueError) as exc:
                raise ValueError(f"line {lineno}: malformed snapshot row {line!r}") from exc
        if not rows:
            raise ValueError("empty snapshot")
        form = "pair" if isinstance(rows[0][0], tuple) else NAT
        tree = cls(mode, form)
        tree.nodes = {r: Node(r, v, p, s) for r, p, v, s in rows}
        tree.nodes[tree.zero].value = None
        return tree


class QTreeForest:
    """Independent QTree instances keyed by sequence number, created lazily."""

    def __init__(self, mode: str = SINGLE_DECREE, form: str = NAT):
        if mode not in MODES:
            raise UsageError(f"unknown mode {mode!r}")
        self.mode = mode
        self.form = form
        self.instances: Dict[int, QTree] = {}

    def instance(self, sn: int) -> QTree:
        if sn < 0:
            raise UsageError(f"instance ids are non-negative, got {sn}")
        tree = self.instances.get(sn)
        if tree is None:
            tree = self.instances[sn] = QTree(self.mode, self.form)
        return tree

    def add(self, sn: int, r: Round, v: str, rp: Round) -> Ret:
        return self.instance(sn).add(r, v, rp)

    def commit(self, sn: int, r: Round) -> Ret:
        # a fresh instance holds only the root, so commit fails there anyway
        return self.instance(sn).commit(r)
