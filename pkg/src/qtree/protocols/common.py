"""Helpers shared by the protocol implementations."""

from __future__ import annotations

from typing import Callable, Dict, Iterable, Optional, Sequence, Set, Tuple

from ..sim.config import SimConfig
from ..sim.kernel import Context, Message


def client_value(config: SimConfig, r: int) -> str:
    """The value a client hands to the leader of round ``r``.

    Fixed per round so runs stay deterministic; the leader of round ``r``
    proposes ``client_values[(r - 1) % len]`` whenever it is free to choose.
    """
    values = config.client_values
    return values[(r - 1) % len(values)]


def cert_senders(ctx: Context, msgs: Iterable[Message], kind: str,
                 match: Callable[[object], bool]) -> Set[int]:
    """Distinct authentic senders among the embedded messages that pass ``match``.

    A message that the kernel did not mint, has the wrong kind or fails the
    payload predicate makes the whole certificate unusable, so an empty set
    is returned in that case.
    """
    senders = set()
    for m in msgs:
        if not ctx.verify(m) or m.kind != kind or not match(m.payload):
            return set()
        senders.add(m.authentic_from)
    return senders


def valid_cert(ctx: Context, msgs: Sequence[Message], quorum: int, kind: str,
               match: Callable[[object], bool]) -> bool:
    return len(cert_senders(ctx, msgs, kind, match)) >= quorum


class QuorumTracker:
    """Collects one message per distinct sender under a key."""

    def __init__(self):
        self._by_key: Dict[object, Dict[int, Message]] = {}

    def add(self, key, msg: Message) -> int:
        bucket = self._by_key.setdefault(key, {})
        bucket.setdefault(msg.authentic_from, msg)
        return len(bucket)

    def count(self, key) -> int:
        return len(self._by_key.get(key, ()))

    def messages(self, key) -> Tuple[Message, ...]:
        bucket = self._by_key.get(key, {})
        return tuple(bucket[p] for p in sorted(bucket))

    def first(self, key, k: int) -> Tuple[Message, ...]:
        """The first ``k`` senders' messages in sender order (a minimal certificate)."""
        return self.messages(key)[:k]


def other_value(config: SimConfig, v: Optional[str]) -> str:
    """Some client value different from ``v`` (used by equivocating processes)."""
    for cand in config.client_values:
        if cand != v:
            return cand
    return f"{v}'"
