"""Reproducible Byzantine behaviour for the BFT protocols.

A Byzantine process runs the honest state machine behind a filtering
context.  The strategy rewrites, suppresses or adds outgoing messages; it
can never change the authentic sender of anything, because every send
still goes through the kernel under the process's own id.

Strategies:

``equivocate``
    messages that carry a value go out with a different client value to
    the upper half of the processes.
``withhold``
    the protocol's phase-2 certificate messages are never sent.
``replay-stale-certificate``
    on every timeout one stored certificate-carrying message is re-sent
    verbatim, and once more re-stamped with the current round.  Stored
    messages are replayed in turn, starting with the oldest.
``vote-without-join``
    on receiving any proposal the process immediately sends the
    later-phase votes for it, skipping the quorum checks.
"""

from __future__ import annotations

import dataclasses
from typing import Callable, List, Optional, Tuple

from ..sim.config import SimConfig
from ..sim.kernel import Context, Message, Payload, Process


class ProtocolHooks:
    """Per-protocol knowledge the strategies need; subclassed by each protocol."""

    withheld: frozenset = frozenset()
    certified: frozenset = frozenset()

    def equivocate(self, payload: Payload, config: SimConfig) -> Payload:
        return payload

    def eager(self, process: Process, msg: Message) -> List[Tuple[Optional[int], Payload]]:
        """Sends to make on receipt of ``msg``; ``None`` as destination means broadcast."""
        return []

    def has_certificate(self, payload: Payload) -> bool:
        return payload.kind in self.certified


class StrategyContext:
    """Stands in for a process's :class:`Context` and filters its sends."""

    def __init__(self, ctx: Context, owner: "ByzantineProcess"):
        self._ctx = ctx
        self._owner = owner
        self.pid = ctx.pid

    @property
    def step(self) -> int:
        return self._ctx.step

    @property
    def config(self) -> SimConfig:
        return self._ctx.config

    def verify(self, msg: Message) -> bool:
        return self._ctx.verify(msg)

    def rng(self):
        return self._ctx.rng()

    def linpoint(self, label) -> None:
        # faulty processes never contribute linearization points
        pass

    def decide(self, sn: int, value: str, ident: Optional[str] = None) -> None:
        self._ctx.decide(sn, value, ident)

    def send(self, dst: int, payload: Payload) -> Optional[Message]:
        return self._owner.outgoing(dst, payload)

    def send_as(self, src: int, dst: int, payload: Payload):
        return self._ctx.send_as(src, dst, payload)

    def broadcast(self, payload: Payload) -> List[Message]:
        sent = [self.send(dst, payload) for dst in self.config.processes]
        return [m for m in sent if m is not None]


class ByzantineProcess(Process):
    def __init__(self, pid: int, ctx: Context, config: SimConfig, strategy: str,
                 honest: Callable[[int, object, SimConfig], Process], hooks: ProtocolHooks):
        super().__init__(pid, ctx, config)
        self.strategy = strategy
        self.hooks = hooks
        self.inner = honest(pid, StrategyContext(ctx, self), config)
        self.stale: List[Payload] = []
        self.replayed = 0

    def outgoing(self, dst: int, payload: Payload) -> Optional[Message]:
        if self.strategy == "withhold" and payload.kind in self.hooks.withheld:
            return None
        if self.strategy == "equivocate" and dst > self.config.n // 2:
            payload = self.hooks.equivocate(payload, self.config)
        return self.ctx.send(dst, payload)

    def on_message(self, msg: Message) -> None:
        if self.hooks.has_certificate(msg.payload) and msg.src != self.pid:
            self.stale.append(msg.payload)
        if self.strategy == "vote-without-join":
            for dst, payload in self.hooks.eager(self.inner, msg):
                if dst is None:
                    self.ctx.broadcast(payload)
                else:
                    self.ctx.send(dst, payload)
        self.inner.on_message(msg)

    def wants_timeout(self) -> bool:
        return self.inner.wants_timeout()

    def on_timeout(self) -> None:
        self.inner.on_timeout()
        if self.strategy == "replay-stale-certificate" and self.stale:
            old = self.stale[self.replayed % len(self.stale)]
            self.replayed += 1
            self.ctx.broadcast(old)
            current = getattr(self.inner, "cur_round", None)
            if current is not None and getattr(old, "r", current) != current:
                self.ctx.broadcast(dataclasses.replace(old, r=current))


def byzantine_factory(honest, hooks: ProtocolHooks):
    def make(pid: int, ctx: Context, config: SimConfig, strategy: str) -> Process:
        return ByzantineProcess(pid, ctx, config, strategy, honest, hooks)
    return make
