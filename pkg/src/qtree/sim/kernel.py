"""Deterministic discrete-event message-passing kernel.

Every step performs exactly one transition: a message delivery, a timeout,
or a scripted drop.  All randomness comes from one ``random.Random`` seeded
with the configuration's seed, and every iteration order is fixed, so a run
is a pure function of its configuration.
"""

from __future__ import annotations

import dataclasses
import hashlib
import random
from dataclasses import dataclass
from typing import Callable, ClassVar, Dict, Iterable, List, Optional, Tuple

from ..labels import Label, LabelParseError, parse_fields, split_fields
from ..rounds import format_round
from .config import SimConfig

SEND = "send"
DELIVER = "deliver"
DROP = "drop"
TIMEOUT = "timeout"
DECIDE = "decide"
LINPOINT = "linpoint"
EVENT_KINDS = (SEND, DELIVER, DROP, TIMEOUT, DECIDE, LINPOINT)


class KernelFault(RuntimeError):
    """A process broke a rule the kernel enforces."""


class ForgeryError(KernelFault):
    pass


class ScheduleError(RuntimeError):
    pass


def text_of(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, tuple) and len(value) == 2 and all(isinstance(x, int) for x in value):
        return format_round(value)
    if isinstance(value, bool):
        return str(int(value))
    return str(value)


class Payload:
    """Base for protocol message bodies (frozen dataclasses)."""

    kind: ClassVar[str] = "?"

    def summary_fields(self) -> List[Tuple[str, str]]:
        out = []
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if f.metadata.get("cert"):
                ids = sorted({m.authentic_from for m in value})
                out.append((f.name, ",".join(str(p) for p in ids) or "-"))
            elif not f.metadata.get("hidden"):
                out.append((f.name, text_of(value)))
        return out

    def summary(self) -> str:
        parts = [f"m={self.kind}"] + [f"{k}={v}" for k, v in self.summary_fields()]
        return " ".join(parts)


def cert_field(**kw):
    """A dataclass field holding embedded signed messages."""
    return dataclasses.field(metadata={"cert": True}, **kw)


def hidden_field(**kw):
    return dataclasses.field(metadata={"hidden": True}, **kw)


@dataclass(frozen=True, eq=False)
class Message:
    id: int
    src: int
    dst: int
    payload: Payload
    authentic_from: int

    @property
    def kind(self) -> str:
        return self.payload.kind


@dataclass(frozen=True)
class TraceEvent:
    step: int
    kind: str
    proc: int
    fields: Tuple[Tuple[str, str], ...] = ()
    label: Optional[Label] = None

    def get(self, key: str, default=None):
        for k, v in self.fields:
            if k == key:
                return v
        return default

    def format(self, with_sn: bool = True) -> str:
        head = f"step={self.step} kind={self.kind} proc={self.proc}"
        if self.label is not None:
            return f"{head} {self.label.format(with_sn)}"
        if self.fields:
            return head + " " + " ".join(f"{k}={v}" for k, v in self.fields)
        return head


@dataclass
class Decision:
    step: int
    proc: int
    sn: int
    value: str
    ident: Optional[str] = None


@dataclass
class Trace:
    header: Dict[str, str]
    events: List[TraceEvent]

    @property
    def with_sn(self) -> bool:
        return self.header.get("protocol") not in ("paxos", "raft", "hotstuff")

    def format(self) -> str:
        head = "# " + " ".join(f"{k}={v}" for k, v in self.header.items())
        body = "".join(e.format(self.with_sn) + "\n" for e in self.events)
        return head + "\n" + body

    def digest(self) -> str:
        return hashlib.sha256(self.format().encode()).hexdigest()

    def linpoints(self) -> List[TraceEvent]:
        return [e for e in self.events if e.kind == LINPOINT]

    def decisions(self) -> List[Decision]:
        out = []
        for e in self.events:
            if e.kind == DECIDE:
                ident = e.get("id")
                out.append(Decision(e.step, e.proc, int(e.get("sn")), e.get("v"), ident))
        return out


class TraceParseError(ValueError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


def parse_trace(text: str) -> Trace:
    header: Dict[str, str] = {}
    events: List[TraceEvent] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            for item in line[1:].split():
                k, sep, v = item.partition("=")
                if sep:
                    header[k] = v
            continue
        try:
            fields = split_fields(line, lineno)
            step = int(fields.pop("step"))
            kind = fields.pop("kind")
            proc = int(fields.pop("proc"))
        except (KeyError, ValueError) as exc:
            raise TraceParseError(lineno, f"malformed event line ({exc})") from None
        if kind not in EVENT_KINDS:
            raise TraceParseError(lineno, f"unknown event kind {kind!r}")
        label = None
        if kind == LINPOINT:
            try:
                label = parse_fields(fields, lineno)
            except LabelParseError as exc:
                raise TraceParseError(lineno, str(exc).split(": ", 1)[-1]) from None
            fields = {}
        events.append(TraceEvent(step, kind, proc, tuple(fields.items()), label))
    return Trace(header, events)


# -- scripted schedules --------------------------------------------------------

@dataclass(frozen=True)
class Selector:
    """Picks one pending transition: ``deliver``/``drop`` a message or fire a ``timeout``.

    Message selectors match the oldest pending copy whose sender, receiver,
    message kind and payload attributes agree with the given filters.
    """

    action: str
    proc: Optional[int] = None
    src: Optional[int] = None
    m: Optional[str] = None
    attrs: Tuple[Tuple[str, str], ...] = ()

    def matches(self, msg: Message) -> bool:
        if self.proc is not None and msg.dst != self.proc:
            return False
        if self.src is not None and msg.src != self.src:
            return False
        if self.m is not None and msg.kind != self.m:
            return False
        for key, want in self.attrs:
            if text_of(getattr(msg.payload, key, None)) != want:
                return False
        return True

    def format(self) -> str:
        if self.action == TIMEOUT:
            return f"timeout p={self.proc}"
        parts = [self.action]
        if self.src is not None:
            parts.append(f"from={self.src}")
        if self.proc is not None:
            parts.append(f"to={self.proc}")
        if self.m is not None:
            parts.append(f"m={self.m}")
        parts += [f"{k}={v}" for k, v in self.attrs]
        return " ".join(parts)


def timeout(p: int) -> Selector:
    return Selector(TIMEOUT, proc=p)


def deliver(src: int, dst: int, m: str, **attrs) -> Selector:
    return Selector(DELIVER, dst, src, m, tuple((k, text_of(v)) for k, v in attrs.items()))


def drop(src: int, dst: int, m: str, **attrs) -> Selector:
    return Selector(DROP, dst, src, m, tuple((k, text_of(v)) for k, v in attrs.items()))


def parse_schedule(text: str) -> List[Selector]:
    out = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        action, *rest = line.split()
        try:
            fields = dict(item.split("=", 1) for item in rest)
        except ValueError:
            raise ScheduleError(f"line {lineno}: expected key=value items in {line!r}") from None
        if action == TIMEOUT:
            if "p" not in fields:
                raise ScheduleError(f"line {lineno}: timeout needs p=<process>")
            out.append(timeout(int(fields["p"])))
        elif action in (DELIVER, DROP):
            src = fields.pop("from", None)
            dst = fields.pop("to", None)
            m = fields.pop("m", None)
            out.append(Selector(
                action,
                None if dst is None else int(dst),
                None if src is None else int(src),
                m,
                tuple(fields.items()),
            ))
        else:
            raise ScheduleError(f"line {lineno}: unknown action {action!r}")
    return out


def format_schedule(selectors: Iterable[Selector]) -> str:
    return "".join(s.format() + "\n" for s in selectors)


# -- processes ------------------------------------------------------------------

class Context:
    """A process's only handle on the kernel; bound to one process id."""

    def __init__(self, kernel: "Kernel", pid: int):
        self._kernel = kernel
        self.pid = pid

    @property
    def step(self) -> int:
        return self._kernel.step_no

    @property
    def config(self) -> SimConfig:
        return self._kernel.config

    def send(self, dst: int, payload: Payload) -> Message:
        return self._kernel._send(self.pid, dst, payload)

    def send_as(self, src: int, dst: int, payload: Payload) -> Message:
        """Send claiming ``src`` as the author; anything but one's own id is forgery."""
        if src != self.pid:
            raise ForgeryError(f"process {self.pid} tried to send as {src}")
        return self.send(dst, payload)

    def broadcast(self, payload: Payload) -> List[Message]:
        return [self.send(dst, payload) for dst in self._kernel.pids]

    def decide(self, sn: int, value: str, ident: Optional[str] = None) -> None:
        self._kernel._decide(self.pid, sn, value, ident)

    def linpoint(self, label: Label) -> None:
        self._kernel._linpoint(self.pid, label)

    def verify(self, msg: Message) -> bool:
        """True iff ``msg`` was minted by the kernel exactly as given."""
        return self._kernel.verify(msg)

    def rng(self) -> random.Random:
        return self._kernel.rng


class Process:
    """Base for protocol state machines driven by the kernel."""

    def __init__(self, pid: int, ctx: Context, config: SimConfig):
        self.pid = pid
        self.ctx = ctx
        self.config = config

    def on_message(self, msg: Message) -> None:
        pass

    def on_timeout(self) -> None:
        pass

    def wants_timeout(self) -> bool:
        return False


class Observer:
    """Watches global sends and decisions; used for omniscient linearization points."""

    def on_send(self, msg: Message) -> None:
        pass

    def on_decide(self, pid: int, sn: int, value: str, ident: Optional[str]) -> None:
        pass


ProcessFactory = Callable[[int, Context, SimConfig], Process]


@dataclass
class _Pending:
    msg: Message
    ready_at: int
    seq: int


class Kernel:
    def __init__(self, config: SimConfig, factory: Optional[ProcessFactory] = None,
                 observer: Optional[Callable[["Kernel"], Observer]] = None):
        from ..protocols import registry

        self.config = config.resolved()
        self.rng = random.Random(self.config.seed)
        self.step_no = 0
        self.events: List[TraceEvent] = []
        self.pending: List[_Pending] = []
        self._seq = 0
        self._next_id = 0
        self._minted: Dict[int, Message] = {}
        self.pids = self.config.processes
        self.byzantine = frozenset(self.config.faults.byzantine)
        spec = registry.get(self.config.protocol)
        make = factory or spec.make_process
        self.processes: Dict[int, Process] = {}
        for pid in self.pids:
            ctx = Context(self, pid)
            if pid in self.byzantine:
                self.processes[pid] = spec.make_byzantine(pid, ctx, self.config, self.config.faults.strategy)
            else:
                self.processes[pid] = make(pid, ctx, self.config)
        make_observer = observer or spec.make_observer
        self.observer = make_observer(self) if make_observer else Observer()
        self.schedule = list(self.config.schedule) if self.config.schedule is not None else None
        self.finished = False

    # -- kernel services ------------------------------------------------

    def crashed(self, pid: int, step: Optional[int] = None) -> bool:
        at = self.config.faults.crash_at.get(pid)
        return at is not None and (self.step_no if step is None else step) > at

    def _record(self, kind: str, proc: int, fields=(), label=None) -> TraceEvent:
        event = TraceEvent(self.step_no, kind, proc, tuple(fields), label)
        self.events.append(event)
        return event

    def _send(self, src: int, dst: int, payload: Payload) -> Message:
        if dst not in self.processes:
            raise KernelFault(f"process {src} sent to unknown process {dst}")
        self._next_id += 1
        msg = Message(self._next_id, src, dst, payload, authentic_from=src)
        self._minted[msg.id] = msg
        summary = payload.summary()
        self._record(SEND, src, [("to", str(dst)), ("id", str(msg.id)), ("msg", summary)])
        self.observer.on_send(msg)
        fp = self.config.faults
        if self.schedule is None:
            if any(p.splits(self.step_no, src, dst) for p in fp.partitions):
                self._drop(msg, "partition")
                return msg
            if fp.drop_prob and self.rng.random() < fp.drop_prob:
                self._drop(msg, "loss")
                return msg
            copies = 2 if fp.duplicate_prob and self.rng.random() < fp.duplicate_prob else 1
        else:
            copies = 1
        lo, hi = fp.delay_range
        for _ in range(copies):
            delay = self.rng.randint(lo, hi) if (hi > 0 and self.schedule is None) else 0
            self._seq += 1
            self.pending.append(_Pending(msg, self.step_no + 1 + delay, self._seq))
        return msg

    def _drop(self, msg: Message, reason: str) -> None:
        self._record(DROP, msg.dst, [("from", str(msg.src)), ("id", str(msg.id)),
                                     ("reason", reason), ("msg", msg.payload.summary())])

    def _decide(self, pid: int, sn: int, value: str, ident: Optional[str]) -> None:
        fields = [("sn", str(sn)), ("v", value)]
        if ident is not None:
            fields.append(("id", ident))
        self._record(DECIDE, pid, fields)
        self.observer.on_decide(pid, sn, value, ident)

    def _linpoint(self, pid: int, label: Label) -> None:
        self._record(LINPOINT, pid, label=label)

    # observers work from outside any process and use these two
    def verify(self, msg: Message) -> bool:
        return self._minted.get(msg.id) is msg

    def linpoint(self, pid: int, label: Label) -> None:
        self._linpoint(pid, label)

    # -- scheduling ---------------------------------------------------------

    def _timeouts(self) -> List[int]:
        return [p for p in self.pids if not self.crashed(p) and self.processes[p].wants_timeout()]

    def step(self) -> Optional[List[TraceEvent]]:
        """Advance one transition; returns the events it produced, or None when the run is over."""
        if self.finished or self.step_no >= self.config.max_steps:
            self.finished = True
            return None
        self.step_no += 1
        mark = len(self.events)
        if self.schedule is not None:
            if not self.schedule:
                self.finished = True
                self.step_no -= 1
                return None
            self._scripted(self.schedule.pop(0))
            return self.events[mark:]

        ready = [p for p in self.pending if p.ready_at <= self.step_no]
        timeouts = self._timeouts()
        if not ready and not timeouts:
            if not self.pending:
                self.finished = True
                self.step_no -= 1
                return None
            # nothing is deliverable yet: skip ahead to the next arrival
            arrival = min(p.ready_at for p in self.pending)
            if arrival > self.config.max_steps:
                self.finished = True
                self.step_no -= 1
                return None
            self.step_no = arrival
            ready = [p for p in self.pending if p.ready_at <= self.step_no]
            timeouts = self._timeouts()
        if timeouts and (not ready or self.rng.random() < self.config.timeout_prob):
            self._fire(timeouts[self.rng.randrange(len(timeouts))])
        else:
            self._deliver(ready[self.rng.randrange(len(ready))])
        return self.events[mark:]

    def _scripted(self, sel: Selector) -> None:
        if sel.action == TIMEOUT:
            if self.crashed(sel.proc):
                raise ScheduleError(f"step {self.step_no}: process {sel.proc} has crashed")
            self._fire(sel.proc)
            return
        for p in sorted(self.pending, key=lambda p: p.seq):
            if sel.matches(p.msg):
                if sel.action == DELIVER:
                    self._deliver(p)
                else:
                    self.pending.remove(p)
                    self._drop(p.msg, "scripted")
                return
        raise ScheduleError(f"step {self.step_no}: nothing pending matches {sel.format()!r}")

    def _fire(self, pid: int) -> None:
        self._record(TIMEOUT, pid)
        self.processes[pid].on_timeout()

    def _deliver(self, pending: _Pending) -> None:
        self.pending.remove(pending)
        msg = pending.msg
        if self.crashed(msg.dst):
            self._drop(msg, "crashed")
            return
        self._record(DELIVER, msg.dst, [("from", str(msg.src)), ("id", str(msg.id)),
                                        ("msg", msg.payload.summary())])
        self.processes[msg.dst].on_message(msg)

    def run(self) -> Trace:
        while self.step() is not None:
            pass
        return self.trace()

    def trace(self) -> Trace:
        cfg = self.config
        header = {
            "protocol": cfg.protocol, "n": str(cfg.n), "f": str(cfg.f),
            "q1": str(cfg.q1), "q2": str(cfg.q2), "seed": str(cfg.seed),
            "mode": cfg.mode,
            "byzantine": ",".join(str(p) for p in sorted(self.byzantine)) or "-",
            "values": ",".join(cfg.client_values),
        }
        return Trace(header, list(self.events))


def run(config: SimConfig, factory: Optional[ProcessFactory] = None, observer=None) -> Trace:
    return Kernel(config, factory, observer).run()
