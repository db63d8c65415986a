"""Simulation configuration and its flat ``key = value`` text form."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Dict, FrozenSet, List, Optional, Tuple

if TYPE_CHECKING:
    from .kernel import Selector

PROTOCOLS = ("paxos", "multipaxos", "raft", "pbft", "hotstuff")
CRASH_PROTOCOLS = ("paxos", "multipaxos", "raft")
BFT_PROTOCOLS = ("pbft", "hotstuff")
STRATEGIES = ("equivocate", "withhold", "replay-stale-certificate", "vote-without-join")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Partition:
    """Messages sent in ``[start, end]`` between ``side`` and the rest are lost."""

    start: int
    end: int
    side: FrozenSet[int]

    def splits(self, step: int, a: int, b: int) -> bool:
        return self.start <= step <= self.end and ((a in self.side) != (b in self.side))


@dataclass(frozen=True)
class FaultPlan:
    drop_prob: float = 0.0
    delay_range: Tuple[int, int] = (0, 0)
    duplicate_prob: float = 0.0
    byzantine: FrozenSet[int] = frozenset()
    strategy: Optional[str] = None
    crash_at: Dict[int, int] = field(default_factory=dict)
    partitions: Tuple[Partition, ...] = ()


@dataclass(frozen=True)
class SimConfig:
    protocol: str = "paxos"
    n: Optional[int] = None
    f: int = 1
    q1: Optional[int] = None
    q2: Optional[int] = None
    max_steps: int = 500
    seed: int = 0
    faults: FaultPlan = FaultPlan()
    schedule: Optional[Tuple["Selector", ...]] = None
    client_values: Tuple[str, ...] = ("v1", "v2", "v3")
    instances: int = 1
    max_round: int = 12
    timeout_prob: float = 0.05

    @property
    def processes(self) -> List[int]:
        return list(range(1, self.n + 1))

    def leader(self, r: int) -> int:
        """Round-robin leader; process ids run from 1 to n."""
        return (r - 1) % self.n + 1

    @property
    def mode(self) -> str:
        return "smr" if self.protocol in ("raft", "hotstuff") else "single-decree"

    @property
    def single_instance(self) -> bool:
        return self.protocol in ("paxos", "raft", "hotstuff")

    def resolved(self) -> "SimConfig":
        """Fill protocol defaults and validate; raises :class:`ConfigError`."""
        if self.protocol not in PROTOCOLS:
            raise ConfigError(f"unknown protocol {self.protocol!r}")
        if self.f < 0:
            raise ConfigError("f must be non-negative")
        bft = self.protocol in BFT_PROTOCOLS
        n = self.n if self.n is not None else (3 * self.f + 1 if bft else 2 * self.f + 1)
        # smallest quorum size whose pairs intersect (in a correct process for BFT);
        # f+1 and 2f+1 at the canonical sizes n=2f+1 and n=3f+1
        quorum = (n + self.f) // 2 + 1 if bft else n // 2 + 1
        if (self.q1 is not None or self.q2 is not None) and self.protocol != "multipaxos":
            raise ConfigError("quorum overrides are only supported for multipaxos")
        q1 = self.q1 if self.q1 is not None else quorum
        q2 = self.q2 if self.q2 is not None else quorum
        out = dataclasses.replace(self, n=n, q1=q1, q2=q2)
        out.validate()
        return out

    def validate(self) -> None:
        n = self.n
        if n is None or n < 1:
            raise ConfigError("n must be a positive process count")
        if not (1 <= self.q1 <= n and 1 <= self.q2 <= n):
            raise ConfigError(f"quorum sizes must lie in 1..{n}")
        if self.protocol in BFT_PROTOCOLS and n < 3 * self.f + 1:
            raise ConfigError(f"{self.protocol} needs n >= 3f+1")
        if self.protocol in CRASH_PROTOCOLS and n < 2 * self.f + 1:
            raise ConfigError(f"{self.protocol} needs n >= 2f+1")
        fp = self.faults
        for name in ("drop_prob", "duplicate_prob"):
            p = getattr(fp, name)
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"{name} must be a probability")
        if not 0.0 <= self.timeout_prob <= 1.0:
            raise ConfigError("timeout_prob must be a probability")
        lo, hi = fp.delay_range
        if lo < 0 or hi < lo:
            raise ConfigError("delay_range must be a non-negative interval")
        unknown = set(fp.byzantine) | set(fp.crash_at)
        unknown -= set(self.processes)
        if unknown:
            raise ConfigError(f"unknown process ids {sorted(unknown)}")
        if fp.byzantine:
            if self.protocol in CRASH_PROTOCOLS:
                raise ConfigError(f"{self.protocol} assumes no Byzantine processes")
            if len(fp.byzantine) > self.f:
                raise ConfigError("more Byzantine processes than the fault budget f")
            if fp.strategy not in STRATEGIES:
                raise ConfigError(f"Byzantine processes need a strategy from {STRATEGIES}")
        if not self.client_values:
            raise ConfigError("at least one client value is required")
        if self.instances < 1:
            raise ConfigError("instances must be positive")
        if self.max_steps < 0 or self.max_round < 1:
            raise ConfigError("max_steps and max_round must be positive")


# -- flat text form --------------------------------------------------------

def _ints(text: str) -> List[int]:
    text = text.strip()
    return [int(x) for x in text.split(",") if x.strip()] if text else []


def parse_config(text: str, base: Optional[SimConfig] = None) -> SimConfig:
    """Parse ``key = value`` lines into a config (unresolved)."""
    from .kernel import parse_schedule

    cfg = base or SimConfig()
    top: Dict[str, object] = {}
    faults: Dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = key.strip(), value.strip()
        try:
            if key in ("protocol",):
                top[key] = value
            elif key in ("n", "q1", "q2"):
                top[key] = int(value) if value else None
            elif key in ("f", "max_steps", "seed", "instances", "max_round"):
                top[key] = int(value)
            elif key == "timeout_prob":
                top[key] = float(value)
            elif key == "client_values":
                top[key] = tuple(v.strip() for v in value.split(",") if v.strip())
            elif key == "schedule":
                top[key] = tuple(parse_schedule(value.replace(";", "\n")))
            elif key in ("drop_prob", "duplicate_prob"):
                faults[key] = float(value)
            elif key == "delay_range":
                lo, _, hi = value.partition("..")
                faults[key] = (int(lo), int(hi or lo))
            elif key == "byzantine":
                faults[key] = frozenset(_ints(value))
            elif key == "strategy":
                faults[key] = value or None
            elif key == "crash_at":
                pairs = [item.split(":") for item in value.split(",") if item.strip()]
                faults[key] = {int(p): int(s) for p, s in pairs}
            elif key == "partitions":
                parts = []
                for item in value.split(";"):
                    if not item.strip():
                        continue
                    span, _, side = item.partition("@")
                    lo, _, hi = span.partition("..")
                    parts.append(Partition(int(lo), int(hi), frozenset(_ints(side))))
                faults[key] = tuple(parts)
            else:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
    fp = dataclasses.replace(cfg.faults, **faults)
    return dataclasses.replace(cfg, faults=fp, **top)


def format_config(cfg: SimConfig) -> str:
    fp = cfg.faults
    lines = [
        f"protocol = {cfg.protocol}",
        f"n = {'' if cfg.n is None else cfg.n}",
        f"f = {cfg.f}",
        f"q1 = {'' if cfg.q1 is None else cfg.q1}",
        f"q2 = {'' if cfg.q2 is None else cfg.q2}",
        f"max_steps = {cfg.max_steps}",
        f"seed = {cfg.seed}",
        f"client_values = {','.join(cfg.client_values)}",
        f"instances = {cfg.instances}",
        f"max_round = {cfg.max_round}",
        f"timeout_prob = {cfg.timeout_prob!r}",
        f"drop_prob = {fp.drop_prob!r}",
        f"delay_range = {fp.delay_range[0]}..{fp.delay_range[1]}",
        f"duplicate_prob = {fp.duplicate_prob!r}",
        f"byzantine = {','.join(str(p) for p in sorted(fp.byzantine))}",
        f"strategy = {fp.strategy or ''}",
        f"crash_at = {','.join(f'{p}:{s}' for p, s in sorted(fp.crash_at.items()))}",
        "partitions = " + ";".join(
            f"{p.start}..{p.end}@{','.join(str(x) for x in sorted(p.side))}" for p in fp.partitions
        ),
    ]
    if cfg.schedule is not None:
        lines.append("schedule = " + ";".join(s.format() for s in cfg.schedule))
    return "\n".join(lines) + "\n"
