"""Name to protocol lookup used by the kernel."""

from __future__ import annotations

import importlib
from dataclasses import dataclass
from typing import Callable, Optional


@dataclass(frozen=True)
class ProtocolSpec:
    name: str
    make_process: Callable
    make_byzantine: Optional[Callable] = None
    make_observer: Optional[Callable] = None


def get(name: str) -> ProtocolSpec:
    # imported lazily so protocol modules may import the kernel freely
    table = {
        "paxos": ("paxos", "SPEC"),
        "multipaxos": ("paxos", "MULTI_SPEC"),
        "raft": ("raft", "SPEC"),
        "pbft": ("pbft", "SPEC"),
        "hotstuff": ("hotstuff", "SPEC"),
    }
    try:
        module, attr = table[name]
    except KeyError:
        raise ValueError(f"unknown protocol {name!r}") from None
    return getattr(importlib.import_module(f"{__package__}.{module}"), attr)
