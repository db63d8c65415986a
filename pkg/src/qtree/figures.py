"""Reproduction of the worked examples as checked-in golden files.

Each figure is rendered as the instance's invocation sequence followed by
the snapshot of the QTree it produces:

``fig2``
    the add/commit walk-through, applied directly to a QTree;
``fig3``
    single-decree Paxos (n=3) driven by a scripted schedule;
``fig4``
    PBFT (n=4, f=1) driven by a scripted schedule, instance 1.

The scripted schedules and goldens live in the package's ``data``
directory.  ``flexible`` is an extra scripted scenario with quorums that
do not intersect; it has no golden and is expected to fail the checks.
"""

from __future__ import annotations

import difflib
from dataclasses import dataclass
from importlib import resources
from typing import List, Optional, Sequence, Tuple

from .checker import replay_tree
from .core import SINGLE_DECREE
from .labels import Label, add, commit
from .rounds import format_round
from .sim.config import SimConfig
from .sim.kernel import Trace, parse_schedule, run
from .harness import extract

FIGURE_VALUES = ("v1", "v0", "v2")


@dataclass(frozen=True)
class Scenario:
    name: str
    protocol: str
    n: int
    instance: int
    client_values: Tuple[str, ...] = FIGURE_VALUES
    q1: Optional[int] = None
    q2: Optional[int] = None

    def config(self) -> SimConfig:
        return SimConfig(
            protocol=self.protocol, n=self.n, q1=self.q1, q2=self.q2,
            client_values=self.client_values, schedule=tuple(parse_schedule(data_text(f"{self.name}.sched"))),
        )


SCENARIOS = {
    "fig3": Scenario("fig3", "paxos", 3, 0),
    "fig4": Scenario("fig4", "pbft", 4, 1),
    "flexible": Scenario("flexible", "multipaxos", 4, 0, ("va", "vx", "vb"), q1=1, q2=2),
}

FIG2_SEQUENCE = (add(1, "v1", 0), add(3, "v2", 0), add(2, "v1", 1), commit(3))

FIGURES = ("fig2", "fig3", "fig4")


def data_text(name: str) -> str:
    return resources.files("qtree").joinpath("data", name).read_text()


def scenario_trace(name: str) -> Trace:
    return run(SCENARIOS[name].config())


def figure_sequence(name: str) -> List[Label]:
    if name == "fig2":
        return list(FIG2_SEQUENCE)
    if name not in SCENARIOS:
        raise KeyError(f"unknown figure {name!r}")
    return extract(scenario_trace(name)).get(SCENARIOS[name].instance, [])


def render_sequence(seq: Sequence[Label], mode: str = SINGLE_DECREE) -> str:
    """The sequence, the QTree it builds, and the trunk, one item per line."""
    lines = [f"linpoint {label}" for label in seq]
    verdict, tree = replay_tree(seq, mode)
    lines.append(f"verdict {verdict}")
    lines.extend(tree.snapshot().splitlines())
    lines.append("trunk=" + ",".join(format_round(r) for r in tree.trunk()))
    return "\n".join(lines) + "\n"


def render(name: str) -> str:
    return f"# {name}\n" + render_sequence(figure_sequence(name))


def golden(name: str) -> str:
    if name not in FIGURES:
        raise KeyError(f"unknown figure {name!r}")
    return data_text(f"{name}.golden")


def compare(name: str) -> Tuple[bool, str]:
    """Render ``name`` and diff it against its golden; returns (match, unified diff)."""
    expected, actual = golden(name), render(name)
    if expected == actual:
        return True, ""
    diff = difflib.unified_diff(
        expected.splitlines(keepends=True), actual.splitlines(keepends=True),
        fromfile=f"{name}.golden", tofile=f"{name} (rendered)",
    )
    return False, "".join(diff)
