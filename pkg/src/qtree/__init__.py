"""QTree: a sequential tree abstraction of consensus, protocol simulators and refinement checks."""

from .core import MODES, SINGLE_DECREE, SMR, NodeStatus, QTree, QTreeForest, Ret, UnknownRound, UsageError
from .labels import Label, add, commit, format_sequence, parse_sequence
from .checker import Verdict, check_declarative, lemma1_statuses, replay

__all__ = [
    "MODES", "SINGLE_DECREE", "SMR", "NodeStatus", "QTree", "QTreeForest", "Ret",
    "UnknownRound", "UsageError", "Label", "add", "commit", "format_sequence",
    "parse_sequence", "Verdict", "check_declarative", "lemma1_statuses", "replay",
]

__version__ = "0.1.0"
