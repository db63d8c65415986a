"""Invocation labels and their one-line text form.

A label line looks like::

    sn=1 op=add r=3 v=v2 rp=0 res=OK
    sn=1 op=commit r=3 res=OK

Pair rounds are written ``term.index``.  ``sn`` may be omitted, in which
case it defaults to instance 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, List, Optional

from .core import Ret
from .rounds import Round, format_round, is_zero, parse_round

ADD = "add"
COMMIT = "commit"


class LabelParseError(ValueError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


@dataclass(frozen=True)
class Label:
    op: str
    r: Round
    v: Optional[str] = None
    rp: Optional[Round] = None
    res: Ret = Ret.OK
    sn: int = 0

    def __post_init__(self):
        if self.op not in (ADD, COMMIT):
            raise ValueError(f"unknown op {self.op!r}")
        if is_zero(self.r):
            raise ValueError("labels need a round above zero")
        if self.op == ADD and (self.v is None or self.rp is None):
            raise ValueError("add labels carry a value and a parent round")

    @property
    def ok(self) -> bool:
        return self.res is Ret.OK

    def with_result(self, res: Ret) -> "Label":
        return Label(self.op, self.r, self.v, self.rp, res, self.sn)

    def format(self, with_sn: bool = True) -> str:
        head = f"sn={self.sn} " if with_sn else ""
        if self.op == ADD:
            body = f"op=add r={format_round(self.r)} v={self.v} rp={format_round(self.rp)}"
        else:
            body = f"op=commit r={format_round(self.r)}"
        return f"{head}{body} res={self.res.value}"

    def __str__(self) -> str:
        if self.op == ADD:
            text = f"add({format_round(self.r)},{self.v},{format_round(self.rp)})"
        else:
            text = f"commit({format_round(self.r)})"
        return text if self.ok else f"{text}=>FAIL"


def add(r: Round, v: str, rp: Round, sn: int = 0, res: Ret = Ret.OK) -> Label:
    return Label(ADD, r, v, rp, res, sn)


def commit(r: Round, sn: int = 0, res: Ret = Ret.OK) -> Label:
    return Label(COMMIT, r, None, None, res, sn)


def parse_fields(fields: dict, lineno: int = 0) -> Label:
    try:
        op = fields["op"]
        sn = int(fields.get("sn", "0"))
        r = parse_round(fields["r"])
        res = Ret(fields.get("res", "OK"))
        if op == ADD:
            return Label(ADD, r, fields["v"], parse_round(fields["rp"]), res, sn)
        if op == COMMIT:
            return Label(COMMIT, r, None, None, res, sn)
        raise ValueError(f"unknown op {op!r}")
    except KeyError as exc:
        raise LabelParseError(lineno, f"missing field {exc.args[0]!r}") from None
    except ValueError as exc:
        raise LabelParseError(lineno, str(exc)) from None


def split_fields(line: str, lineno: int = 0) -> dict:
    fields = {}
    for item in line.split():
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise LabelParseError(lineno, f"expected key=value, got {item!r}")
        fields[key] = value
    return fields


def parse_label(line: str, lineno: int = 0) -> Label:
    return parse_fields(split_fields(line, lineno), lineno)


def parse_sequence(text: str) -> List[Label]:
    labels = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        labels.append(parse_label(line, lineno))
    return labels


def format_sequence(labels: Iterable[Label]) -> str:
    return "".join(label.format() + "\n" for label in labels)
