"""Round identifiers.

Two concrete forms share one total order per tree:

* ``nat``: plain non-negative ``int``; zero is ``0``.
* ``pair``: ``(term, index)`` tuples compared lexicographically; zero is the
  reserved ``(0, 0)``, which sorts below every ``(t, i)`` with ``t >= 1``.

Plain ints and tuples are used directly so comparisons stay native.
"""

from __future__ import annotations

from typing import Tuple, Union

Round = Union[int, Tuple[int, int]]

NAT = "nat"
PAIR = "pair"
ROUND_FORMS = (NAT, PAIR)

PAIR_ZERO: Tuple[int, int] = (0, 0)


def zero_round(form: str) -> Round:
    if form == NAT:
        return 0
    if form == PAIR:
        return PAIR_ZERO
    raise ValueError(f"unknown round form {form!r}")


def form_of(r: Round) -> str:
    if isinstance(r, tuple):
        return PAIR
    if isinstance(r, int) and not isinstance(r, bool):
        return NAT
    raise TypeError(f"not a round: {r!r}")


def is_zero(r: Round) -> bool:
    return r == 0 or r == PAIR_ZERO


def check_round(r: Round, form: str) -> None:
    """Raise if ``r`` is not a well-formed round of the given form."""
    if form == NAT:
        if isinstance(r, bool) or not isinstance(r, int) or r < 0:
            raise ValueError(f"expected a non-negative integer round, got {r!r}")
    elif form == PAIR:
        if not (isinstance(r, tuple) and len(r) == 2 and all(isinstance(x, int) for x in r)):
            raise ValueError(f"expected a (term, index) round, got {r!r}")
        if r != PAIR_ZERO and (r[0] < 1 or r[1] < 0):
            raise ValueError(f"pair rounds need term >= 1 and index >= 0, got {r!r}")
    else:
        raise ValueError(f"unknown round form {form!r}")


def format_round(r: Round) -> str:
    if isinstance(r, tuple):
        return f"{r[0]}.{r[1]}"
    return str(r)


def parse_round(text: str) -> Round:
    if "." in text:
        term, _, index = text.partition(".")
        return (int(term), int(index))
    value = int(text)
    if value < 0:
        raise ValueError(f"negative round {text!r}")
    return value
