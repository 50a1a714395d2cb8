"""
copg-toolkit - Operator Precedence Matrices
===========================================
Alphabets, the three precedence relations and the operator precedence
matrix (OPM) with its structural predicates: conflict-freedom, totality,
acyclicity of the equal-in-precedence relation, union and compatibility.

Usage:
    from opm_core import Opm, PrecRel, opm_lookup

    m = Opm.from_json({"alphabet": ["+", "n"],
                       "cells": [{"a": "#", "b": "n", "rel": "<"}]})
    opm_lookup(m, "#", "n")   # PrecRel.YIELDS

JSON form:
    {"alphabet": [...], "cells": [{"a": "+", "b": "×", "rel": "<"}, ...]}
    rel is one of "<", "=", ">" (the glyphs ⋖ ⩵ ⋗ are accepted too).
"""

import json
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, FrozenSet, Iterable, Iterator, List, Mapping, Optional, Tuple

logger = logging.getLogger(__name__)

DELIMITER = "#"

Pair = Tuple[str, str]


# =============================================================================
# RELATIONS AND ERRORS
# =============================================================================

class PrecRel(Enum):
    """Operator precedence relations."""
    YIELDS = "<"
    EQUALS = "="
    TAKES = ">"

    @property
    def glyph(self) -> str:
        return _GLYPHS[self]

    @classmethod
    def parse(cls, text: str) -> "PrecRel":
        for rel in cls:
            if text == rel.value or text == rel.glyph:
                return rel
        raise OpmFormatError(f"unknown precedence relation {text!r}")


_GLYPHS = {PrecRel.YIELDS: "⋖", PrecRel.EQUALS: "⩵", PrecRel.TAKES: "⋗"}


class OpmError(ValueError):
    """Base error for matrix misuse."""


class UnknownSymbol(OpmError):
    def __init__(self, symbol: str):
        super().__init__(f"symbol {symbol!r} is not in the alphabet")
        self.symbol = symbol


class ConflictError(OpmError):
    def __init__(self, a: str, b: str, relations: Iterable[PrecRel]):
        rels = " ".join(sorted(r.glyph for r in relations))
        super().__init__(f"conflicting relations {{{rels}}} in cell ({a}, {b})")
        self.a = a
        self.b = b


class OpmFormatError(OpmError):
    """Malformed matrix file or JSON document."""


@dataclass(frozen=True)
class Conflict:
    """A cell holding more than one relation."""
    a: str
    b: str
    relations: FrozenSet[PrecRel]
    sources: Tuple[str, ...] = ()

    def describe(self) -> str:
        rels = " ".join(sorted(r.glyph for r in self.relations))
        text = f"({self.a}, {self.b}): {{{rels}}}"
        if self.sources:
            text += " from " + "; ".join(self.sources)
        return text


# =============================================================================
# MATRIX
# =============================================================================

class Opm:
    """
    Partial map from pairs over the alphabet plus # to sets of relations.

    Cells keep sets so that conflicting extractions can be reported; lookups
    demand a single relation. By convention a non-empty (#, #) cell holds ⩵.
    """

    def __init__(self, alphabet: Iterable[str],
                 cells: Optional[Mapping[Pair, Iterable[PrecRel]]] = None):
        ordered: List[str] = []
        for sym in alphabet:
            if not isinstance(sym, str) or not sym:
                raise OpmError(f"terminals must be non-empty strings, got {sym!r}")
            if sym == DELIMITER:
                raise OpmError("the delimiter # is reserved and cannot be a terminal")
            if sym not in ordered:
                ordered.append(sym)
        self._alphabet: Tuple[str, ...] = tuple(ordered)
        self._known = frozenset(ordered) | {DELIMITER}
        self._cells: Dict[Pair, FrozenSet[PrecRel]] = {}
        for (a, b), rels in (cells or {}).items():
            self._check(a)
            self._check(b)
            rels = frozenset(rels)
            if not rels:
                continue
            if a == DELIMITER and b == DELIMITER:
                rels = frozenset({PrecRel.EQUALS})
            self._cells[(a, b)] = rels

    def _check(self, sym: str) -> None:
        if sym not in self._known:
            raise UnknownSymbol(sym)

    @property
    def alphabet(self) -> Tuple[str, ...]:
        return self._alphabet

    @property
    def symbols(self) -> Tuple[str, ...]:
        """Alphabet followed by the delimiter."""
        return self._alphabet + (DELIMITER,)

    def __contains__(self, sym: str) -> bool:
        return sym in self._known

    def relations(self, a: str, b: str) -> FrozenSet[PrecRel]:
        self._check(a)
        self._check(b)
        return self._cells.get((a, b), frozenset())

    def lookup(self, a: str, b: str) -> Optional[PrecRel]:
        rels = self.relations(a, b)
        if not rels:
            return None
        if len(rels) > 1:
            raise ConflictError(a, b, rels)
        return next(iter(rels))

    def cells(self) -> Iterator[Tuple[Pair, FrozenSet[PrecRel]]]:
        """Non-empty cells in row-major symbol order."""
        for a in self.symbols:
            for b in self.symbols:
                rels = self._cells.get((a, b))
                if rels:
                    yield (a, b), rels

    def conflicts(self) -> List[Conflict]:
        return [Conflict(a, b, rels) for (a, b), rels in self.cells() if len(rels) > 1]

    def is_conflict_free(self) -> bool:
        return all(len(rels) == 1 for rels in self._cells.values())

    def is_total(self) -> bool:
        return all((a, b) in self._cells for a in self.symbols for b in self.symbols)

    def eq_cycle(self) -> Optional[List[str]]:
        """One cycle of ⩵ edges over the alphabet (delimiter excluded), or None."""
        succ = {
            a: [b for b in self._alphabet if PrecRel.EQUALS in self._cells.get((a, b), ())]
            for a in self._alphabet
        }
        done = set()
        for root in self._alphabet:
            if root in done:
                continue
            path: List[str] = []
            on_path = {}
            stack = [(root, iter(succ[root]))]
            path.append(root)
            on_path[root] = 0
            while stack:
                node, it = stack[-1]
                nxt = next(it, None)
                if nxt is None:
                    stack.pop()
                    path.pop()
                    del on_path[node]
                    done.add(node)
                    continue
                if nxt in on_path:
                    return path[on_path[nxt]:] + [nxt]
                if nxt in done:
                    continue
                on_path[nxt] = len(path)
                path.append(nxt)
                stack.append((nxt, iter(succ[nxt])))
        return None

    def column(self, b: str) -> FrozenSet[PrecRel]:
        """All relations occurring in column b."""
        self._check(b)
        found = set()
        for a in self.symbols:
            found |= self._cells.get((a, b), frozenset())
        return frozenset(found)

    def row(self, a: str) -> FrozenSet[PrecRel]:
        """All relations occurring in row a."""
        self._check(a)
        found = set()
        for b in self.symbols:
            found |= self._cells.get((a, b), frozenset())
        return frozenset(found)

    def union(self, other: "Opm") -> "Opm":
        alphabet = list(self._alphabet) + [s for s in other.alphabet if s not in self._known]
        cells: Dict[Pair, set] = {}
        for source in (self, other):
            for pair, rels in source.cells():
                cells.setdefault(pair, set()).update(rels)
        return Opm(alphabet, cells)

    def restrict(self, alphabet: Iterable[str]) -> "Opm":
        keep = [s for s in self._alphabet if s in set(alphabet)]
        allowed = set(keep) | {DELIMITER}
        cells = {
            (a, b): rels for (a, b), rels in self.cells()
            if a in allowed and b in allowed
        }
        return Opm(keep, cells)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Opm):
            return NotImplemented
        return set(self._alphabet) == set(other._alphabet) and self._cells == other._cells

    def __hash__(self) -> int:
        return hash((frozenset(self._alphabet), frozenset(self._cells.items())))

    def __repr__(self) -> str:
        return f"Opm(alphabet={list(self._alphabet)!r}, cells={len(self._cells)})"

    # -------------------------------------------------------------------------
    # Formats
    # -------------------------------------------------------------------------

    def to_json(self) -> Dict[str, Any]:
        return {
            "alphabet": list(self._alphabet),
            "cells": [
                {"a": a, "b": b, "rel": rel.value}
                for (a, b), rels in self.cells()
                for rel in sorted(rels, key=lambda r: r.value)
            ],
        }

    @classmethod
    def from_json(cls, data: Any) -> "Opm":
        if not isinstance(data, dict) or "alphabet" not in data:
            raise OpmFormatError("matrix JSON needs an 'alphabet' list")
        alphabet = data["alphabet"]
        if not isinstance(alphabet, list):
            raise OpmFormatError("'alphabet' must be a list")
        cells: Dict[Pair, set] = {}
        for i, cell in enumerate(data.get("cells", [])):
            try:
                a, b, rel = cell["a"], cell["b"], cell["rel"]
            except (KeyError, TypeError):
                raise OpmFormatError(f"cell #{i} needs 'a', 'b' and 'rel'")
            cells.setdefault((a, b), set()).add(PrecRel.parse(rel))
        try:
            return cls(alphabet, cells)
        except OpmFormatError:
            raise
        except OpmError as e:
            raise OpmFormatError(str(e))

    def format_table(self) -> str:
        """Aligned matrix with rows for the left symbol, as in the textbook layout."""
        syms = self.symbols
        width = max(len(s) for s in syms)
        cellw = max(width, 3)

        def cell(a: str, b: str) -> str:
            rels = self._cells.get((a, b), frozenset())
            return "".join(sorted(r.glyph for r in rels))

        lines = [" " * width + " | " + " ".join(s.center(cellw) for s in syms)]
        lines.append("-" * len(lines[0]))
        for a in syms:
            lines.append(a.ljust(width) + " | " + " ".join(cell(a, b).center(cellw) for b in syms))
        return "\n".join(line.rstrip() for line in lines)


def split_terminals(text: str) -> Tuple[str, ...]:
    """Whitespace-separated tokens if the text has whitespace, else one terminal per character."""
    text = text.strip()
    if not text:
        return ()
    if any(ch.isspace() for ch in text):
        return tuple(text.split())
    return tuple(text)


def join_terminals(word: Iterable[str]) -> str:
    """Inverse of split_terminals."""
    word = list(word)
    if all(len(t) == 1 for t in word):
        return "".join(word)
    return " ".join(word)


def load_opm(path: str) -> Opm:
    """Read a matrix JSON file."""
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise OpmFormatError(f"{path}: invalid JSON at line {e.lineno}: {e.msg}")
    try:
        m = Opm.from_json(data)
    except OpmFormatError as e:
        raise OpmFormatError(f"{path}: {e}")
    logger.debug(f"Loaded matrix from {path}: {m!r}")
    return m


# =============================================================================
# CONVENIENCE FUNCTIONS
# =============================================================================

def opm_lookup(m: Opm, a: str, b: str) -> Optional[PrecRel]:
    return m.lookup(a, b)


def opm_is_conflict_free(m: Opm) -> Tuple[bool, List[Conflict]]:
    conflicts = m.conflicts()
    return not conflicts, conflicts


def opm_is_total(m: Opm) -> bool:
    return m.is_total()


def opm_is_eq_acyclic(m: Opm) -> Tuple[bool, Optional[List[str]]]:
    cycle = m.eq_cycle()
    return cycle is None, cycle


def opm_union(m1: Opm, m2: Opm) -> Opm:
    return m1.union(m2)


def opm_compatible(m1: Opm, m2: Opm) -> bool:
    return m1.union(m2).is_conflict_free()


def opm_restrict(m: Opm, alphabet: Iterable[str]) -> Opm:
    return m.restrict(alphabet)
