"""
copg-toolkit - OPM-Driven Structure Parsing
===========================================
Turns terminal strings into unranked syntax trees using nothing but the
precedence matrix, labels them with grammar rules when a grammar is given,
and converts trees to chains (with their nesting depth).

Usage:
    from opm_core import load_opm
    from structure_parser import parse_opm, to_sexpr

    m = load_opm("samples/fig2.opm.json")
    to_sexpr(parse_opm(m, "n+n×n+n"))
    # (N (N (N n) + (N (N n) × (N n))) + (N n))

Tree JSON:
    leaves {"t": "n"}, nodes {"nt": "E" | null, "children": [...]}
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Dict, FrozenSet, Hashable, Iterable, List, Optional, Sequence, Tuple, Union

from grammar import Copg, GrammarError, NonTerm, Rule, Term, compile_rhs, compute_opm
from opm_core import DELIMITER, Opm, OpmError, PrecRel, split_terminals

logger = logging.getLogger(__name__)


# =============================================================================
# TREES, CHAINS, ERRORS
# =============================================================================

@dataclass(frozen=True)
class Leaf:
    terminal: str


@dataclass(frozen=True)
class Node:
    label: Optional[Hashable]
    children: Tuple["SyntaxTree", ...]


SyntaxTree = Union[Leaf, Node]

# tree of the empty string
EMPTY_TREE = Node(None, ())


@dataclass(frozen=True)
class Chain:
    """
    context = (a0, a_{n+1}), spine = a1..an, gaps = x0..xn.

    A gap is None when empty, otherwise the chain of the subtree sitting
    between its two neighbouring terminals.
    """
    context: Tuple[str, str]
    spine: Tuple[str, ...]
    gaps: Tuple[Optional["Chain"], ...]

    @property
    def is_simple(self) -> bool:
        return all(g is None for g in self.gaps)

    def body(self) -> Tuple[str, ...]:
        out: List[str] = []
        for i, gap in enumerate(self.gaps):
            if gap is not None:
                out.extend(gap.body())
            if i < len(self.spine):
                out.append(self.spine[i])
        return tuple(out)


class ParseError(ValueError):
    """The input has no tree under the matrix or grammar."""


class NoRelation(ParseError):
    def __init__(self, a: str, b: str, position: int):
        super().__init__(f"no precedence relation between {a!r} and {b!r} at position {position}")
        self.a = a
        self.b = b
        self.position = position


class IncompleteParse(ParseError):
    pass


class NoRule(ParseError):
    def __init__(self, handle: str, position: int):
        super().__init__(f"no rule matches handle {handle!r} at position {position}")
        self.handle = handle
        self.position = position


class RootNotAxiom(ParseError):
    def __init__(self, label: Hashable):
        super().__init__(f"root label {label} is not an axiom")
        self.label = label


def _terminals(w: Union[str, Sequence[str]]) -> Tuple[str, ...]:
    return split_terminals(w) if isinstance(w, str) else tuple(w)


# =============================================================================
# SHIFT-REDUCE ENGINE
# =============================================================================

class _Pending:
    """A terminal waiting on the stack; mark is its relation to the terminal below."""
    __slots__ = ("symbol", "mark", "position")

    def __init__(self, symbol: str, mark: Optional[PrecRel], position: Optional[int]):
        self.symbol = symbol
        self.mark = mark
        self.position = position


@lru_cache(maxsize=64)
def forced_relations(m: Opm) -> Tuple[FrozenSet[str], FrozenSet[str]]:
    """
    Terminals whose left relation is ⋖ whatever precedes them, and terminals
    whose right relation is ⋗ whatever follows them.
    """
    opens = frozenset(b for b in m.alphabet if m.column(b) == {PrecRel.YIELDS})
    closes = frozenset(a for a in m.alphabet if m.row(a) == {PrecRel.TAKES})
    return opens, closes


class ReductionStack:
    """
    Operator precedence shift-reduce stack.

    With delimited=True the bottom is #, which is how the sequential parser
    runs. Without it the left context is unknown: the first terminal's left
    relation is only known when the matrix forces it, and handles opening
    there stay pending. The parallel driver uses that mode for chunks.
    """

    def __init__(self, m: Opm, delimited: bool = True):
        self.m = m
        self.entries: List[Union[_Pending, SyntaxTree]] = []
        self.terms: List[int] = []
        self.reductions = 0
        self.delimited = delimited
        self._opens, self._closes = forced_relations(m)
        if delimited:
            self.entries.append(_Pending(DELIMITER, None, 0))
            self.terms.append(0)

    def _is_bottom(self, idx: int) -> bool:
        return self.delimited and idx == 0

    def _push(self, symbol: str, mark: Optional[PrecRel], position: Optional[int]) -> None:
        self.terms.append(len(self.entries))
        self.entries.append(_Pending(symbol, mark, position))

    def _reduce(self) -> bool:
        """Reduce the handle ending at the top terminal; False when its opening is unknown."""
        j = len(self.terms) - 1
        while j >= 0 and self.entries[self.terms[j]].mark is PrecRel.EQUALS:
            j -= 1
        if j < 0 or self._is_bottom(self.terms[j]):
            return False
        if self.entries[self.terms[j]].mark is not PrecRel.YIELDS:
            return False
        start = self.terms[j - 1] + 1 if j >= 1 else 0
        children = tuple(
            Leaf(e.symbol) if isinstance(e, _Pending) else e for e in self.entries[start:]
        )
        del self.entries[start:]
        del self.terms[j:]
        self.entries.append(Node(None, children))
        self.reductions += 1
        return True

    def feed_terminal(self, b: str, position: Optional[int] = None) -> None:
        while True:
            if not self.terms:
                self._push(b, PrecRel.YIELDS if b in self._opens else None, position)
                return
            a = self.entries[self.terms[-1]].symbol
            rel = self.m.lookup(a, b)
            if rel is None:
                raise NoRelation(a, b, position if position is not None else -1)
            if rel is PrecRel.TAKES:
                if self._reduce():
                    continue
                self._push(b, None, position)
                return
            self._push(b, rel, position)
            return

    def feed_tree(self, tree: SyntaxTree) -> None:
        if self.entries and not isinstance(self.entries[-1], _Pending):
            raise IncompleteParse("two adjacent subtrees without a terminal between them")
        self.entries.append(tree)

    def close_forced(self) -> List[str]:
        """Reduce handles whose closing ⋗ the matrix forces; returns the closed terminals."""
        closed = []
        while self.terms and not self._is_bottom(self.terms[-1]):
            a = self.entries[self.terms[-1]].symbol
            if a not in self._closes or not self._reduce():
                break
            closed.append(a)
        return closed

    def close(self, position: int) -> SyntaxTree:
        """Feed the closing # and return the finished tree."""
        if not self.delimited:
            raise IncompleteParse("closing requires a delimited stack")
        while not self._is_bottom(self.terms[-1]):
            a = self.entries[self.terms[-1]].symbol
            rel = self.m.lookup(a, DELIMITER)
            if rel is None:
                raise NoRelation(a, DELIMITER, position)
            if rel is not PrecRel.TAKES or not self._reduce():
                raise IncompleteParse(f"input exhausted with {a!r} still open")
        rest = self.entries[1:]
        if not rest:
            return EMPTY_TREE
        if len(rest) == 1:
            return rest[0]
        raise IncompleteParse(f"input exhausted with {len(rest)} unreduced items")

    def items(self) -> List[Union[str, SyntaxTree]]:
        start = 1 if self.delimited else 0
        return [e.symbol if isinstance(e, _Pending) else e for e in self.entries[start:]]

    def marks(self) -> List[Optional[PrecRel]]:
        start = 1 if self.delimited else 0
        return [e.mark if isinstance(e, _Pending) else None for e in self.entries[start:]]

    def positions(self) -> List[Optional[int]]:
        start = 1 if self.delimited else 0
        return [e.position if isinstance(e, _Pending) else None for e in self.entries[start:]]

    def restore(self, items: Sequence[Union[str, SyntaxTree]], marks: Sequence[Optional[PrecRel]],
                positions: Sequence[Optional[int]]) -> None:
        """Load a previously exported undelimited state."""
        for item, mark, pos in zip(items, marks, positions):
            if isinstance(item, str):
                self._push(item, mark, pos)
            else:
                self.entries.append(item)


# =============================================================================
# PARSING
# =============================================================================

def annotate(m: Opm, w: Union[str, Sequence[str]]) -> List[Union[str, PrecRel]]:
    """Symbols of #w# interleaved with the relations between neighbours."""
    tokens = _terminals(w)
    if not tokens:
        return [DELIMITER, PrecRel.EQUALS, DELIMITER]
    seq = (DELIMITER,) + tokens + (DELIMITER,)
    out: List[Union[str, PrecRel]] = [DELIMITER]
    for i in range(len(seq) - 1):
        rel = m.lookup(seq[i], seq[i + 1])
        if rel is None:
            raise NoRelation(seq[i], seq[i + 1], i + 1)
        out += [rel, seq[i + 1]]
    return out


def format_annotation(annotation: Iterable[Union[str, PrecRel]]) -> str:
    return " ".join(x.glyph if isinstance(x, PrecRel) else x for x in annotation)


def parse_opm(m: Opm, w: Union[str, Sequence[str]]) -> SyntaxTree:
    """The unique anonymized tree the matrix assigns to w, in one left-to-right pass."""
    tokens = _terminals(w)
    stack = ReductionStack(m)
    for i, b in enumerate(tokens, 1):
        stack.feed_terminal(b, i)
    tree = stack.close(len(tokens) + 1)
    logger.debug(f"Parsed {len(tokens)} terminals with {stack.reductions} reductions")
    return tree


def parse_opm_rescan(m: Opm, w: Union[str, Sequence[str]]) -> SyntaxTree:
    """
    Reference procedure: display all relations, reduce every ⋖ ⩵* ⋗ span at
    once, and rescan until #N# remains. Quadratic; used as a test oracle.
    """
    tokens = _terminals(w)
    if not tokens:
        return EMPTY_TREE
    items: List[Union[str, SyntaxTree]] = [DELIMITER, *tokens, DELIMITER]
    while True:
        if len(items) == 3 and not isinstance(items[1], str):
            return items[1]
        term_idx = [i for i, x in enumerate(items) if isinstance(x, str)]
        rels = []
        for k in range(len(term_idx) - 1):
            a, b = items[term_idx[k]], items[term_idx[k + 1]]
            rel = m.lookup(a, b)
            if rel is None:
                raise NoRelation(a, b, k + 1)
            rels.append(rel)
        spans = []
        k = 0
        while k < len(rels):
            if rels[k] is not PrecRel.YIELDS:
                k += 1
                continue
            j = k + 1
            while j < len(rels) and rels[j] is PrecRel.EQUALS:
                j += 1
            if j < len(rels) and rels[j] is PrecRel.TAKES:
                spans.append((term_idx[k] + 1, term_idx[j + 1]))
                k = j
            else:
                k = j if j > k + 1 else k + 1
        if not spans:
            raise IncompleteParse("no reducible handle left")
        for lo, hi in reversed(spans):
            node = Node(None, tuple(Leaf(x) if isinstance(x, str) else x for x in items[lo:hi]))
            items[lo:hi] = [node]


def is_compatible(m: Opm, w: Union[str, Sequence[str]]) -> bool:
    try:
        parse_opm(m, w)
    except (ParseError, OpmError):
        return False
    return True


# =============================================================================
# TREE UTILITIES
# =============================================================================

def frontier(tree: SyntaxTree) -> Tuple[str, ...]:
    out: List[str] = []
    stack = [tree]
    while stack:
        t = stack.pop()
        if isinstance(t, Leaf):
            out.append(t.terminal)
        else:
            stack.extend(reversed(t.children))
    return tuple(out)


def count_nodes(tree: SyntaxTree) -> int:
    """Internal nodes, i.e. the reductions that built the tree."""
    count = 0
    stack = [tree]
    while stack:
        t = stack.pop()
        if isinstance(t, Node) and t.children:
            count += 1
            stack.extend(t.children)
    return count


def erase_labels(tree: SyntaxTree) -> SyntaxTree:
    if isinstance(tree, Leaf):
        return tree
    return Node(None, tuple(erase_labels(c) for c in tree.children))


def to_sexpr(tree: SyntaxTree) -> str:
    if isinstance(tree, Leaf):
        return tree.terminal
    if not tree.children:
        return "ε"
    label = "N" if tree.label is None else str(tree.label)
    return "(" + label + " " + " ".join(to_sexpr(c) for c in tree.children) + ")"


def tree_to_json(tree: SyntaxTree) -> Dict[str, Any]:
    if isinstance(tree, Leaf):
        return {"t": tree.terminal}
    label = None if tree.label is None else str(tree.label)
    return {"nt": label, "children": [tree_to_json(c) for c in tree.children]}


def tree_from_json(data: Dict[str, Any]) -> SyntaxTree:
    if "t" in data:
        return Leaf(data["t"])
    return Node(data.get("nt"), tuple(tree_from_json(c) for c in data.get("children", [])))


# =============================================================================
# LABELED PARSING
# =============================================================================

def _handle_text(node: Node) -> str:
    parts = [c.terminal if isinstance(c, Leaf) else "N" for c in node.children]
    return " ".join(parts)


def _first_position(tree: SyntaxTree, offsets: Dict[int, int]) -> int:
    return offsets.get(id(tree), 0) + 1


def parse_labeled(g: Copg, w: Union[str, Sequence[str]]) -> SyntaxTree:
    """
    Tree of w under g with every node labeled by a rule lhs.

    The structure comes from the grammar's matrix. Feasible labels are
    computed bottom-up, then labels are chosen top-down taking the first
    feasible rule in declaration order at every node.
    """
    report = compute_opm(g)
    if not report.is_copg:
        raise GrammarError("grammar has conflicting precedence relations: "
                           + "; ".join(c.describe() for c in report.conflicts))
    tokens = _terminals(w)
    if not tokens:
        for rule in g.rules:
            if not rule.rhs and rule.lhs in g.axioms:
                return Node(rule.lhs, ())
        raise NoRule("", 1)
    tree = parse_opm(report.opm, tokens)

    # post-order over the anonymized tree, remembering where each subtree starts
    order: List[Node] = []
    offsets: Dict[int, int] = {}
    stack: List[Tuple[SyntaxTree, int, bool]] = [(tree, 0, False)]
    while stack:
        t, start, expanded = stack.pop()
        if isinstance(t, Leaf):
            continue
        offsets[id(t)] = start
        if expanded:
            order.append(t)
            continue
        stack.append((t, start, True))
        pos = start
        child_starts = []
        for c in t.children:
            child_starts.append(pos)
            pos += len(frontier(c)) if isinstance(c, Node) else 1
        for c, s in reversed(list(zip(t.children, child_starts))):
            stack.append((c, s, False))

    choices: Dict[int, List[Tuple[Rule, List[int]]]] = {}
    for node in order:
        options = []
        for c in node.children:
            if isinstance(c, Leaf):
                options.append({Term(c.terminal)})
            else:
                options.append({NonTerm(r.lhs) for r, _ in choices[id(c)]})
        found = []
        for rule in g.rules:
            if not rule.rhs:
                continue
            path = compile_rhs(rule.rhs).find_path(options)
            if path is not None:
                found.append((rule, path))
        if not found:
            raise NoRule(_handle_text(node), _first_position(node, offsets))
        choices[id(node)] = found

    root_choice = next((rp for rp in choices[id(tree)] if rp[0].lhs in g.axioms), None)
    if root_choice is None:
        raise RootNotAxiom(choices[id(tree)][0][0].lhs)

    def build(node: Node, choice: Tuple[Rule, List[int]]) -> Node:
        rule, path = choice
        automaton = compile_rhs(rule.rhs)
        children = []
        for c, p in zip(node.children, path):
            if isinstance(c, Leaf):
                children.append(c)
            else:
                want = automaton.symbols[p].name
                sub = next(rp for rp in choices[id(c)] if rp[0].lhs == want)
                children.append(build(c, sub))
        return Node(rule.lhs, tuple(children))

    return build(tree, root_choice)


# =============================================================================
# CHAINS
# =============================================================================

def tree_to_chain(tree: Node, context: Tuple[str, str] = (DELIMITER, DELIMITER)) -> Chain:
    spine = tuple(c.terminal for c in tree.children if isinstance(c, Leaf))
    subtrees: List[Optional[Node]] = [None] * (len(spine) + 1)
    idx = 0
    for c in tree.children:
        if isinstance(c, Leaf):
            idx += 1
        else:
            subtrees[idx] = c
    gaps = []
    for i, sub in enumerate(subtrees):
        if sub is None:
            gaps.append(None)
            continue
        left = context[0] if i == 0 else spine[i - 1]
        right = context[1] if i == len(spine) else spine[i]
        gaps.append(tree_to_chain(sub, (left, right)))
    return Chain(context, spine, tuple(gaps))


def chain_to_tree(chain: Chain) -> Node:
    children: List[SyntaxTree] = []
    for i, gap in enumerate(chain.gaps):
        if gap is not None:
            children.append(chain_to_tree(gap))
        if i < len(chain.spine):
            children.append(Leaf(chain.spine[i]))
    return Node(None, tuple(children))


def chain_decompose(m: Opm, w: Union[str, Sequence[str]]) -> Chain:
    tree = parse_opm(m, w)
    if not tree.children:
        raise ParseError("the empty string has no chain")
    return tree_to_chain(tree)


def chain_depth(chain: Chain) -> int:
    """1 for a simple chain, else 1 + the deepest gap."""
    inner = [chain_depth(g) for g in chain.gaps if g is not None]
    return 1 + max(inner) if inner else 1


def drawn_depth(chain: Chain) -> int:
    """
    Depth counting the #-delimited node that tree drawings put on top.

    chain_depth measures nesting of chains only, so the main chain of
    n+n×n+n under the left-associative matrix has chain_depth 4. Drawn
    trees add a root for the # ... # context above it, which gives the 5
    quoted for that tree.
    """
    return chain_depth(chain) + 1


def chain_is_valid(m: Opm, chain: Chain) -> bool:
    """Precedence shape of a chain: a0 ⋖ a1 ⩵ ... ⩵ an ⋗ a_{n+1}, recursively."""
    a0, last = chain.context
    spine = chain.spine
    if not spine or len(chain.gaps) != len(spine) + 1:
        return False
    try:
        if m.lookup(a0, spine[0]) is not PrecRel.YIELDS:
            return False
        if any(m.lookup(x, y) is not PrecRel.EQUALS for x, y in zip(spine, spine[1:])):
            return False
        if m.lookup(spine[-1], last) is not PrecRel.TAKES:
            return False
        if (a0, last) != (DELIMITER, DELIMITER) and m.lookup(a0, last) is None:
            return False
    except OpmError:
        return False
    bounds = (a0,) + spine + (last,)
    for i, gap in enumerate(chain.gaps):
        if gap is not None:
            if gap.context != (bounds[i], bounds[i + 1]) or not chain_is_valid(m, gap):
                return False
    return True
