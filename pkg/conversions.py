"""
copg-toolkit - Grammar/Automaton Conversions
============================================
Builds an operator precedence automaton equivalent to a cyclic operator
grammar, and a grammar equivalent to an automaton.

Usage:
    from conversions import grammar_to_opa, opa_to_grammar

    a = grammar_to_opa(load_grammar("samples/gaae.copg"))
    a.accepts("n+n+n/n/n+n+n").accepted      # True
    g2 = opa_to_grammar(a)

Automaton states built from a grammar are pairs ⟨α,β⟩: α is the rhs prefix
under construction (or the nonterminal just reduced), β the prefix that was
under construction before it. Grammars built from an automaton use 4-tuple
nonterminals ⟨left context, entry state, exit state, right context⟩.
"""

import logging
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Dict, FrozenSet, Hashable, Iterator, List, Optional, Sequence, Set, Tuple

import settings
from grammar import (Copg, NonTerm, Plus, RhsItem, Rule, Symbol, Term, compute_opm, format_symbols, hat,
                     rhs_matches, validate)
from opa import Opa, State, format_state
from opm_core import DELIMITER, PrecRel

logger = logging.getLogger(__name__)

SymbolString = Tuple[Symbol, ...]


class ConversionError(ValueError):
    """Input unsuitable for a conversion."""


# =============================================================================
# TILDE AND PREFIX SETS
# =============================================================================

def _tilde_items(items: Sequence[RhsItem]) -> Set[SymbolString]:
    out: Set[SymbolString] = {()}
    for item in items:
        if isinstance(item, Plus):
            once = _tilde_items(item.items)
            options = once | {x + y for x in once for y in once}
        else:
            options = {(item,)}
        out = {x + y for x in out for y in options}
    return out


def tilde(rhs: Sequence[RhsItem]) -> Set[SymbolString]:
    """
    Bounded expansions of a rhs: each group taken once or twice.

    A group's own expansions are combined by cross-product, so
    (Ba(bc)+)+ yields Babc, Babcbc and the four concatenations of those two.
    """
    return _tilde_items(tuple(rhs))


def prefix_set(g: Copg) -> Set[SymbolString]:
    """Prefixes ending with a terminal of every tilde string of every rule."""
    prefixes: Set[SymbolString] = set()
    for rule in g.rules:
        for t in tilde(rule.rhs):
            for i, sym in enumerate(t):
                if isinstance(sym, Term):
                    prefixes.add(t[:i + 1])
    return prefixes


def _group_occurrences(rhs: Sequence[RhsItem]) -> List[Tuple[SymbolString, SymbolString, SymbolString]]:
    """(η̄, ζ̄, θ̄) for every group occurrence γ = η (ζ)+ θ, at any nesting level."""
    found = []

    def walk(items: Sequence[RhsItem], before: SymbolString, after: SymbolString) -> None:
        for i, item in enumerate(items):
            if isinstance(item, Plus):
                pre = before + hat(items[:i])
                post = hat(items[i + 1:]) + after
                found.append((pre, hat(item.items), post))
                walk(item.items, pre, post)

    walk(tuple(rhs), (), ())
    return found


def _nesting(items: Sequence[RhsItem]) -> int:
    return max((1 + _nesting(i.items) for i in items if isinstance(i, Plus)), default=0)


# =============================================================================
# GRAMMAR TO AUTOMATON
# =============================================================================

@dataclass(frozen=True)
class ConvState:
    alpha: SymbolString = ()
    beta: SymbolString = ()

    @property
    def alpha_is_nonterminal(self) -> bool:
        return len(self.alpha) == 1 and isinstance(self.alpha[0], NonTerm)

    def to_json(self) -> List[str]:
        return [format_symbols(self.alpha), format_symbols(self.beta)]

    def __str__(self) -> str:
        return f"⟨{format_symbols(self.alpha) or 'ε'},{format_symbols(self.beta) or 'ε'}⟩"


@dataclass
class StateCountReport:
    states: int
    prefixes: int
    nonterminals: int
    max_rhs_length: int
    max_nesting: int

    @property
    def bound(self) -> int:
        """(1 + |ℙ| + |N|) · (1 + |ℙ|)"""
        return (1 + self.prefixes + self.nonterminals) * (1 + self.prefixes)

    @property
    def asymptotic(self) -> int:
        """m^(2h) for the longest rhs m and deepest group nesting h."""
        return self.max_rhs_length ** (2 * self.max_nesting)

    @property
    def within_bound(self) -> bool:
        return self.states <= self.bound


class _OpaBuilder:
    """Transition formulas of the grammar-to-automaton construction."""

    def __init__(self, g: Copg):
        self.g = g
        self.prefixes = prefix_set(g)
        self.all_tilde: Set[SymbolString] = set()
        for rule in g.rules:
            self.all_tilde |= tilde(rule.rhs)

        self.truncations: Dict[SymbolString, Set[SymbolString]] = defaultdict(set)
        for rule in g.rules:
            for pre, zeta, post in _group_occurrences(rule.rhs):
                doubled = pre + zeta + zeta
                completed = doubled + post
                if completed in self.all_tilde and rhs_matches(rule.rhs, completed):
                    self.truncations[doubled].add(pre + zeta)

        hats = {hat(r.rhs) for r in g.rules if r.rhs}
        self.reducible: Dict[SymbolString, List[Hashable]] = {}
        for h in hats:
            lhs = [r.lhs for r in g.rules if r.rhs and rhs_matches(r.rhs, h)]
            self.reducible[h] = list(dict.fromkeys(lhs))

    def push_target(self, s: ConvState, a: str) -> Optional[ConvState]:
        if s.alpha_is_nonterminal:
            t = ConvState(s.alpha + (Term(a),), s.beta)
        else:
            t = ConvState((Term(a),), s.alpha)
        return t if t.alpha in self.prefixes else None

    def shift_targets(self, s: ConvState, a: str) -> Set[ConvState]:
        if not s.alpha:
            return set()
        candidate = (s.beta + s.alpha if s.alpha_is_nonterminal else s.alpha) + (Term(a),)
        truncated = self.truncations.get(candidate)
        if truncated:
            return {ConvState(t, s.beta) for t in truncated}
        return {ConvState(candidate, s.beta)} if candidate in self.prefixes else set()

    def pop_lhs(self, s: ConvState) -> List[Hashable]:
        recognized = s.beta + s.alpha if s.alpha_is_nonterminal else s.alpha
        if not recognized:
            return []
        return self.reducible.get(recognized, [])

    @staticmethod
    def resumed(label: ConvState) -> SymbolString:
        return label.beta if label.alpha_is_nonterminal else label.alpha

    def build(self) -> Opa:
        opm = compute_opm(self.g).opm
        start = ConvState()
        states: Set[ConvState] = {start}
        queue = [start]
        push: Dict[Tuple[ConvState, str], Set[ConvState]] = defaultdict(set)
        shift: Dict[Tuple[ConvState, str], Set[ConvState]] = defaultdict(set)
        pop: Dict[Tuple[ConvState, ConvState], Set[ConvState]] = defaultdict(set)
        origins: List[ConvState] = []
        origin_set: Set[ConvState] = set()
        reducers: List[Tuple[ConvState, List[Hashable]]] = []

        def reach(t: ConvState) -> None:
            if t not in states:
                states.add(t)
                queue.append(t)

        def add_pops(src: ConvState, lhs: List[Hashable], label: ConvState) -> None:
            gamma = self.resumed(label)
            for A in lhs:
                t = ConvState((NonTerm(A),), gamma)
                pop[(src, label)].add(t)
                reach(t)

        while queue:
            s = queue.pop()
            for a in opm.alphabet:
                t = self.push_target(s, a)
                if t is not None:
                    if s not in origin_set:
                        origin_set.add(s)
                        origins.append(s)
                        for src, lhs in reducers:
                            add_pops(src, lhs, s)
                    push[(s, a)].add(t)
                    reach(t)
                for t in self.shift_targets(s, a):
                    shift[(s, a)].add(t)
                    reach(t)
            lhs = self.pop_lhs(s)
            if lhs:
                reducers.append((s, lhs))
                for label in list(origins):
                    add_pops(s, lhs, label)

        final = {ConvState((NonTerm(A),), ()) for A in self.g.axioms} & states
        if self.g.has_empty_rule:
            final.add(start)
        return Opa(opm, states, {start}, final, push, shift, pop)


def grammar_to_opa(g: Copg) -> Opa:
    """
    Automaton accepting L(g), with states generated lazily from ⟨ε,ε⟩.

    Raises:
        ConversionError: g fails validation or its matrix has conflicts.
    """
    violations = validate(g)
    if violations:
        raise ConversionError("grammar is not well formed: " + "; ".join(v.describe() for v in violations))
    report = compute_opm(g)
    if not report.is_copg:
        raise ConversionError("grammar matrix has conflicts: " + "; ".join(c.describe() for c in report.conflicts))
    a = _OpaBuilder(g).build()
    logger.info(f"Built automaton with {len(a.states)} states, {len(a.push)} push, "
                f"{len(a.shift)} shift and {len(a.pop)} pop entries")
    return a


def state_count_report(g: Copg, a: Optional[Opa] = None) -> StateCountReport:
    """State count of the constructed automaton next to its size bound."""
    a = a or grammar_to_opa(g)
    report = StateCountReport(
        states=len(a.states),
        prefixes=len(prefix_set(g)),
        nonterminals=len(g.nonterminals),
        max_rhs_length=max((len(hat(r.rhs)) for r in g.rules), default=0),
        max_nesting=max((_nesting(r.rhs) for r in g.rules), default=0),
    )
    if not report.within_bound:
        logger.warning(f"{report.states} states exceed the bound {report.bound}")
    return report


# =============================================================================
# AUTOMATON TO GRAMMAR
# =============================================================================

@dataclass(frozen=True)
class Quad:
    """Nonterminal standing for the chains in context (left, right) read from entry to exit."""
    left: str
    entry: State
    exit: State
    right: str

    def __str__(self) -> str:
        return f"⟨{self.left},{format_state(self.entry)},{format_state(self.exit)},{self.right}⟩"


@dataclass(frozen=True)
class SupportEdge:
    """Optional gap support from source to gap, then a shift of symbol into target."""
    source_symbol: str
    source: State
    gap: Optional[State]
    symbol: str
    target: State

    def items(self) -> Tuple[RhsItem, ...]:
        head: Tuple[RhsItem, ...] = ()
        if self.gap is not None:
            head = (NonTerm(Quad(self.source_symbol, self.source, self.gap, self.symbol)),)
        return head + (Term(self.symbol),)


@dataclass(frozen=True)
class Folded:
    items: Tuple[Hashable, ...]


@dataclass(frozen=True)
class EssentialSupport:
    left: str
    right: str
    start: State
    entry_gap: Optional[State]
    first: str
    first_target: State
    edges: Tuple[SupportEdge, ...]
    exit_gap: Optional[State]
    end: State

    @property
    def origin(self) -> State:
        return self.start if self.entry_gap is None else self.entry_gap

    @property
    def spine(self) -> Tuple[str, ...]:
        return (self.first,) + tuple(e.symbol for e in self.edges)

    @property
    def is_simple(self) -> bool:
        return (self.entry_gap is None and self.exit_gap is None
                and all(e.gap is None for e in self.edges))

    @property
    def lhs(self) -> Quad:
        return Quad(self.left, self.start, self.end, self.right)

    def rhs(self) -> Tuple[RhsItem, ...]:
        """The rule body, with doubled cycles folded into groups."""
        items: List[RhsItem] = []
        if self.entry_gap is not None:
            items.append(NonTerm(Quad(self.left, self.start, self.entry_gap, self.first)))
        items.append(Term(self.first))
        items.extend(_render(fold_repeats(self.edges)))
        if self.exit_gap is not None:
            last_symbol = self.edges[-1].symbol if self.edges else self.first
            last_state = self.edges[-1].target if self.edges else self.first_target
            items.append(NonTerm(Quad(last_symbol, last_state, self.exit_gap, self.right)))
        return tuple(items)


def fold_repeats(items: Sequence[Hashable]) -> List[Hashable]:
    """
    Replace adjacent duplicate runs xx by Folded(x) until none remain.

    The shortest period is folded first, then the leftmost occurrence, so
    inner cycles become groups before the cycles that contain them.
    """
    seq = list(items)
    while True:
        found = None
        for period in range(1, len(seq) // 2 + 1):
            for i in range(len(seq) - 2 * period + 1):
                if seq[i:i + period] == seq[i + period:i + 2 * period]:
                    found = (i, period)
                    break
            if found:
                break
        if found is None:
            return seq
        i, period = found
        seq[i:i + 2 * period] = [Folded(tuple(seq[i:i + period]))]


def _render(folded: Sequence[Hashable]) -> List[RhsItem]:
    out: List[RhsItem] = []
    for unit in folded:
        if isinstance(unit, Folded):
            out.append(Plus(tuple(_render(unit.items))))
        else:
            out.extend(unit.items())
    return out


QuadKey = Tuple[str, State, str]


class _SupportGraph:
    """Precedence-filtered neighbourhoods shared by quad realization and support walks."""

    def __init__(self, a: Opa):
        self.a = a
        m = a.opm
        self.symbols = m.symbols
        self.states = sorted(a.states, key=format_state)
        self.yields = {x: [b for b in m.alphabet if m.lookup(x, b) is PrecRel.YIELDS] for x in self.symbols}
        self.equals = {x: [b for b in m.alphabet if m.lookup(x, b) is PrecRel.EQUALS] for x in self.symbols}
        self.takes = {x: [c for c in self.symbols if m.lookup(x, c) is PrecRel.TAKES] for x in self.symbols}

    def context_ok(self, left: str, right: str) -> bool:
        return (left == DELIMITER and right == DELIMITER) or bool(self.a.opm.relations(left, right))

    @staticmethod
    def targets(table, key) -> List[State]:
        return sorted(table.get(key, ()), key=format_state)


def realizable_quads(a: Opa) -> Dict[QuadKey, FrozenSet[State]]:
    """
    For (left, entry, right): exit states of supports of some chain in that context.

    Least fixpoint: gaps inside a spine walk may use any quad found so far.
    """
    graph = _SupportGraph(a)
    found: Dict[QuadKey, Set[State]] = defaultdict(set)
    rounds = 0
    changed = True
    while changed:
        changed = False
        rounds += 1
        for a0 in graph.symbols:
            for q0 in graph.states:
                for a1 in graph.yields[a0]:
                    for origin in {q0} | found.get((a0, q0, a1), set()):
                        start = [(a1, q) for q in a.push.get((origin, a1), ())]
                        seen = set(start)
                        todo = list(start)
                        while todo:
                            x, q = todo.pop()
                            for b in graph.equals[x]:
                                for qq in {q} | found.get((x, q, b), set()):
                                    for t in a.shift.get((qq, b), ()):
                                        if (b, t) not in seen:
                                            seen.add((b, t))
                                            todo.append((b, t))
                            for c in graph.takes[x]:
                                if not graph.context_ok(a0, c):
                                    continue
                                for qq in {q} | found.get((x, q, c), set()):
                                    for p in a.pop.get((qq, origin), ()):
                                        if p not in found[(a0, q0, c)]:
                                            found[(a0, q0, c)].add(p)
                                            changed = True
    logger.debug(f"Realizable quads settled after {rounds} rounds")
    return {key: frozenset(v) for key, v in found.items() if v}


def essential_supports(a: Opa) -> Iterator[EssentialSupport]:
    """
    Supports whose spine walks repeat any closed segment at most twice.

    A closed segment is the run of edges since the previous visit of the same
    (terminal, state) node. Walks longer than MAX_SUPPORT_EDGES are cut with a
    warning.
    """
    graph = _SupportGraph(a)
    quads = realizable_quads(a)
    cap = settings.MAX_SUPPORT_EDGES
    warned = [False]

    def gaps(key: QuadKey) -> List[Optional[State]]:
        return [None] + sorted(quads.get(key, ()), key=format_state)

    def walk(a0: str, q0: State, entry: Optional[State], origin: State, a1: str, q1: State,
             nodes: List[Tuple[str, State]], edges: List[SupportEdge],
             segments: Counter) -> Iterator[EssentialSupport]:
        x, q = nodes[-1]
        for c in graph.takes[x]:
            if not graph.context_ok(a0, c):
                continue
            for gap in gaps((x, q, c)):
                for end in graph.targets(a.pop, (q if gap is None else gap, origin)):
                    yield EssentialSupport(a0, c, q0, entry, a1, q1, tuple(edges), gap, end)
        if len(edges) >= cap:
            if not warned[0]:
                logger.warning(f"Support walk cut at {cap} edges; raise COPG_MAX_SUPPORT_EDGES if rules are missing")
                warned[0] = True
            return
        for b in graph.equals[x]:
            for gap in gaps((x, q, b)):
                for t in graph.targets(a.shift, (q if gap is None else gap, b)):
                    edge = SupportEdge(x, q, gap, b, t)
                    node = (b, t)
                    segment = None
                    if node in nodes:
                        j = len(nodes) - 1 - nodes[::-1].index(node)
                        segment = tuple(edges[j:]) + (edge,)
                        if segments[segment] >= 2:
                            continue
                        segments[segment] += 1
                    nodes.append(node)
                    edges.append(edge)
                    yield from walk(a0, q0, entry, origin, a1, q1, nodes, edges, segments)
                    nodes.pop()
                    edges.pop()
                    if segment is not None:
                        segments[segment] -= 1

    for a0 in graph.symbols:
        for q0 in graph.states:
            for a1 in graph.yields[a0]:
                for entry in gaps((a0, q0, a1)):
                    origin = q0 if entry is None else entry
                    for q1 in graph.targets(a.push, (origin, a1)):
                        yield from walk(a0, q0, entry, origin, a1, q1, [(a1, q1)], [], Counter())


def _trim(rules: Set[Rule], axioms: List[Hashable]) -> Set[Rule]:
    productive: Set[Hashable] = set()
    changed = True
    while changed:
        changed = False
        for r in rules:
            if r.lhs in productive:
                continue
            if all(s.name in productive for s in hat(r.rhs) if isinstance(s, NonTerm)):
                productive.add(r.lhs)
                changed = True
    rules = {r for r in rules if r.lhs in productive
             and all(s.name in productive for s in hat(r.rhs) if isinstance(s, NonTerm))}
    reachable = set(a for a in axioms if a in productive)
    todo = list(reachable)
    while todo:
        lhs = todo.pop()
        for r in rules:
            if r.lhs == lhs:
                for s in hat(r.rhs):
                    if isinstance(s, NonTerm) and s.name not in reachable:
                        reachable.add(s.name)
                        todo.append(s.name)
    return {r for r in rules if r.lhs in reachable}


EMPTY_AXIOM = "S0"


def opa_to_grammar(a: Opa) -> Copg:
    """Grammar over 4-tuple nonterminals with one rule per essential support."""
    rules: Set[Rule] = set()
    count = 0
    for support in essential_supports(a):
        count += 1
        rules.add(Rule(support.lhs, support.rhs()))
    heads = {r.lhs for r in rules}
    axioms: List[Hashable] = [
        Quad(DELIMITER, qi, qf, DELIMITER)
        for qi in sorted(a.initial, key=format_state)
        for qf in sorted(a.final, key=format_state)
        if Quad(DELIMITER, qi, qf, DELIMITER) in heads
    ]
    if a.accepts(()).accepted:
        axioms.append(EMPTY_AXIOM)
        rules.add(Rule(EMPTY_AXIOM, ()))
    kept = _trim(rules, axioms)
    ordered = sorted(kept, key=lambda r: (str(r.lhs), str(r)))
    if not axioms:
        logger.warning("Automaton accepts no word; the grammar has no axioms")
    logger.info(f"Built grammar from {count} essential supports: {len(ordered)} rules after trimming")
    return Copg.build(ordered, [ax for ax in axioms if any(r.lhs == ax for r in kept)], terminals=a.alphabet)
