"""
copg-toolkit - Cyclic Operator Grammars
=======================================
Grammar model with `+`-repetition groups in right-hand sides, validation,
left/right terminal sets, OPM extraction, rhs-language membership,
backward-determinism checking and a bounded brute-force language oracle.

Usage:
    from grammar import load_grammar, compute_opm, enumerate_language

    g = load_grammar("samples/gae.copg")
    report = compute_opm(g)
    report.is_copg            # True
    enumerate_language(g, 3)  # {"n", "n+n", "n×n"}

Grammar file format (UTF-8, `//` line comments):
    axioms E ;
    E -> E + T | T × F | n ;
    {P, T} -> ⦇ {P, T} ⦈ ;     // lhs and rhs sets expand to one rule per choice
    S0 -> ;                     // the empty alternative is the ε-rule

Nonterminals start with an uppercase letter; any other token, or a
'single-quoted' string, is a terminal. Groups are written `( items )+`.
"""

import logging
import re
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Any, Dict, FrozenSet, Hashable, Iterable, List, Optional, Sequence, Set, Tuple, Union

from pyformlang.finite_automaton import NondeterministicFiniteAutomaton, State
from pyformlang.finite_automaton import Symbol as FaSymbol

import settings
from opm_core import DELIMITER, Conflict, Opm, PrecRel, join_terminals

logger = logging.getLogger(__name__)


# =============================================================================
# MODEL
# =============================================================================

@dataclass(frozen=True)
class Term:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class NonTerm:
    name: Hashable

    def __str__(self) -> str:
        return str(self.name)


@dataclass(frozen=True)
class Plus:
    """A `( items )+` repetition group."""
    items: Tuple["RhsItem", ...]

    def __str__(self) -> str:
        return "(" + " ".join(str(i) for i in self.items) + ")+"


RhsItem = Union[Term, NonTerm, Plus]
Symbol = Union[Term, NonTerm]


@dataclass(frozen=True)
class Rule:
    lhs: Hashable
    rhs: Tuple[RhsItem, ...]
    line: Optional[int] = field(default=None, compare=False)

    def __str__(self) -> str:
        body = " ".join(str(i) for i in self.rhs) if self.rhs else "ε"
        return f"{self.lhs} -> {body}"


@dataclass(frozen=True)
class Copg:
    """
    Cyclic operator grammar.

    Tuples keep declaration order, which labeled parsing uses as its
    tie-break; set views are available through the *_set properties.
    """
    terminals: Tuple[str, ...]
    nonterminals: Tuple[Hashable, ...]
    rules: Tuple[Rule, ...]
    axioms: Tuple[Hashable, ...]

    @classmethod
    def build(cls, rules: Iterable[Rule], axioms: Iterable[Hashable],
              terminals: Optional[Iterable[str]] = None,
              nonterminals: Optional[Iterable[Hashable]] = None) -> "Copg":
        rules = tuple(rules)
        axioms = tuple(dict.fromkeys(axioms))
        if terminals is None:
            terminals = [s.name for r in rules for s in hat(r.rhs) if isinstance(s, Term)]
        if nonterminals is None:
            nonterminals = list(axioms) + [r.lhs for r in rules] + [
                s.name for r in rules for s in hat(r.rhs) if isinstance(s, NonTerm)
            ]
        return cls(
            terminals=tuple(dict.fromkeys(terminals)),
            nonterminals=tuple(dict.fromkeys(nonterminals)),
            rules=rules,
            axioms=axioms,
        )

    @property
    def terminal_set(self) -> FrozenSet[str]:
        return frozenset(self.terminals)

    @property
    def nonterminal_set(self) -> FrozenSet[Hashable]:
        return frozenset(self.nonterminals)

    def rules_for(self, lhs: Hashable) -> List[Rule]:
        return [r for r in self.rules if r.lhs == lhs]

    @property
    def has_empty_rule(self) -> bool:
        return any(not r.rhs and r.lhs in self.axioms for r in self.rules)


@dataclass(frozen=True)
class Violation:
    rule: Optional[Rule]
    position: Optional[int]
    message: str

    def describe(self) -> str:
        where = ""
        if self.rule is not None:
            where = f"rule {self.rule}"
            if self.rule.line is not None:
                where = f"line {self.rule.line}: {where}"
            if self.position is not None:
                where += f", position {self.position}"
            where += ": "
        return where + self.message


@dataclass
class TerminalSets:
    left: Dict[Hashable, Set[str]]
    right: Dict[Hashable, Set[str]]


@dataclass
class OpmReport:
    """Extracted matrix (cells possibly multi-valued) with per-cell conflicts."""
    opm: Opm
    conflicts: List[Conflict]

    @property
    def is_copg(self) -> bool:
        return not self.conflicts


@dataclass
class BdReport:
    is_bd: bool
    collisions: List[Tuple[Rule, Rule]]


class GrammarError(ValueError):
    """Grammar unusable for the requested operation."""


class GrammarSyntaxError(GrammarError):
    def __init__(self, message: str, source: str = "<string>", line: Optional[int] = None):
        where = source if line is None else f"{source}:{line}"
        super().__init__(f"{where}: {message}")
        self.source = source
        self.line = line


# =============================================================================
# RHS EXPRESSIONS
# =============================================================================

def hat(rhs: Sequence[RhsItem]) -> Tuple[Symbol, ...]:
    """The rhs with group markers erased."""
    out: List[Symbol] = []
    for item in rhs:
        if isinstance(item, Plus):
            out.extend(hat(item.items))
        else:
            out.append(item)
    return tuple(out)


def double_expand(rhs: Sequence[RhsItem]) -> Tuple[Symbol, ...]:
    """Every group replaced by two copies of its own double expansion."""
    out: List[Symbol] = []
    for item in rhs:
        if isinstance(item, Plus):
            body = double_expand(item.items)
            out.extend(body + body)
        else:
            out.append(item)
    return tuple(out)


def parse_symbols(text: str) -> Tuple[Symbol, ...]:
    """
    Read a plain string over terminals and nonterminals, e.g. "T+T" or "F × F".

    Uppercase-initial tokens are nonterminals. Tokens are split on whitespace
    when present, otherwise per character.
    """
    tokens = text.split() if any(ch.isspace() for ch in text.strip()) else list(text)
    return tuple(NonTerm(t) if t[:1].isupper() else Term(t) for t in tokens)


def format_symbols(symbols: Iterable[Symbol]) -> str:
    names = [str(s) for s in symbols]
    if all(len(n) == 1 for n in names):
        return "".join(names)
    return " ".join(names)


@dataclass(frozen=True)
class RhsAutomaton:
    """
    Position automaton of a `+`-O-expression.

    Position i reads symbols[i]; runs start at position 0 and accept at the
    last position. Groups add a back edge from their last to their first
    position. The empty rhs accepts only the empty handle.
    """
    symbols: Tuple[Symbol, ...]
    follow: Tuple[FrozenSet[int], ...]

    def matches(self, handle: Sequence[Symbol]) -> bool:
        return self.nfa.accepts([_fa_symbol(s) for s in handle])

    def find_path(self, options: Sequence[Any]) -> Optional[List[int]]:
        """
        Accepting position sequence where position k's symbol is admitted by options[k].

        options[k] is a container of admissible symbols. Ties go to the lowest
        positions, so the result is deterministic.
        """
        n = len(options)
        if not self.symbols or n == 0:
            return [] if not self.symbols and n == 0 else None
        layers: List[Dict[int, Optional[int]]] = []
        prev: Dict[int, Optional[int]] = {}
        for k in range(n):
            layer: Dict[int, Optional[int]] = {}
            sources = [(None, [0])] if k == 0 else [(p, sorted(self.follow[p])) for p in sorted(prev)]
            for src, targets in sources:
                for q in targets:
                    if q not in layer and self.symbols[q] in options[k]:
                        layer[q] = src
            if not layer:
                return None
            layers.append(layer)
            prev = layer
        last = len(self.symbols) - 1
        if last not in prev:
            return None
        path = [last]
        for k in range(n - 1, 0, -1):
            path.append(layers[k][path[-1]])
        path.reverse()
        return path

    @cached_property
    def nfa(self) -> NondeterministicFiniteAutomaton:
        return self.to_nfa()

    def to_nfa(self) -> NondeterministicFiniteAutomaton:
        nfa = NondeterministicFiniteAutomaton()
        start = State("start")
        nfa.add_start_state(start)
        if not self.symbols:
            nfa.add_final_state(start)
            return nfa
        nfa.add_transition(start, _fa_symbol(self.symbols[0]), State(0))
        for p, succ in enumerate(self.follow):
            for q in succ:
                nfa.add_transition(State(p), _fa_symbol(self.symbols[q]), State(q))
        nfa.add_final_state(State(len(self.symbols) - 1))
        return nfa


def _fa_symbol(sym: Symbol) -> FaSymbol:
    # terminals and nonterminals may share a spelling
    return FaSymbol(("t", sym.name) if isinstance(sym, Term) else ("N", sym.name))


@lru_cache(maxsize=4096)
def compile_rhs(rhs: Tuple[RhsItem, ...]) -> RhsAutomaton:
    symbols: List[Symbol] = []
    back_edges: List[Tuple[int, int]] = []

    def walk(items: Sequence[RhsItem]) -> None:
        for item in items:
            if isinstance(item, Plus):
                start = len(symbols)
                walk(item.items)
                if len(symbols) > start:
                    back_edges.append((len(symbols) - 1, start))
            else:
                symbols.append(item)

    walk(rhs)
    follow = [set() for _ in symbols]
    for i in range(len(symbols) - 1):
        follow[i].add(i + 1)
    for last, first in back_edges:
        follow[last].add(first)
    return RhsAutomaton(tuple(symbols), tuple(frozenset(f) for f in follow))


def rhs_matches(rhs: Sequence[RhsItem], handle: Sequence[Symbol]) -> bool:
    return compile_rhs(tuple(rhs)).matches(tuple(handle))


# =============================================================================
# VALIDATION AND TERMINAL SETS
# =============================================================================

def _group_violations(rule: Rule, items: Sequence[RhsItem]) -> List[Violation]:
    found = []
    for item in items:
        if isinstance(item, Plus):
            flat = hat(item.items)
            if not flat:
                found.append(Violation(rule, None, "empty Plus group"))
            elif not isinstance(flat[-1], Term):
                found.append(Violation(rule, None, "Plus group not terminal-terminated"))
            found.extend(_group_violations(rule, item.items))
    return found


def validate(g: Copg) -> List[Violation]:
    """Every way g falls short of a well-formed cyclic operator grammar."""
    violations: List[Violation] = []
    terminals, nonterminals = g.terminal_set, g.nonterminal_set

    if not g.axioms:
        violations.append(Violation(None, None, "grammar has no axioms"))
    for ax in g.axioms:
        if ax not in nonterminals:
            violations.append(Violation(None, None, f"axiom {ax} is not a nonterminal"))
    if DELIMITER in terminals:
        violations.append(Violation(None, None, "the delimiter # cannot be a terminal"))
    for name in sorted(str(s) for s in terminals & nonterminals):
        violations.append(Violation(None, None, f"{name} is both a terminal and a nonterminal"))

    empty_rules = [r for r in g.rules if not r.rhs]
    if len(empty_rules) > 1:
        violations.append(Violation(empty_rules[1], None, "more than one ε-rule"))

    for rule in g.rules:
        if rule.lhs not in nonterminals:
            violations.append(Violation(rule, None, f"lhs {rule.lhs} is not a nonterminal"))
        flat = hat(rule.rhs)
        for sym in flat:
            if isinstance(sym, Term) and sym.name not in terminals:
                violations.append(Violation(rule, None, f"undeclared terminal {sym}"))
            if isinstance(sym, NonTerm) and sym.name not in nonterminals:
                violations.append(Violation(rule, None, f"undeclared nonterminal {sym}"))

        if not rule.rhs:
            if rule.lhs not in g.axioms:
                violations.append(Violation(rule, None, "ε-rule lhs must be an axiom"))
            used_elsewhere = any(
                other is not rule and (other.lhs == rule.lhs or NonTerm(rule.lhs) in hat(other.rhs))
                for other in g.rules
            )
            if used_elsewhere:
                violations.append(Violation(rule, None, "ε-rule lhs must appear in no other rule"))
            continue

        violations.extend(_group_violations(rule, rule.rhs))
        for i in range(len(flat) - 1):
            if isinstance(flat[i], NonTerm) and isinstance(flat[i + 1], NonTerm):
                violations.append(Violation(rule, i, f"adjacent nonterminals in rule {rule.lhs}"))
        if len(flat) == 1 and isinstance(flat[0], NonTerm):
            violations.append(Violation(rule, 0, "renaming rule"))
    return violations


def terminal_sets(g: Copg) -> TerminalSets:
    """Least fixpoint of the left and right terminal sets over flattened rhs."""
    left: Dict[Hashable, Set[str]] = {A: set() for A in g.nonterminals}
    right: Dict[Hashable, Set[str]] = {A: set() for A in g.nonterminals}
    flats = [(r.lhs, hat(r.rhs)) for r in g.rules if r.rhs]
    changed = True
    while changed:
        changed = False
        for lhs, flat in flats:
            for sets, seq in ((left, flat), (right, flat[::-1])):
                before = len(sets[lhs])
                head = seq[0]
                if isinstance(head, Term):
                    sets[lhs].add(head.name)
                else:
                    sets[lhs] |= sets[head.name]
                    if len(seq) > 1 and isinstance(seq[1], Term):
                        sets[lhs].add(seq[1].name)
                changed |= len(sets[lhs]) != before
    return TerminalSets(left, right)


def compute_opm(g: Copg) -> OpmReport:
    """Precedence matrix of g, read from the double expansion of every rhs."""
    sets = terminal_sets(g)
    found: Dict[Tuple[str, str], Dict[PrecRel, List[str]]] = {}

    def add(a: str, b: str, rel: PrecRel, source: str) -> None:
        found.setdefault((a, b), {}).setdefault(rel, [])
        if source not in found[(a, b)][rel]:
            found[(a, b)][rel].append(source)

    for rule in g.rules:
        de = double_expand(rule.rhs)
        src = str(rule)
        for i, x in enumerate(de):
            nxt = de[i + 1] if i + 1 < len(de) else None
            if isinstance(x, Term):
                if isinstance(nxt, Term):
                    add(x.name, nxt.name, PrecRel.EQUALS, src)
                elif isinstance(nxt, NonTerm):
                    if i + 2 < len(de) and isinstance(de[i + 2], Term):
                        add(x.name, de[i + 2].name, PrecRel.EQUALS, src)
                    for b in sets.left[nxt.name]:
                        add(x.name, b, PrecRel.YIELDS, src)
            elif isinstance(nxt, Term):
                for a in sets.right[x.name]:
                    add(a, nxt.name, PrecRel.TAKES, src)

    for ax in g.axioms:
        for b in sets.left.get(ax, ()):
            add(DELIMITER, b, PrecRel.YIELDS, f"axiom {ax}")
        for a in sets.right.get(ax, ()):
            add(a, DELIMITER, PrecRel.TAKES, f"axiom {ax}")

    opm = Opm(g.terminals, {pair: set(rels) for pair, rels in found.items()})
    conflicts = [
        Conflict(a, b, rels, tuple(s for rel in sorted(found[(a, b)], key=lambda r: r.value)
                                   for s in found[(a, b)][rel]))
        for (a, b), rels in opm.cells() if len(rels) > 1
    ]
    if conflicts:
        logger.warning(f"Matrix extraction found {len(conflicts)} conflicting cell(s)")
    return OpmReport(opm, conflicts)


def is_bd(g: Copg) -> BdReport:
    """Backward determinism: no two rules with distinct lhs share a rhs string."""
    collisions = []
    rules = list(g.rules)
    for i, r1 in enumerate(rules):
        a1 = compile_rhs(r1.rhs)
        for r2 in rules[i + 1:]:
            if r1.lhs == r2.lhs:
                continue
            a2 = compile_rhs(r2.rhs)
            if not a1.symbols or not a2.symbols:
                if not a1.symbols and not a2.symbols:
                    collisions.append((r1, r2))
                continue
            # every member starts and ends with the first and last position symbols
            if a1.symbols[0] != a2.symbols[0] or a1.symbols[-1] != a2.symbols[-1]:
                continue
            if a1.symbols == a2.symbols and a1.follow == a2.follow:
                collisions.append((r1, r2))
                continue
            if not a1.nfa.get_intersection(a2.nfa).is_empty():
                collisions.append((r1, r2))
    return BdReport(not collisions, collisions)


# =============================================================================
# BOUNDED LANGUAGE ORACLE
# =============================================================================

def _expand_item(item: RhsItem, budget: int) -> Set[Tuple[Symbol, ...]]:
    if not isinstance(item, Plus):
        return {(item,)} if budget >= 1 else set()
    bodies = _expand_seq(item.items, budget)
    result = set(bodies)
    level = set(bodies)
    while level:
        level = {x + b for x in level for b in bodies if len(x) + len(b) <= budget} - result
        result |= level
    return result


def _expand_seq(items: Sequence[RhsItem], budget: int) -> Set[Tuple[Symbol, ...]]:
    if not items:
        return {()}
    rest = items[1:]
    reserve = len(hat(rest))
    out = set()
    for head in _expand_item(items[0], budget - reserve):
        for tail in _expand_seq(rest, budget - len(head)):
            out.add(head + tail)
    return out


def _bounded_languages(g: Copg, maxlen: int) -> Dict[Hashable, Set[Tuple[str, ...]]]:
    """Terminal strings of length <= maxlen derivable from each nonterminal."""
    plain = [(r.lhs, exp) for r in g.rules if r.rhs for exp in _expand_seq(r.rhs, maxlen)]
    lang: Dict[Hashable, Set[Tuple[str, ...]]] = {A: set() for A in g.nonterminals}
    changed = True
    while changed:
        changed = False
        for lhs, exp in plain:
            partial: List[Tuple[str, ...]] = [()]
            for idx, sym in enumerate(exp):
                reserve = len(exp) - idx - 1
                nxt = []
                for prefix in partial:
                    if isinstance(sym, Term):
                        if len(prefix) + 1 + reserve <= maxlen:
                            nxt.append(prefix + (sym.name,))
                    else:
                        for w in lang.get(sym.name, ()):
                            if len(prefix) + len(w) + reserve <= maxlen:
                                nxt.append(prefix + w)
                partial = nxt
                if not partial:
                    break
            for w in partial:
                if w not in lang[lhs]:
                    lang[lhs].add(w)
                    changed = True
    return lang


def _check_maxlen(maxlen: int) -> None:
    if maxlen < 0:
        raise GrammarError("maxlen must be non-negative")
    if maxlen > settings.ENUM_MAXLEN_WARN:
        logger.warning(f"Enumerating up to length {maxlen}; this grows exponentially")


def enumerate_words(g: Copg, maxlen: int) -> Set[Tuple[str, ...]]:
    """Members of L(g) with at most maxlen terminals, as terminal tuples."""
    _check_maxlen(maxlen)
    lang = _bounded_languages(g, maxlen)
    words = set()
    for ax in g.axioms:
        words |= lang.get(ax, set())
    if g.has_empty_rule:
        words.add(())
    return words


def enumerate_language(g: Copg, maxlen: int) -> Set[str]:
    return {join_terminals(w) for w in enumerate_words(g, maxlen)}


def enumerate_nonterminal(g: Copg, lhs: Hashable, maxlen: int) -> Set[str]:
    _check_maxlen(maxlen)
    return {join_terminals(w) for w in _bounded_languages(g, maxlen).get(lhs, set())}


def restrict_grammar(g: Copg, terminals: Iterable[str]) -> Copg:
    """Drop every rule that mentions a terminal outside the given set."""
    keep = set(terminals)
    rules = [
        r for r in g.rules
        if all(s.name in keep for s in hat(r.rhs) if isinstance(s, Term))
    ]
    return Copg.build(rules, g.axioms)


# =============================================================================
# TEXT FORMAT
# =============================================================================

_TOKEN = re.compile(r"""
      (?P<comment>//[^\n]*)
    | (?P<space>[ \t\r\f\v]+)
    | (?P<newline>\n)
    | (?P<quoted>'(?:[^'\\\n]|\\.)*')
    | (?P<arrow>->)
    | (?P<close>\)\+)
    | (?P<punct>[()|;{},])
    | (?P<word>[^\s()|;{},']+)
""", re.VERBOSE)

_EMPTY_MARK = "ε"


@dataclass
class _Tok:
    kind: str
    text: str
    line: int


def _tokenize(text: str, source: str) -> List[_Tok]:
    tokens, line, pos = [], 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise GrammarSyntaxError(f"unexpected character {text[pos]!r}", source, line)
        kind = m.lastgroup
        if kind == "newline":
            line += 1
        elif kind == "quoted":
            body = re.sub(r"\\(.)", r"\1", m.group()[1:-1])
            if not body:
                raise GrammarSyntaxError("empty quoted terminal", source, line)
            tokens.append(_Tok("quoted", body, line))
        elif kind in ("arrow", "close", "punct", "word"):
            tokens.append(_Tok(kind, m.group(), line))
        pos = m.end()
    return tokens


class _GrammarReader:
    def __init__(self, text: str, source: str):
        self.source = source
        self.tokens = _tokenize(text, source)
        self.pos = 0

    def peek(self) -> Optional[_Tok]:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self) -> _Tok:
        tok = self.peek()
        if tok is None:
            last = self.tokens[-1].line if self.tokens else None
            raise GrammarSyntaxError("unexpected end of input", self.source, last)
        self.pos += 1
        return tok

    def expect(self, text: str) -> _Tok:
        tok = self.take()
        if tok.text != text or tok.kind == "quoted":
            raise GrammarSyntaxError(f"expected {text!r}, found {tok.text!r}", self.source, tok.line)
        return tok

    def fail(self, message: str, tok: Optional[_Tok]) -> GrammarSyntaxError:
        return GrammarSyntaxError(message, self.source, tok.line if tok else None)

    def name_set(self) -> List[str]:
        self.expect("{")
        names = []
        while True:
            tok = self.take()
            if tok.kind != "word" or not tok.text[0].isupper():
                raise self.fail(f"expected a nonterminal in set, found {tok.text!r}", tok)
            names.append(tok.text)
            sep = self.take()
            if sep.text == "}":
                return names
            if sep.text != ",":
                raise self.fail(f"expected ',' or '}}', found {sep.text!r}", sep)

    def read(self) -> Copg:
        rules: List[Rule] = []
        axioms: List[str] = []
        while self.peek() is not None:
            tok = self.peek()
            if tok.kind == "word" and tok.text == "axioms":
                self.take()
                while self.peek() is not None and self.peek().text != ";":
                    name = self.take()
                    if name.kind != "word" or not name.text[0].isupper():
                        raise self.fail(f"axiom {name.text!r} must be a nonterminal", name)
                    axioms.append(name.text)
                self.expect(";")
                continue
            if tok.text == "{":
                lhs = self.name_set()
            elif tok.kind == "word" and tok.text[0].isupper():
                lhs = [self.take().text]
            else:
                raise self.fail(f"expected a rule or 'axioms', found {tok.text!r}", tok)
            self.expect("->")
            for alt in self.alternatives():
                rules.extend(Rule(name, alt, tok.line) for name in lhs)
            self.expect(";")
        if not axioms:
            raise GrammarSyntaxError("missing 'axioms ... ;' declaration", self.source)
        return Copg.build(rules, axioms)

    def alternatives(self) -> List[Tuple[RhsItem, ...]]:
        alts = self.sequence(stop=(";", "|"))
        while self.peek() is not None and self.peek().text == "|":
            self.take()
            alts += self.sequence(stop=(";", "|"))
        return alts

    def sequence(self, stop: Tuple[str, ...]) -> List[Tuple[RhsItem, ...]]:
        tok = self.peek()
        if tok is not None and tok.kind == "word" and tok.text == _EMPTY_MARK:
            self.take()
            return [()]
        choices: List[Tuple[RhsItem, ...]] = [()]
        while True:
            tok = self.peek()
            if tok is None:
                raise self.fail("unterminated rule", self.tokens[-1])
            if tok.kind != "quoted" and tok.text in stop:
                break
            options = self.item()
            choices = [c + o for c in choices for o in options]
        return choices

    def item(self) -> List[Tuple[RhsItem, ...]]:
        tok = self.peek()
        if tok.kind == "quoted":
            self.take()
            return [(Term(tok.text),)]
        if tok.text == "(":
            self.take()
            bodies = self.sequence(stop=(")+", ")"))
            close = self.take()
            if close.text != ")+":
                raise self.fail("a group must be closed with ')+'", close)
            if any(not b for b in bodies):
                raise self.fail("empty group", close)
            return [(Plus(b),) for b in bodies]
        if tok.text == "{":
            return [(NonTerm(n),) for n in self.name_set()]
        if tok.kind == "word":
            self.take()
            return [(NonTerm(tok.text) if tok.text[0].isupper() else Term(tok.text),)]
        raise self.fail(f"unexpected {tok.text!r}", tok)


def parse_grammar_text(text: str, source: str = "<string>") -> Copg:
    """Read the grammar text format. Well-formedness is checked separately by validate()."""
    g = _GrammarReader(text, source).read()
    logger.info(f"Loaded grammar {source}: {len(g.rules)} rules, {len(g.nonterminals)} nonterminals")
    for v in validate(g):
        logger.warning(f"{source}: {v.describe()}")
    return g


def load_grammar(path: str) -> Copg:
    try:
        with open(path, encoding="utf-8") as f:
            text = f.read()
    except UnicodeDecodeError as e:
        raise GrammarSyntaxError(f"not UTF-8: {e}", path)
    return parse_grammar_text(text, source=path)


_PLAIN_NONTERMINAL = re.compile(r"^[A-Z][A-Za-z0-9_]*$")


def _quote_terminal(name: str) -> str:
    if (name[:1].isupper() or name in ("axioms", _EMPTY_MARK) or name.startswith("//")
            or name.startswith("->") or re.search(r"[\s()|;{},'\\]", name)):
        return "'" + name.replace("\\", "\\\\").replace("'", "\\'") + "'"
    return name


def format_grammar(g: Copg) -> str:
    """Grammar text that parse_grammar_text reads back to an equal grammar."""
    names: Dict[Hashable, str] = {}
    legend: List[str] = []
    for A in g.nonterminals:
        if isinstance(A, str) and _PLAIN_NONTERMINAL.match(A):
            names[A] = A
    for A in g.nonterminals:
        if A not in names:
            fresh = f"Q{len(legend)}"
            while fresh in names.values():
                fresh += "_"
            names[A] = fresh
            legend.append(f"// {fresh} = {A}")

    def fmt(items: Sequence[RhsItem]) -> str:
        parts = []
        for item in items:
            if isinstance(item, Plus):
                parts.append("( " + fmt(item.items) + " )+")
            elif isinstance(item, NonTerm):
                parts.append(names[item.name])
            else:
                parts.append(_quote_terminal(item.name))
        return " ".join(parts)

    lines = legend[:]
    lines.append("axioms " + " ".join(names[A] for A in g.axioms) + " ;")
    order = list(dict.fromkeys(r.lhs for r in g.rules))
    for lhs in order:
        alts = [fmt(r.rhs) if r.rhs else "" for r in g.rules if r.lhs == lhs]
        lines.append(f"{names[lhs]} -> " + " | ".join(alts) + " ;")
    return "\n".join(lines) + "\n"
