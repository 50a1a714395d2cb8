"""
copg-toolkit - Operator Precedence Automata
===========================================
Automaton model whose move kind (push, shift or pop) is dictated by the
precedence matrix, nondeterministic acceptance with witness traces, and
support checking for chains.

Usage:
    from opa import load_opa

    a = load_opa("samples/fig3.opa.json")
    result = a.accepts("n+n×⦇n+n⦈", trace=True)
    result.accepted                 # True
    print(format_trace(result.trace))

OPA JSON:
    {"opm": {...}, "states": [...], "initial": [...], "final": [...],
     "push":  [{"from": "q0", "sym": "n", "to": ["q1"]}],
     "shift": [{"from": "q3", "sym": "⦈", "to": ["q3"]}],
     "pop":   [{"from": "q3", "label": "q2", "to": ["q3"]}]}
States are strings; states built by conversions serialize as [alpha, beta].
"""

import json
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Dict, FrozenSet, Hashable, Iterable, List, Mapping, Optional, Sequence, Set, Tuple, Union

from opm_core import DELIMITER, Opm, OpmError, OpmFormatError, PrecRel, join_terminals, split_terminals
from structure_parser import Chain, chain_is_valid

logger = logging.getLogger(__name__)

State = Hashable


# =============================================================================
# CONFIGURATIONS
# =============================================================================

@dataclass(frozen=True)
class StackSymbol:
    symbol: str
    origin: State


@dataclass(frozen=True)
class Configuration:
    """Stack above ⊥, current state, remaining input ending with #."""
    stack: Tuple[StackSymbol, ...]
    state: State
    input: Tuple[str, ...]

    @property
    def top_symbol(self) -> str:
        return self.stack[-1].symbol if self.stack else DELIMITER

    @property
    def lookahead(self) -> str:
        return self.input[0]


@dataclass(frozen=True)
class Move:
    """One step of a support path: kind is push/shift/pop, label the terminal or pop label."""
    kind: str
    label: Any


@dataclass
class AcceptResult:
    accepted: bool
    trace: List[Configuration] = field(default_factory=list)
    explored: int = 0


class OpaError(ValueError):
    """Malformed automaton."""


class OpaFormatError(OpaError):
    """Malformed automaton file or JSON document."""


def format_state(q: State) -> str:
    if isinstance(q, tuple) and len(q) == 2 and all(isinstance(x, str) for x in q):
        return f"⟨{q[0] or 'ε'},{q[1] or 'ε'}⟩"
    return str(q)


def format_configuration(c: Configuration) -> str:
    stack = "⊥" + "".join(f"[{s.symbol},{format_state(s.origin)}]" for s in c.stack)
    return f"{stack} | {format_state(c.state)} | {join_terminals(c.input)}"


def format_trace(trace: Sequence[Configuration]) -> str:
    """Three-column run table: stack, state, current input."""
    return "\n".join(["stack | state | current input"] + [format_configuration(c) for c in trace]) + "\n"


# =============================================================================
# AUTOMATON
# =============================================================================

TransitionMap = Dict[Tuple[State, Any], FrozenSet[State]]


def _freeze(table: Optional[Mapping[Tuple[State, Any], Iterable[State]]]) -> TransitionMap:
    out: TransitionMap = {}
    for key, targets in (table or {}).items():
        targets = frozenset(targets)
        if targets:
            out[key] = out.get(key, frozenset()) | targets
    return out


def _state_key(q: State) -> str:
    return format_state(q)


class Opa:
    """Operator precedence automaton over the alphabet of its matrix."""

    def __init__(self, opm: Opm, states: Iterable[State], initial: Iterable[State],
                 final: Iterable[State],
                 push: Optional[Mapping[Tuple[State, str], Iterable[State]]] = None,
                 shift: Optional[Mapping[Tuple[State, str], Iterable[State]]] = None,
                 pop: Optional[Mapping[Tuple[State, State], Iterable[State]]] = None):
        self.opm = opm
        self.states: FrozenSet[State] = frozenset(states)
        self.initial: FrozenSet[State] = frozenset(initial)
        self.final: FrozenSet[State] = frozenset(final)
        self.push = _freeze(push)
        self.shift = _freeze(shift)
        self.pop = _freeze(pop)
        self.validate()

    def validate(self) -> None:
        if not self.opm.is_conflict_free():
            raise OpaError("the automaton's matrix has conflicts: "
                           + "; ".join(c.describe() for c in self.opm.conflicts()))
        for name, subset in (("initial", self.initial), ("final", self.final)):
            stray = subset - self.states
            if stray:
                raise OpaError(f"{name} states not declared: {sorted(map(_state_key, stray))}")
        for kind, table in (("push", self.push), ("shift", self.shift)):
            for (q, a), targets in table.items():
                if q not in self.states or not targets <= self.states:
                    raise OpaError(f"{kind} transition on ({_state_key(q)}, {a}) leaves the state set")
                if a not in self.opm.alphabet:
                    raise OpaError(f"{kind} transition reads {a!r}, which is not in the alphabet")
        for (q, p), targets in self.pop.items():
            if q not in self.states or p not in self.states or not targets <= self.states:
                raise OpaError(f"pop transition on ({_state_key(q)}, {_state_key(p)}) leaves the state set")

    @property
    def alphabet(self) -> Tuple[str, ...]:
        return self.opm.alphabet

    def is_deterministic(self) -> bool:
        return (len(self.initial) <= 1
                and all(len(t) == 1 for t in self.push.values())
                and all(len(t) == 1 for t in self.shift.values())
                and all(len(t) == 1 for t in self.pop.values()))

    def move_kind(self, c: Configuration) -> Optional[PrecRel]:
        try:
            return self.opm.lookup(c.top_symbol, c.lookahead)
        except OpmError:
            return None

    def step(self, c: Configuration) -> List[Configuration]:
        """Successor configurations; all of them come from the same move kind."""
        if not c.stack and c.lookahead == DELIMITER:
            return []
        rel = self.move_kind(c)
        if rel is None:
            return []
        b = c.lookahead
        if rel is PrecRel.YIELDS:
            targets = self.push.get((c.state, b), frozenset())
            pushed = c.stack + (StackSymbol(b, c.state),)
            return [Configuration(pushed, q, c.input[1:]) for q in sorted(targets, key=_state_key)]
        if not c.stack:
            return []
        top = c.stack[-1]
        if rel is PrecRel.EQUALS:
            targets = self.shift.get((c.state, b), frozenset())
            shifted = c.stack[:-1] + (StackSymbol(b, top.origin),)
            return [Configuration(shifted, q, c.input[1:]) for q in sorted(targets, key=_state_key)]
        targets = self.pop.get((c.state, top.origin), frozenset())
        return [Configuration(c.stack[:-1], q, c.input) for q in sorted(targets, key=_state_key)]

    def initial_configurations(self, w: Union[str, Sequence[str]]) -> List[Configuration]:
        tokens = split_terminals(w) if isinstance(w, str) else tuple(w)
        word = tokens + (DELIMITER,)
        return [Configuration((), q, word) for q in sorted(self.initial, key=_state_key)]

    def is_accepting(self, c: Configuration) -> bool:
        return not c.stack and c.input == (DELIMITER,) and c.state in self.final

    def accepts(self, w: Union[str, Sequence[str]], trace: bool = False) -> AcceptResult:
        """
        Breadth-first search of the configuration graph.

        Every move consumes input or shrinks the stack at a fixed input
        position, so the visited set alone bounds the search.
        """
        starts = self.initial_configurations(w)
        parent: Dict[Configuration, Optional[Configuration]] = {c: None for c in starts}
        queue = deque(starts)
        while queue:
            c = queue.popleft()
            if self.is_accepting(c):
                run: List[Configuration] = []
                if trace:
                    node: Optional[Configuration] = c
                    while node is not None:
                        run.append(node)
                        node = parent[node]
                    run.reverse()
                logger.debug(f"Accepted after exploring {len(parent)} configurations")
                return AcceptResult(True, run, len(parent))
            for nxt in self.step(c):
                if nxt not in parent:
                    parent[nxt] = c
                    queue.append(nxt)
        return AcceptResult(False, [], len(parent))

    def accepting_runs(self, w: Union[str, Sequence[str]], limit: int = 1000) -> List[List[Configuration]]:
        """All accepting runs (up to limit), for comparing runs with each other."""
        runs: List[List[Configuration]] = []
        stack = [[c] for c in self.initial_configurations(w)]
        while stack and len(runs) < limit:
            run = stack.pop()
            last = run[-1]
            if self.is_accepting(last):
                runs.append(run)
                continue
            for nxt in reversed(self.step(last)):
                stack.append(run + [nxt])
        return runs

    # -------------------------------------------------------------------------
    # Formats
    # -------------------------------------------------------------------------

    def to_json(self) -> Dict[str, Any]:
        def enc(q: State) -> Any:
            if hasattr(q, "to_json"):
                return q.to_json()
            if isinstance(q, tuple):
                return list(q)
            return q

        def rows(table: TransitionMap, key: str) -> List[Dict[str, Any]]:
            out = []
            for (q, x), targets in sorted(table.items(), key=lambda kv: (_state_key(kv[0][0]), _state_key(kv[0][1]))):
                out.append({"from": enc(q), key: enc(x) if key == "label" else x,
                            "to": [enc(t) for t in sorted(targets, key=_state_key)]})
            return out

        return {
            "opm": self.opm.to_json(),
            "states": [enc(q) for q in sorted(self.states, key=_state_key)],
            "initial": [enc(q) for q in sorted(self.initial, key=_state_key)],
            "final": [enc(q) for q in sorted(self.final, key=_state_key)],
            "push": rows(self.push, "sym"),
            "shift": rows(self.shift, "sym"),
            "pop": rows(self.pop, "label"),
        }

    @classmethod
    def from_json(cls, data: Any) -> "Opa":
        if not isinstance(data, dict):
            raise OpaFormatError("automaton JSON must be an object")

        def dec(q: Any) -> State:
            if isinstance(q, list):
                return tuple(q)
            if isinstance(q, (str, int)):
                return q
            raise OpaFormatError(f"unsupported state value {q!r}")

        def table(rows: Any, key: str) -> Dict[Tuple[State, Any], Set[State]]:
            out: Dict[Tuple[State, Any], Set[State]] = {}
            for i, row in enumerate(rows or []):
                try:
                    src, x, to = row["from"], row[key], row["to"]
                except (KeyError, TypeError):
                    raise OpaFormatError(f"transition #{i} needs 'from', '{key}' and 'to'")
                x = dec(x) if key == "label" else x
                out.setdefault((dec(src), x), set()).update(dec(t) for t in to)
            return out

        try:
            opm = Opm.from_json(data["opm"])
            return cls(
                opm,
                [dec(q) for q in data["states"]],
                [dec(q) for q in data.get("initial", [])],
                [dec(q) for q in data.get("final", [])],
                table(data.get("push"), "sym"),
                table(data.get("shift"), "sym"),
                table(data.get("pop"), "label"),
            )
        except KeyError as e:
            raise OpaFormatError(f"automaton JSON is missing {e}")
        except OpmFormatError as e:
            raise OpaFormatError(f"matrix: {e}")
        except OpaFormatError:
            raise
        except OpaError as e:
            raise OpaFormatError(str(e))


def load_opa(path: str) -> Opa:
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise OpaFormatError(f"{path}: invalid JSON at line {e.lineno}: {e.msg}")
    try:
        a = Opa.from_json(data)
    except OpaFormatError as e:
        raise OpaFormatError(f"{path}: {e}")
    logger.info(f"Loaded automaton {path}: {len(a.states)} states")
    return a


def accepts(a: Opa, w: Union[str, Sequence[str]]) -> bool:
    return a.accepts(w).accepted


def step(a: Opa, c: Configuration) -> List[Configuration]:
    return a.step(c)


# =============================================================================
# SUPPORTS
# =============================================================================

def check_support(a: Opa, chain: Chain, path: Sequence[Any]) -> bool:
    """
    Whether path = [q0, Move, q1, Move, ...] is a support of the chain.

    Gap supports appear inline before the move that follows the gap; the
    final pop must be labeled by the state the first spine terminal was
    pushed from.
    """
    if len(path) % 2 == 0 or not chain_is_valid(a.opm, chain):
        return False
    moves = path[1::2]
    if not all(isinstance(m, Move) for m in moves):
        return False

    def walk(c: Chain, i: int) -> Optional[int]:
        if c.gaps[0] is not None:
            i = walk(c.gaps[0], i)
            if i is None:
                return None
        origin = path[i]
        for k, sym in enumerate(c.spine):
            if i + 2 >= len(path):
                return None
            kind = "push" if k == 0 else "shift"
            move, target = path[i + 1], path[i + 2]
            table = a.push if k == 0 else a.shift
            if move.kind != kind or move.label != sym or target not in table.get((path[i], sym), ()):
                return None
            i += 2
            gap = c.gaps[k + 1]
            if gap is not None:
                i = walk(gap, i)
                if i is None:
                    return None
        if i + 2 >= len(path):
            return None
        move, target = path[i + 1], path[i + 2]
        if move.kind != "pop" or move.label != origin or target not in a.pop.get((path[i], origin), ()):
            return None
        return i + 2

    try:
        return walk(chain, 0) == len(path) - 1
    except (TypeError, IndexError):
        return False


def support_targets(a: Opa, chain: Chain, start: State) -> Set[State]:
    """End states of all supports of the chain that begin in start."""
    memo: Dict[Tuple[int, State], Set[State]] = {}

    def reach(c: Chain, q: State) -> Set[State]:
        key = (id(c), q)
        if key in memo:
            return memo[key]
        origins = reach(c.gaps[0], q) if c.gaps[0] is not None else {q}
        result: Set[State] = set()
        for origin in origins:
            current = set(a.push.get((origin, c.spine[0]), ()))
            for k in range(1, len(c.spine) + 1):
                gap = c.gaps[k]
                if gap is not None:
                    current = set().union(*(reach(gap, s) for s in current)) if current else set()
                if k < len(c.spine):
                    current = {t for s in current for t in a.shift.get((s, c.spine[k]), ())}
            for s in current:
                result |= a.pop.get((s, origin), frozenset())
        memo[key] = result
        return result

    return reach(chain, start)
