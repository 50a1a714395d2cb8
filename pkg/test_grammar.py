"""
test_grammar.py
===============
Grammar text format, validation, terminal sets, matrix extraction,
backward determinism and the bounded language oracle.

Usage:
    pytest test_grammar.py
"""

import pytest
from hypothesis import given, settings as hyp_settings, strategies as st

from grammar import (Copg, GrammarError, GrammarSyntaxError, NonTerm, Plus, Rule, Term, compute_opm, double_expand,
                     enumerate_language, enumerate_nonterminal, enumerate_words, format_grammar, hat, is_bd,
                     parse_symbols, restrict_grammar, rhs_matches, terminal_sets, validate)
from conversions import tilde
from opm_core import DELIMITER, PrecRel

LT, EQ, GT = PrecRel.YIELDS, PrecRel.EQUALS, PrecRel.TAKES


# =============================================================================
# TEXT FORMAT
# =============================================================================

def test_gae_rules(gae):
    assert gae.axioms == ("E",)
    assert [str(r) for r in gae.rules] == [
        "E -> E + T", "E -> T × F", "E -> n", "T -> T × F", "T -> n", "F -> n",
    ]
    assert set(gae.terminals) == {"+", "×", "n"}


def test_sets_expand_to_one_rule_per_choice(gaae):
    paren_rules = [r for r in gaae.rules if r.rhs and r.rhs[0] == Term("⦇")]
    assert len(paren_rules) == 49
    assert len(gaae.rules_for("E")) == 8
    assert set(gaae.axioms) == {"P", "T", "M", "N", "F", "D", "E"}


def test_groups_and_quoted_terminals(grammar_from):
    g = grammar_from("axioms S ; S -> ( 'A' x )+ 'A' | ε ;")
    assert g.rules[0].rhs == (Plus((Term("A"), Term("x"))), Term("A"))
    assert g.rules[1].rhs == ()
    assert g.has_empty_rule


@pytest.mark.parametrize("text, line", [
    ("S -> a ;", None),
    ("axioms S ;\nS -> ( a b ) ;", 2),
    ("axioms S ;\nS -> a\n", 2),
    ("axioms s ;", 1),
    ("axioms S ;\n\nS -> a ; $", None),
])
def test_syntax_errors(grammar_from, text, line):
    with pytest.raises(GrammarSyntaxError) as exc:
        grammar_from(text)
    if line is not None:
        assert exc.value.line == line


def test_format_grammar_reads_back(gaae, grammar_from):
    again = grammar_from(format_grammar(gaae))
    assert set(again.rules) == set(gaae.rules)
    assert set(again.axioms) == set(gaae.axioms)


def test_format_grammar_quotes_and_empty_rule(grammar_from):
    g = Copg.build([Rule("S0", ()), Rule("S", (Term("Up"), Term("a b")))], ["S0", "S"])
    text = format_grammar(g)
    assert "'Up'" in text and "'a b'" in text
    again = grammar_from(text)
    assert set(again.rules) == set(g.rules)


def test_format_grammar_renames_structured_nonterminals(grammar_from):
    g = Copg.build([Rule(("#", "q0"), (Term("a"),))], [("#", "q0")])
    text = format_grammar(g)
    assert "// Q0 = ('#', 'q0')" in text
    assert grammar_from(text).rules[0].lhs == "Q0"


# =============================================================================
# VALIDATION
# =============================================================================

def test_bundled_grammars_are_valid(gae, gaae, cyclic, habc):
    for g in (gae, gaae, cyclic, habc):
        assert validate(g) == []


@pytest.mark.parametrize("text, fragment", [
    ("axioms S ; S -> A B | a ; A -> a ; B -> b ;", "adjacent nonterminals"),
    ("axioms S ; S -> A ; A -> a ;", "renaming rule"),
    ("axioms S ; S -> ( a A )+ | a ; A -> a ;", "not terminal-terminated"),
    ("axioms S ; S -> a | ; T -> ;", "more than one ε-rule"),
    ("axioms S ; S -> a # ;", "delimiter"),
])
def test_validation_failures(grammar_from, text, fragment):
    found = [v.describe() for v in validate(grammar_from(text))]
    assert any(fragment in d for d in found), found


def test_empty_rule_must_stand_alone(grammar_from):
    g = grammar_from("axioms S ; S -> a S | ;")
    assert any("no other rule" in v.describe() for v in validate(g))


def test_violation_names_line(grammar_from):
    g = grammar_from("axioms S ;\nS -> a ;\nS -> A ;\nA -> a ;")
    assert any(v.describe().startswith("line 3:") for v in validate(g))


# =============================================================================
# TERMINAL SETS AND MATRIX EXTRACTION
# =============================================================================

def test_terminal_sets_of_gae(gae):
    sets = terminal_sets(gae)
    assert sets.left["E"] == {"+", "×", "n"}
    assert sets.left["T"] == {"×", "n"}
    assert sets.right["E"] == {"+", "×", "n"}
    assert sets.left["F"] == sets.right["F"] == {"n"}


def test_gae_matrix_is_fig2(gae, fig2):
    report = compute_opm(gae)
    assert report.is_copg
    assert report.opm == fig2


def test_gaae_matrix_is_fig4(gaae, fig4):
    report = compute_opm(gaae)
    assert report.is_copg
    assert report.opm == fig4
    assert report.opm.lookup("+", "+") is EQ
    assert report.opm.lookup("×", "×") is EQ
    assert report.opm.lookup("−", "−") is GT


def test_conflicts_name_their_rules(grammar_from):
    report = compute_opm(grammar_from("axioms S ; S -> a S | S a | b ;"))
    assert not report.is_copg
    (conflict,) = [c for c in report.conflicts if (c.a, c.b) == ("a", "a")]
    assert conflict.relations == {LT, GT}
    assert any("S -> a S" in s for s in conflict.sources)
    assert any("S -> S a" in s for s in conflict.sources)


def test_double_expansion():
    rhs = (Plus((NonTerm("T"), Term("+"))), NonTerm("T"))
    assert double_expand(rhs) == (NonTerm("T"), Term("+"), NonTerm("T"), Term("+"), NonTerm("T"))
    assert hat(rhs) == (NonTerm("T"), Term("+"), NonTerm("T"))


# =============================================================================
# RHS LANGUAGES AND BACKWARD DETERMINISM
# =============================================================================

def test_rhs_membership():
    rhs = (Plus((NonTerm("B"), Term("a"), Plus((Term("b"), Term("c"))))), Term("a"))
    assert rhs_matches(rhs, parse_symbols("Babca"))
    assert rhs_matches(rhs, parse_symbols("BabcbcBabca"))
    assert not rhs_matches(rhs, parse_symbols("Baa"))
    assert not rhs_matches(rhs, parse_symbols("Babc"))


def test_tilde_of_nested_group():
    group = (Plus((NonTerm("B"), Term("a"), Plus((Term("b"), Term("c"))))),)
    expected = {parse_symbols(s) for s in [
        "Babc", "Babcbc", "BabcBabc", "BabcBabcbc", "BabcbcBabc", "BabcbcBabcbc",
    ]}
    assert tilde(group) == expected
    assert hat(group) == parse_symbols("Babc")


def test_gae_is_not_backward_deterministic(gae):
    report = is_bd(gae)
    assert not report.is_bd
    pairs = {(str(r1), str(r2)) for r1, r2 in report.collisions}
    assert ("E -> n", "T -> n") in pairs
    assert ("E -> T × F", "T -> T × F") in pairs
    assert not any("E -> E + T" in pair for pair in pairs)


def test_habc_is_backward_deterministic(habc):
    assert is_bd(habc).is_bd


def test_group_languages_overlap(grammar_from):
    g = grammar_from("axioms S ; S -> ( a b )+ a | c ; R -> a ( b a )+ ;")
    assert not is_bd(g).is_bd


# =============================================================================
# BOUNDED LANGUAGES
# =============================================================================

def test_enumerate_gae(gae):
    assert enumerate_language(gae, 3) == {"n", "n+n", "n×n"}
    five = enumerate_language(gae, 5)
    assert "n+n×n" in five and "n×n+n" in five and "n+n+n" in five
    assert all(len(w) % 2 == 1 for w in five)


def test_enumerate_cyclic(cyclic):
    assert enumerate_language(cyclic, 5) == {"n", "n+n", "n+n+n"}


def test_enumerate_habc(habc):
    assert enumerate_language(habc, 8) == {"habca", "habcbca"}
    assert enumerate_words(habc, 4) == set()


def test_enumerate_nonterminal(gaae):
    assert enumerate_nonterminal(gaae, "E", 3) == {"n", "⦇n⦈"}
    assert "n/n" in enumerate_nonterminal(gaae, "D", 3)


def test_enumerate_includes_empty_word(grammar_from):
    g = grammar_from("axioms S S0 ; S -> a ; S0 -> ;")
    assert enumerate_language(g, 2) == {"", "a"}


def test_negative_bound_rejected(gae):
    with pytest.raises(GrammarError):
        enumerate_language(gae, -1)


def test_restrict_grammar_drops_parentheses(gaae):
    flat = restrict_grammar(gaae, ["+", "−", "×", "/", "n"])
    assert all("⦇" not in str(r) for r in flat.rules)
    assert set(flat.axioms) == set(gaae.axioms)
    assert enumerate_language(flat, 3) == {"n", "n+n", "n−n", "n×n", "n/n"}


# =============================================================================
# MATRIX AND LANGUAGE PROPERTIES
# =============================================================================

GROUP_RHS = (Plus((NonTerm("T"), Term("+"))), NonTerm("T"))


def expand_k(rhs, k):
    out = ()
    for item in rhs:
        if isinstance(item, Plus):
            out += expand_k(item.items, k) * k
        else:
            out += (item,)
    return out


@pytest.mark.parametrize("rhs, handle, expected", [
    (GROUP_RHS, "T", False),
    (GROUP_RHS, "T+T+T", True),
    (GROUP_RHS, "T+T+", False),
    ((Plus((NonTerm("F"), Term("×"))), NonTerm("F")), "F×F", True),
    ((), "", True),
    ((), "a", False),
])
def test_rhs_match_examples(rhs, handle, expected):
    assert rhs_matches(rhs, parse_symbols(handle)) is expected


@pytest.mark.parametrize("name", ["gaae", "habc", "cyclic"])
def test_every_group_expansion_matches(request, name):
    g = request.getfixturevalue(name)
    for rule in g.rules:
        for k in range(1, 5):
            assert rhs_matches(rule.rhs, expand_k(rule.rhs, k)), (str(rule), k)
        for handle in tilde(rule.rhs):
            assert rhs_matches(rule.rhs, handle)


@hyp_settings(max_examples=50, deadline=None)
@given(data=st.data())
def test_fewer_rules_give_fewer_relations(gaae, data):
    full = compute_opm(gaae).opm
    subset = data.draw(st.lists(st.sampled_from(gaae.rules), unique=True))
    sub = Copg.build(subset, gaae.axioms, terminals=gaae.terminals, nonterminals=gaae.nonterminals)
    for (a, b), rels in compute_opm(sub).opm.cells():
        assert rels <= full.relations(a, b)


@pytest.mark.parametrize("name, top", [("gae", 6), ("cyclic", 6), ("habc", 6), ("gaae", 4)])
def test_bounded_languages_grow_with_the_bound(request, name, top):
    g = request.getfixturevalue(name)
    for n in range(top):
        assert enumerate_language(g, n) <= enumerate_language(g, n + 1)


def longest_eq_chain(m):
    edges = {}
    for (a, b), rels in m.cells():
        if EQ in rels and DELIMITER not in (a, b):
            edges.setdefault(a, []).append(b)

    def depth(a):
        return 1 + max((depth(b) for b in edges.get(a, ())), default=0)

    return max((depth(a) for a in m.alphabet), default=0)


@pytest.mark.parametrize("text", [
    None,
    "axioms S ; S -> a S b | c ;",
])
def test_rhs_length_bounded_by_eq_chains(gae, grammar_from, text):
    g = gae if text is None else grammar_from(text)
    longest = longest_eq_chain(compute_opm(g).opm)
    for rule in g.rules:
        flat = hat(rule.rhs)
        assert sum(isinstance(s, Term) for s in flat) <= longest
        assert len(flat) <= 2 * longest + 1
