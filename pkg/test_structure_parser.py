"""
test_structure_parser.py
========================
Matrix-driven parsing, labeled parsing, tree utilities and chains.

Usage:
    pytest test_structure_parser.py
"""

import pytest
from hypothesis import given, strategies as st

from grammar import GrammarError, compute_opm, enumerate_language
from opm_core import Opm, PrecRel
from structure_parser import (EMPTY_TREE, Chain, IncompleteParse, Leaf, Node, NoRelation, NoRule, ParseError,
                              RootNotAxiom, annotate, chain_decompose, chain_depth, chain_is_valid, chain_to_tree,
                              count_nodes, drawn_depth, erase_labels, forced_relations, format_annotation, frontier,
                              is_compatible, parse_labeled, parse_opm, parse_opm_rescan, to_sexpr, tree_from_json,
                              tree_to_chain, tree_to_json)

LT, EQ, GT = PrecRel.YIELDS, PrecRel.EQUALS, PrecRel.TAKES


def N(*children):
    return Node(None, tuple(Leaf(c) if isinstance(c, str) else c for c in children))


n = N("n")

fig2_words = st.lists(st.sampled_from(["n", "+", "×"]), max_size=15)
fig4_words = st.lists(st.sampled_from(["n", "+", "−", "×", "/", "⦇", "⦈"]), max_size=15)


# =============================================================================
# MATRIX PARSING
# =============================================================================

def test_fig2_tree_is_left_associated(fig2):
    tree = parse_opm(fig2, "n+n×n+n")
    assert tree == N(N(n, "+", N(n, "×", n)), "+", n)
    assert to_sexpr(tree) == "(N (N (N n) + (N (N n) × (N n))) + (N n))"


def test_fig4_sum_is_flat(fig4):
    assert parse_opm(fig4, "n+n+n") == N(n, "+", n, "+", n)
    assert parse_opm(fig4, "n−n−n") == N(N(n, "−", n), "−", n)


def test_parentheses_shift(fig4):
    tree = parse_opm(fig4, "⦇n+n⦈×n")
    assert tree == N(N("⦇", N(n, "+", n), "⦈"), "×", n)


def test_annotation(fig2):
    assert format_annotation(annotate(fig2, "n+n")) == "# ⋖ n ⋗ + ⋖ n ⋗ #"
    assert annotate(fig2, "") == ["#", EQ, "#"]


def test_adjacent_operands_block(fig2):
    with pytest.raises(NoRelation) as exc:
        parse_opm(fig2, "nn")
    assert (exc.value.a, exc.value.b, exc.value.position) == ("n", "n", 2)
    assert not is_compatible(fig2, "nn")


def test_unclosed_parenthesis(fig4):
    with pytest.raises(NoRelation) as exc:
        parse_opm(fig4, "⦇n")
    assert (exc.value.a, exc.value.b) == ("⦇", "#")


def test_unreducible_input():
    m = Opm(["a"], {("#", "a"): {LT}, ("a", "#"): {EQ}})
    with pytest.raises(IncompleteParse):
        parse_opm(m, "a")


def test_empty_input(fig2):
    assert parse_opm(fig2, "") == EMPTY_TREE
    assert to_sexpr(EMPTY_TREE) == "ε"


@given(word=fig2_words)
def test_single_pass_matches_rescan_fig2(fig2, word):
    check_against_rescan(fig2, word)


@given(word=fig4_words)
def test_single_pass_matches_rescan_fig4(fig4, word):
    check_against_rescan(fig4, word)


def check_against_rescan(m, word):
    try:
        expected = parse_opm_rescan(m, word)
    except ParseError:
        with pytest.raises(ParseError):
            parse_opm(m, word)
        return
    tree = parse_opm(m, word)
    assert tree == expected
    assert frontier(tree) == tuple(word)


def test_long_sum_stays_iterative(fig2):
    terms = 5000
    tree = parse_opm(fig2, "+".join(["n"] * terms))
    assert count_nodes(tree) == 2 * terms - 1
    assert len(frontier(tree)) == 2 * terms - 1


def test_forced_relations(fig2, fig4):
    assert forced_relations(fig2) == (frozenset({"n"}), frozenset({"n"}))
    assert forced_relations(fig4) == (frozenset({"n", "⦇"}), frozenset({"n", "⦈"}))


# =============================================================================
# LABELED PARSING
# =============================================================================

def test_labeled_gae(gae, fig2):
    tree = parse_labeled(gae, "n+n×n+n")
    assert to_sexpr(tree) == "(E (E (E n) + (T (T n) × (F n))) + (T n))"
    assert erase_labels(tree) == parse_opm(fig2, "n+n×n+n")


def test_labeled_gaae(gaae):
    assert to_sexpr(parse_labeled(gaae, "n+n×n")) == "(P (T n) + (T (F n) × (F n)))"


def test_labeled_parse_of_long_cycle(gaae):
    tree = parse_labeled(gaae, "n+n+n/n/n+n+n")
    assert tree.label == "P"
    assert len(tree.children) == 9
    assert to_sexpr(tree.children[4]) == "(T (D (D n) / (E n)) / (E n))"


def test_no_rule_for_handle(grammar_from):
    g = grammar_from("axioms S ; S -> a a n | n ;")
    with pytest.raises(NoRule) as exc:
        parse_labeled(g, "an")
    assert exc.value.handle == "a n"
    assert exc.value.position == 1


def test_root_must_be_axiom(grammar_from):
    g = grammar_from("axioms S ; S -> A + A ; A -> n ;")
    with pytest.raises(RootNotAxiom):
        parse_labeled(g, "n")


def test_labeled_empty_word(grammar_from):
    g = grammar_from("axioms S S0 ; S -> a ; S0 -> ;")
    assert parse_labeled(g, "") == Node("S0", ())


def test_labeled_parse_needs_conflict_free_grammar(grammar_from):
    with pytest.raises(GrammarError):
        parse_labeled(grammar_from("axioms S ; S -> a S | S a | b ;"), "b")


# =============================================================================
# TREE UTILITIES
# =============================================================================

def test_tree_json(gae, fig2):
    tree = parse_labeled(gae, "n×n")
    data = tree_to_json(tree)
    assert data["nt"] == "E"
    assert data["children"][1] == {"t": "×"}
    assert tree_from_json(data) == tree
    assert tree_to_json(parse_opm(fig2, "n"))["nt"] is None


# =============================================================================
# CHAINS
# =============================================================================

def test_chain_depths(fig2, fig4):
    main = chain_decompose(fig2, "n+n×n+n")
    assert main.spine == ("+",)
    assert main.context == ("#", "#")
    assert chain_depth(main) == 4
    assert drawn_depth(main) == 5
    assert chain_depth(chain_decompose(fig2, "n")) == 1
    assert chain_decompose(fig2, "n").is_simple
    assert chain_depth(chain_decompose(fig4, "n+n+n")) == 2


def test_chain_gaps_carry_context(fig2):
    main = chain_decompose(fig2, "n+n×n+n")
    left = main.gaps[0]
    assert left.context == ("#", "+")
    assert left.gaps[1].context == ("+", "+")
    assert left.gaps[1].spine == ("×",)
    assert main.body() == tuple("n+n×n+n")


def test_chain_validity(fig2, fig4):
    assert chain_is_valid(fig2, chain_decompose(fig2, "n+n×n+n"))
    assert chain_is_valid(fig4, chain_decompose(fig4, "⦇n+n⦈×n"))
    assert not chain_is_valid(fig2, Chain(("#", "#"), ("n", "n"), (None, None, None)))
    assert chain_is_valid(fig2, Chain(("+", "#"), ("×",), (None, None)))
    assert not chain_is_valid(fig2, Chain(("×", "#"), ("+",), (None, None)))


def test_empty_word_has_no_chain(fig2):
    with pytest.raises(ParseError):
        chain_decompose(fig2, "")


@given(word=fig4_words)
def test_chain_tree_round_trip(fig4, word):
    if not word or not is_compatible(fig4, word):
        return
    tree = parse_opm(fig4, word)
    assert chain_to_tree(tree_to_chain(tree)) == tree
    assert chain_is_valid(fig4, tree_to_chain(tree))


def spines(chain):
    yield chain.spine
    for gap in chain.gaps:
        if gap is not None:
            yield from spines(gap)


@given(word=fig2_words)
def test_matrix_without_equal_cells_has_single_terminal_spines(fig2, word):
    assert all(EQ not in rels for (a, b), rels in fig2.cells() if (a, b) != ("#", "#"))
    if not word or not is_compatible(fig2, word):
        return
    assert all(len(s) == 1 for s in spines(chain_decompose(fig2, word)))


# =============================================================================
# LABELED PARSING OVER WHOLE LANGUAGES
# =============================================================================

def test_labeled_parse_of_mixed_cycles(gaae):
    tree = parse_labeled(gaae, "n−n−n×n+n+n×n/n×n+⦇n+n⦈/n+n+n")
    assert tree.label == "P"
    assert len(tree.children) == 11
    assert [c.terminal for c in tree.children if isinstance(c, Leaf)] == ["+"] * 5


@pytest.mark.parametrize("name, maxlen", [("gae", 7), ("gaae", 5), ("cyclic", 9), ("habc", 11)])
def test_every_sentence_parses_labeled(request, name, maxlen):
    g = request.getfixturevalue(name)
    m = compute_opm(g).opm
    words = enumerate_language(g, maxlen)
    assert words
    for w in words:
        tree = parse_labeled(g, w)
        assert tree.label in g.axioms
        assert erase_labels(tree) == parse_opm(m, w)
