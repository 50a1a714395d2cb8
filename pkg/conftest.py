"""
conftest.py
===========
Shared fixtures: the bundled grammars, the published matrices and the
hand-encoded automaton.

Usage:
    pytest
"""

import pytest

import settings
from grammar import load_grammar, parse_grammar_text
from opa import Opa, load_opa
from opm_core import Opm, PrecRel, load_opm

LT, EQ, GT = PrecRel.YIELDS, PrecRel.EQUALS, PrecRel.TAKES


@pytest.fixture(scope="session")
def gae():
    return load_grammar(settings.sample_path("gae.copg"))


@pytest.fixture(scope="session")
def gaae():
    return load_grammar(settings.sample_path("gaae.copg"))


@pytest.fixture(scope="session")
def cyclic():
    return load_grammar(settings.sample_path("cyclic.copg"))


@pytest.fixture(scope="session")
def habc():
    return load_grammar(settings.sample_path("habc.copg"))


@pytest.fixture(scope="session")
def fig2():
    return load_opm(settings.sample_path("fig2.opm.json"))


@pytest.fixture(scope="session")
def fig4():
    return load_opm(settings.sample_path("fig4.opm.json"))


@pytest.fixture(scope="session")
def fig3():
    return load_opa(settings.sample_path("fig3.opa.json"))


@pytest.fixture(scope="session")
def fig3_trace():
    with open(settings.sample_path("fig3_trace.txt"), encoding="utf-8") as f:
        return f.read()


@pytest.fixture
def single_a():
    """Automaton accepting exactly the word a."""
    m = Opm(["a"], {("#", "a"): {LT}, ("a", "#"): {GT}})
    return Opa(m, ["q0", "q1", "q2"], ["q0"], ["q2"],
               push={("q0", "a"): ["q1"]}, pop={("q1", "q0"): ["q2"]})


@pytest.fixture
def grammar_from():
    return parse_grammar_text
