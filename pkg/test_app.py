"""
test_app.py
===========
HTTP service: health endpoints, grammar checks, parsing, automaton runs
and error statuses.

Usage:
    pytest test_app.py
"""

import pytest

import settings
from app import SERVICE_NAME, app


@pytest.fixture
def client():
    app.config['TESTING'] = True
    with app.test_client() as c:
        yield c


@pytest.fixture(scope="module")
def gae_text():
    with open(settings.sample_path('gae.copg'), encoding='utf-8') as f:
        return f.read()


# =============================================================================
# HEALTH
# =============================================================================

def test_root(client):
    data = client.get('/').get_json()
    assert data['status'] == 'healthy'
    assert data['service'] == SERVICE_NAME
    assert '/api/parse' in data['endpoints']
    assert {'gae.copg', 'fig2.opm.json', 'fig3.opa.json'} <= set(data['samples'])


def test_health(client):
    assert client.get('/health').get_json() == {'status': 'ok'}


# =============================================================================
# CHECK
# =============================================================================

def test_check_gae(client, gae_text):
    data = client.post('/api/check', json={'grammar': gae_text}).get_json()
    assert data['success'] and data['valid']
    assert data['conflicts'] == []
    assert data['eq_cycle'] is None
    assert data['backward_deterministic'] is False
    assert len(data['opm']['cells']) == 14


def test_check_reports_violations(client):
    data = client.post('/api/check', json={'grammar': 'axioms S ; S -> A ; A -> a ;'}).get_json()
    assert data['success']
    assert not data['valid']
    assert any('renaming rule' in v for v in data['violations'])


def test_check_needs_json_object(client):
    response = client.post('/api/check', data='grammar', content_type='text/plain')
    assert response.status_code == 400
    assert response.get_json()['success'] is False


def test_check_syntax_error(client):
    response = client.post('/api/check', json={'grammar': 'S -> a ;'})
    assert response.status_code == 400


# =============================================================================
# PARSE
# =============================================================================

def test_parse_labeled_grammar(client, gae_text):
    data = client.post('/api/parse', json={'grammar': gae_text, 'input': 'n+n×n+n', 'labeled': True}).get_json()
    assert data['sexpr'] == '(E (E (E n) + (T (T n) × (F n))) + (T n))'
    assert data['tree']['nt'] == 'E'


def test_parse_with_matrix_document(client, fig2):
    data = client.post('/api/parse', json={'opm': fig2.to_json(), 'input': 'n+n×n+n'}).get_json()
    assert data['sexpr'] == '(N (N (N n) + (N (N n) × (N n))) + (N n))'
    assert 'stats' not in data


def test_parse_sample_with_workers(client):
    data = client.post('/api/parse', json={'sample': 'fig4.opm.json', 'input': 'n+n+n', 'workers': 2}).get_json()
    assert data['sexpr'] == '(N (N n) + (N n) + (N n))'
    assert data['stats']['chunk_lengths'] == [3, 2]


def test_parse_grammar_sample(client):
    data = client.post('/api/parse', json={'sample': 'gae.copg', 'input': 'n×n', 'labeled': True}).get_json()
    assert data['sexpr'] == '(E (T n) × (F n))'


def test_parse_rejected_input(client):
    response = client.post('/api/parse', json={'sample': 'fig2.opm.json', 'input': 'nn'})
    assert response.status_code == 422
    assert response.get_json()['success'] is False


def test_parse_conflicting_grammar(client):
    response = client.post('/api/parse', json={'grammar': 'axioms S ; S -> a S | S a | b ;', 'input': 'b'})
    assert response.status_code == 422


@pytest.mark.parametrize('body', [
    {'input': 'n'},
    {'sample': 'fig2.opm.json', 'grammar': 'axioms S ; S -> n ;', 'input': 'n'},
    {'sample': 'fig2.opm.json', 'input': 'n', 'labeled': True},
    {'sample': '../app.py', 'input': 'n'},
    {'sample': 'fig2.opm.json', 'input': 'n', 'workers': 0},
    {'sample': 'fig2.opm.json', 'input': 5},
    {'opm': {'alphabet': 'n'}, 'input': 'n'},
])
def test_parse_bad_requests(client, body):
    assert client.post('/api/parse', json=body).status_code == 400


# =============================================================================
# RUN
# =============================================================================

def test_run_sample_with_trace(client, fig3_trace):
    data = client.post('/api/run', json={'sample': 'fig3.opa.json', 'input': 'n+n×⦇n+n⦈', 'trace': True}).get_json()
    assert data['accepted'] is True
    assert data['trace'] == fig3_trace


def test_run_inline_automaton(client, single_a):
    doc = single_a.to_json()
    assert client.post('/api/run', json={'opa': doc, 'input': 'a'}).get_json()['accepted'] is True
    data = client.post('/api/run', json={'opa': doc, 'input': 'aa', 'trace': True}).get_json()
    assert data['accepted'] is False
    assert 'trace' not in data


def test_run_malformed_automaton(client):
    response = client.post('/api/run', json={'opa': {'states': []}, 'input': 'a'})
    assert response.status_code == 400


def test_run_needs_one_source(client):
    assert client.post('/api/run', json={'input': 'n'}).status_code == 400
