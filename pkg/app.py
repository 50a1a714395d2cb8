"""
copg-toolkit - HTTP Service
===========================
Small JSON API over the library: grammar checks, parsing and automaton runs.

Usage:
    gunicorn app:app
    python app.py

Environment:
    PORT=5000
    FLASK_DEBUG=false
    COPG_SAMPLES_DIR=./samples     grammars, matrices and automata served by name
"""

import os
import logging
from typing import Any, Dict, List, Tuple

from flask import Flask, request, jsonify

import settings
from conversions import ConversionError
from grammar import GrammarError, GrammarSyntaxError, compute_opm, is_bd, load_grammar, parse_grammar_text, validate
from opa import Opa, OpaError, OpaFormatError, format_trace, load_opa
from opm_core import Opm, OpmError, OpmFormatError, load_opm, split_terminals
from parallel_parse import parallel_parse
from structure_parser import ParseError, parse_labeled, parse_opm, to_sexpr, tree_to_json

settings.configure_logging()
logger = logging.getLogger(__name__)

app = Flask(__name__)

SERVICE_NAME = 'copg-toolkit'
VERSION = '1.0.0'

GRAMMAR_SUFFIX = '.copg'
OPM_SUFFIX = '.opm.json'
OPA_SUFFIX = '.opa.json'


class RequestError(ValueError):
    """Malformed request body."""


def list_samples() -> List[str]:
    """Sample file names available to the `sample` request field."""
    if not os.path.isdir(settings.SAMPLES_DIR):
        return []
    return sorted(name for name in os.listdir(settings.SAMPLES_DIR)
                  if name.endswith((GRAMMAR_SUFFIX, OPM_SUFFIX, OPA_SUFFIX)))


def _sample(name: Any, suffix: str) -> str:
    if not isinstance(name, str) or name not in list_samples() or not name.endswith(suffix):
        raise RequestError(f"unknown sample {name!r}; expected a *{suffix} file from /")
    return settings.sample_path(name)


def _body() -> Dict[str, Any]:
    data = request.get_json(silent=True)
    if not isinstance(data, dict):
        raise RequestError('request body must be a JSON object')
    return data


def _input(data: Dict[str, Any]) -> Tuple[str, ...]:
    text = data.get('input')
    if not isinstance(text, str):
        raise RequestError("'input' must be a string")
    return split_terminals(text)


def _failure(e: Exception, status: int):
    logger.info(f"{request.path} failed ({status}): {e}")
    return jsonify({'success': False, 'error': str(e)}), status


@app.errorhandler(RequestError)
@app.errorhandler(OpmFormatError)
@app.errorhandler(OpaFormatError)
@app.errorhandler(GrammarSyntaxError)
def handle_format_error(e):
    return _failure(e, 400)


@app.errorhandler(ParseError)
@app.errorhandler(OpmError)
@app.errorhandler(OpaError)
@app.errorhandler(GrammarError)
@app.errorhandler(ConversionError)
def handle_rejection(e):
    return _failure(e, 422)


# =============================================================================
# HEALTH CHECK
# =============================================================================

@app.route('/', methods=['GET'])
def health_check():
    """Health check endpoint."""
    return jsonify({
        'status': 'healthy',
        'service': SERVICE_NAME,
        'version': VERSION,
        'endpoints': [
            '/api/check',
            '/api/parse',
            '/api/run'
        ],
        'samples': list_samples()
    })


@app.route('/health', methods=['GET'])
def health():
    """Alternative health check."""
    return jsonify({'status': 'ok'})


# =============================================================================
# GRAMMAR CHECK
# =============================================================================

@app.route('/api/check', methods=['POST'])
def check_grammar():
    """
    Validate a grammar and report its matrix.

    Body: {"grammar": text}
    """
    data = _body()
    text = data.get('grammar')
    if not isinstance(text, str):
        raise RequestError("'grammar' must be grammar text")
    g = parse_grammar_text(text, source='request')
    violations = validate(g)
    report = compute_opm(g)
    bd = is_bd(g)
    logger.info(f"Checked grammar with {len(g.rules)} rules: "
                f"{len(violations)} violations, {len(report.conflicts)} conflicts")
    return jsonify({
        'success': True,
        'valid': not violations,
        'violations': [v.describe() for v in violations],
        'opm': report.opm.to_json(),
        'table': report.opm.format_table(),
        'conflicts': [c.describe() for c in report.conflicts],
        'eq_cycle': report.opm.eq_cycle(),
        'backward_deterministic': bd.is_bd,
    })


# =============================================================================
# PARSING
# =============================================================================

@app.route('/api/parse', methods=['POST'])
def parse_input():
    """
    Parse a string with a matrix or a grammar.

    Body: {"grammar": text | "opm": matrix JSON | "sample": name,
           "input": string, "labeled": bool, "workers": int}
    """
    data = _body()
    w = _input(data)
    labeled = bool(data.get('labeled', False))
    workers = data.get('workers', 1)
    if not isinstance(workers, int) or isinstance(workers, bool) or workers < 1:
        raise RequestError("'workers' must be a positive integer")

    sources = [key for key in ('grammar', 'opm', 'sample') if key in data]
    if len(sources) != 1:
        raise RequestError("give exactly one of 'grammar', 'opm' or 'sample'")

    g = m = None
    if 'grammar' in data:
        if not isinstance(data['grammar'], str):
            raise RequestError("'grammar' must be grammar text")
        g = parse_grammar_text(data['grammar'], source='request')
    elif 'opm' in data:
        m = Opm.from_json(data['opm'])
    elif str(data['sample']).endswith(GRAMMAR_SUFFIX):
        g = load_grammar(_sample(data['sample'], GRAMMAR_SUFFIX))
    else:
        m = load_opm(_sample(data['sample'], OPM_SUFFIX))

    if labeled:
        if g is None:
            raise RequestError("'labeled' needs a grammar")
        tree = parse_labeled(g, w)
        stats = None
    else:
        if m is None:
            report = compute_opm(g)
            if not report.is_copg:
                raise GrammarError('grammar has conflicting precedence relations: '
                                   + '; '.join(c.describe() for c in report.conflicts))
            m = report.opm
        if workers > 1:
            tree, stats = parallel_parse(m, w, workers, processes=1)
        else:
            tree, stats = parse_opm(m, w), None

    result = {
        'success': True,
        'tree': tree_to_json(tree),
        'sexpr': to_sexpr(tree),
    }
    if stats is not None:
        result['stats'] = {
            'chunk_lengths': stats.chunk_lengths,
            'worker_reductions': stats.worker_reductions,
            'merge_reductions': stats.merge_reductions,
        }
    return jsonify(result)


# =============================================================================
# AUTOMATON RUNS
# =============================================================================

@app.route('/api/run', methods=['POST'])
def run_automaton():
    """
    Run an automaton on a string.

    Body: {"opa": OPA JSON | "sample": name, "input": string, "trace": bool}
    """
    data = _body()
    w = _input(data)
    if ('opa' in data) == ('sample' in data):
        raise RequestError("give exactly one of 'opa' or 'sample'")
    if 'opa' in data:
        a = Opa.from_json(data['opa'])
    else:
        a = load_opa(_sample(data['sample'], OPA_SUFFIX))

    want_trace = bool(data.get('trace', False))
    result = a.accepts(w, trace=want_trace)
    body = {'success': True, 'accepted': result.accepted}
    if want_trace and result.accepted:
        body['trace'] = format_trace(result.trace)
    return jsonify(body)


# =============================================================================
# MAIN
# =============================================================================

if __name__ == '__main__':
    app.run(host='0.0.0.0', port=settings.PORT, debug=settings.FLASK_DEBUG)
