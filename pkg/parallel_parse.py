"""
copg-toolkit - Chunked Parallel Parsing
=======================================
Splits the input into contiguous chunks, parses every chunk without knowing
its context, merges neighbouring partial parses pairwise and finishes the
result between # delimiters. The tree always equals the sequential one.

Usage:
    from parallel_parse import parallel_parse

    tree, stats = parallel_parse(m, "n+n+n+n+n+n", 3)
    print(stats.to_csv())

Environment:
    COPG_WORKERS=1      default worker processes when none are requested
"""

import logging
import multiprocessing
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import settings
from opm_core import DELIMITER, Opm, PrecRel, split_terminals
from structure_parser import EMPTY_TREE, NoRelation, ReductionStack, SyntaxTree

logger = logging.getLogger(__name__)

Item = Union[str, SyntaxTree]


def _terminals(w: Union[str, Sequence[str]]) -> Tuple[str, ...]:
    return split_terminals(w) if isinstance(w, str) else tuple(w)


# =============================================================================
# DATA CLASSES
# =============================================================================

@dataclass
class PartialParse:
    """
    Normal form of a chunk: terminals still waiting for context, and the
    subtrees that were completed inside it.

    pending lists the terminals whose handles were closed on the strength of
    the matrix alone; their relation to whatever follows is checked on merge.
    """
    items: List[Item]
    marks: List[Optional[PrecRel]]
    positions: List[Optional[int]]
    first_symbol: Optional[str]
    last_symbol: Optional[str]
    pending: List[str]
    start: int
    length: int
    reductions: int = 0

    @property
    def is_empty(self) -> bool:
        return self.length == 0


@dataclass
class WorkStats:
    worker_reductions: List[int] = field(default_factory=list)
    chunk_lengths: List[int] = field(default_factory=list)
    merge_reductions: int = 0
    boundaries: List[int] = field(default_factory=list)

    @property
    def total_reductions(self) -> int:
        return sum(self.worker_reductions) + self.merge_reductions

    def to_csv(self) -> str:
        rows = ["worker,chunk_len,reductions"]
        for i, (length, count) in enumerate(zip(self.chunk_lengths, self.worker_reductions)):
            rows.append(f"{i},{length},{count}")
        rows.append(f"merge,{len(self.chunk_lengths)},{self.merge_reductions}")
        return "\n".join(rows) + "\n"


def _empty(start: int = 1) -> PartialParse:
    return PartialParse([], [], [], None, None, [], start, 0)


def _export(stack: ReductionStack, first: str, last: str, pending: List[str],
            start: int, length: int) -> PartialParse:
    return PartialParse(stack.items(), stack.marks(), stack.positions(), first, last,
                        pending, start, length, stack.reductions)


def _feed(stack: ReductionStack, p: PartialParse) -> None:
    for item, pos in zip(p.items, p.positions):
        if isinstance(item, str):
            stack.feed_terminal(item, pos)
        else:
            stack.feed_tree(item)


# =============================================================================
# LOCAL PARSE, MERGE, FINISH
# =============================================================================

def local_parse(m: Opm, chunk: Union[str, Sequence[str]], start: int = 1) -> PartialParse:
    """
    Reduce every handle of the chunk whose opening and closing relations are
    known without its neighbours.

    Args:
        m: Conflict-free matrix.
        chunk: The chunk's terminals.
        start: 1-based position of the chunk's first terminal in the whole input.
    """
    tokens = _terminals(chunk)
    if not tokens:
        return _empty(start)
    stack = ReductionStack(m, delimited=False)
    for i, b in enumerate(tokens):
        stack.feed_terminal(b, start + i)
    pending = stack.close_forced()
    return _export(stack, tokens[0], tokens[-1], pending, start, len(tokens))


def _check_seam(m: Opm, left: PartialParse, right: PartialParse) -> None:
    b = right.first_symbol
    for a in [left.last_symbol] + left.pending:
        if m.lookup(a, b) is None:
            raise NoRelation(a, b, right.start)


def merge(m: Opm, left: PartialParse, right: PartialParse) -> PartialParse:
    """Concatenate two adjacent partial parses and reduce across their seam."""
    if right.is_empty:
        return left
    if left.is_empty:
        return right
    _check_seam(m, left, right)
    stack = ReductionStack(m, delimited=False)
    stack.restore(left.items, left.marks, left.positions)
    _feed(stack, right)
    pending = stack.close_forced() + right.pending
    merged = _export(stack, left.first_symbol, right.last_symbol, pending,
                     left.start, left.length + right.length)
    logger.debug(f"Merged chunks at {right.start}: {stack.reductions} reductions, {len(merged.items)} items left")
    return merged


def _finish(m: Opm, p: PartialParse) -> Tuple[SyntaxTree, int]:
    if p.is_empty:
        return EMPTY_TREE, 0
    if m.lookup(DELIMITER, p.first_symbol) is None:
        raise NoRelation(DELIMITER, p.first_symbol, p.start)
    end = p.start + p.length
    for a in [p.last_symbol] + p.pending:
        if m.lookup(a, DELIMITER) is None:
            raise NoRelation(a, DELIMITER, end)
    stack = ReductionStack(m)
    _feed(stack, p)
    tree = stack.close(end)
    return tree, stack.reductions


def finish(m: Opm, p: PartialParse) -> SyntaxTree:
    """Close the fully merged parse between # delimiters."""
    return _finish(m, p)[0]


# =============================================================================
# DRIVER
# =============================================================================

def split_evenly(n: int, k: int) -> List[int]:
    """Cut points giving k near-equal chunks of n terminals (fewer if n < k)."""
    k = max(1, min(k, n))
    base, extra = divmod(n, k)
    cuts, pos = [], 0
    for i in range(k - 1):
        pos += base + (1 if i < extra else 0)
        cuts.append(pos)
    return cuts


def _local_job(job: Tuple[Opm, Tuple[str, ...], int]) -> PartialParse:
    m, chunk, start = job
    return local_parse(m, chunk, start)


def parallel_parse(m: Opm, w: Union[str, Sequence[str]], k: int,
                   split_points: Optional[Sequence[int]] = None,
                   processes: Optional[int] = None) -> Tuple[SyntaxTree, WorkStats]:
    """
    Parse w in k chunks and return the tree with per-phase work counts.

    Args:
        m: Conflict-free matrix.
        w: Input terminals.
        k: Number of chunks; ignored when split_points is given.
        split_points: Explicit cut positions 0 < p < len(w).
        processes: Worker processes; 1 runs chunks in-process.
            Defaults to COPG_WORKERS.

    Returns:
        (tree, stats); merge_reductions includes the final closing pass.
    """
    if k < 1:
        raise ValueError(f"chunk count must be at least 1, got {k}")
    tokens = _terminals(w)
    n = len(tokens)
    if split_points is None:
        cuts = split_evenly(n, k)
    else:
        cuts = sorted(set(split_points))
        if any(c <= 0 or c >= n for c in cuts):
            raise ValueError(f"split points must lie strictly inside 0..{n}")
    bounds = [0] + cuts + [n]
    jobs = [(m, tokens[lo:hi], lo + 1) for lo, hi in zip(bounds, bounds[1:])]
    processes = processes or settings.DEFAULT_WORKERS

    if processes == 1 or len(jobs) == 1:
        mymap = map
        pool = None
    else:
        pool = multiprocessing.Pool(processes=processes)
        mymap = pool.imap
    try:
        parts = list(mymap(_local_job, jobs))
    finally:
        if pool is not None:
            pool.close()
            pool.join()

    stats = WorkStats(
        worker_reductions=[p.reductions for p in parts],
        chunk_lengths=[p.length for p in parts],
        boundaries=cuts,
    )
    while len(parts) > 1:
        merged = []
        for i in range(0, len(parts) - 1, 2):
            combined = merge(m, parts[i], parts[i + 1])
            stats.merge_reductions += combined.reductions
            merged.append(combined)
        if len(parts) % 2:
            merged.append(parts[-1])
        parts = merged
    if not parts:
        return EMPTY_TREE, stats
    tree, closing = _finish(m, parts[0])
    stats.merge_reductions += closing
    logger.info(f"Parallel parse of {n} terminals in {len(jobs)} chunks: "
                f"{sum(stats.worker_reductions)} worker and {stats.merge_reductions} merge reductions")
    return tree, stats
