"""Parallel filter-and-refine spatial joins over triangulated polyhedra.

Thin wrapper over the compiled ``_core`` module: joins return parsed stage
statistics instead of a JSON string, everything else passes through.
"""

import json

from trijoin import _core
from trijoin._core import generate, parse_off, preprocess, write_off

__all__ = [
    "generate",
    "preprocess",
    "join",
    "oracle",
    "parse_off",
    "write_off",
]


def join(r, s="", **kwargs):
    """Run a join between two index files (self-join when ``s`` is empty).

    Returns ``{"records": [(r, s, lb, ub, stage, rank), ...], "stats": dict}``.
    Keyword arguments mirror the CLI flags: type ("within" | "intersect" |
    "knn"), tau, k, filter_chunk, refine_chunk, lods, pipeline, workers,
    seed, exact.
    """
    records, stats = _core.join(r, s, **kwargs)
    return {"records": records, "stats": json.loads(stats)}


def oracle(r, s="", **kwargs):
    """Exact reference join over the original-resolution geometry.

    Same result shape as :func:`join`; accepts type, tau, k, workers, seed.
    """
    records, stats = _core.oracle(r, s, **kwargs)
    return {"records": records, "stats": json.loads(stats)}
