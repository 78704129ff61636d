"""Substrate/product interaction networks and their zero-rate threshold."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

from .measures import Alphabet, ColoredGraph, ValidationError, color_measure, pair_measure

log = logging.getLogger(__name__)

SUBSTRATE, PRODUCT = "substrate", "product"
METABOLIC_ALPHABET = Alphabet((SUBSTRATE, PRODUCT))


def metabolic_threshold(pi) -> tuple[float, float]:
    """Zero-rate distortion thresholds ``(T, T_variant)``.

    ``T = 2 pi(s, p) + pi(s, s) + pi(p, p) + 2 pi(s, p)`` keeps the
    cross term twice, as published; ``T_variant`` counts it once.
    """
    keys = {(SUBSTRATE, PRODUCT), (SUBSTRATE, SUBSTRATE), (PRODUCT, PRODUCT)}
    colors = {a for k in pi for a in k}
    if not colors <= set(METABOLIC_ALPHABET) or not keys <= set(pi):
        raise ValidationError(f"pi must be indexed by {METABOLIC_ALPHABET.symbols}")
    sp = float(pi[SUBSTRATE, PRODUCT])
    ss = float(pi[SUBSTRATE, SUBSTRATE])
    pp = float(pi[PRODUCT, PRODUCT])
    variant = 2 * sp + ss + pp
    return variant + 2 * sp, variant


def verdict(D: float, threshold: float) -> float:
    return 0.0 if D >= threshold else math.inf


@dataclass
class IngestResult:
    graph: ColoredGraph
    sigma: dict
    pi: dict
    ids: list[str]
    dropped_self_loops: int = 0
    dropped_duplicates: int = 0


def _rows(path: Path, header: tuple[str, ...]):
    with Path(path).open(newline="") as fh:
        rows = [(i, [c.strip() for c in r]) for i, r in enumerate(csv.reader(fh), start=1)
                if r and any(c.strip() for c in r)]
    if not rows:
        raise ValidationError(f"{path}: file is empty")
    if tuple(c.lower() for c in rows[0][1]) == header:
        rows = rows[1:]
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    return rows


def ingest_network(nodes_file, edges_file) -> IngestResult:
    """Read ``id,type`` nodes and ``u,v`` edges into a colored graph.

    Self-loops and repeated edges are dropped and counted.
    """
    index: dict[str, int] = {}
    colors = []
    for line, row in _rows(nodes_file, ("id", "type")):
        if len(row) != 2:
            raise ValidationError(f"{nodes_file}:{line}: expected 'id,type'")
        nid, kind = row
        if kind not in METABOLIC_ALPHABET.symbols:
            raise ValidationError(f"{nodes_file}:{line}: unknown node type {kind!r}")
        if nid in index:
            raise ValidationError(f"{nodes_file}:{line}: duplicate node id {nid!r}")
        index[nid] = len(colors)
        colors.append(kind)
    edges = set()
    loops = dups = 0
    for line, row in _rows(edges_file, ("u", "v")):
        if len(row) != 2:
            raise ValidationError(f"{edges_file}:{line}: expected 'u,v'")
        for nid in row:
            if nid not in index:
                raise ValidationError(f"{edges_file}:{line}: unknown node id {nid!r}")
        u, v = index[row[0]], index[row[1]]
        if u == v:
            loops += 1
            continue
        e = (min(u, v), max(u, v))
        if e in edges:
            dups += 1
            continue
        edges.add(e)
    if loops or dups:
        log.warning("dropped %d self-loops and %d duplicate edges", loops, dups)
    g = ColoredGraph(METABOLIC_ALPHABET, tuple(colors), frozenset(edges))
    return IngestResult(g, color_measure(g), pair_measure(g), list(index), loops, dups)


@dataclass
class MetabolicReport:
    sigma: dict
    pi: dict
    threshold: float
    threshold_variant: float
    verdicts: list[dict] = field(default_factory=list)
    rate_curve: list[dict] = field(default_factory=list)
    n: int = 0
    edges: int = 0
    dropped_self_loops: int = 0
    dropped_duplicates: int = 0

    def to_dict(self) -> dict:
        def fmt(x):
            return "inf" if isinstance(x, float) and math.isinf(x) else x
        return {
            "n": self.n,
            "edges": self.edges,
            "dropped_self_loops": self.dropped_self_loops,
            "dropped_duplicates": self.dropped_duplicates,
            "sigma": {k: float(v) for k, v in self.sigma.items()},
            "pi": {f"{a},{b}": float(v) for (a, b), v in self.pi.items()},
            "threshold": self.threshold,
            "threshold_variant": self.threshold_variant,
            "verdicts": [{k: fmt(v) for k, v in row.items()} for row in self.verdicts],
            "rate_curve": [{k: fmt(v) for k, v in row.items()} for row in self.rate_curve],
        }


def metabolic_report(ingested: IngestResult, queries=(), rate_curve=()) -> MetabolicReport:
    T, T_var = metabolic_threshold(ingested.pi)
    rows = [{"D": float(D), "R": verdict(D, T), "R_variant": verdict(D, T_var)} for D in queries]
    g = ingested.graph
    return MetabolicReport(ingested.sigma, ingested.pi, T, T_var, rows, list(rate_curve),
                           g.n, len(g.edges), ingested.dropped_self_loops, ingested.dropped_duplicates)
