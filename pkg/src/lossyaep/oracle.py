"""Exact ground truth for small instances.

Everything here is exhaustive and uses integer / rational arithmetic; it
exists to check the samplers and the rate solver, not to be fast.
"""
from __future__ import annotations

import csv
import io
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Mapping

import numpy as np

from .kernel_rate import RateProblem, _problem
from .measures import (Ball, ColoredGraph, ValidationError, ball_counts_key, graph_key)
from .sampler import GraphConstraint, pool_size, unrank_pair

GUARD = 10**7


class GuardError(RuntimeError):
    """Enumeration refused: the object count exceeds the guard."""

    def __init__(self, what: str, size: int, guard: int):
        super().__init__(f"{what}: {size} objects exceed the enumeration guard {guard}")
        self.size = size
        self.guard = guard


@dataclass
class ExactLaw:
    """Atoms keyed by canonical serialization, with exact rational masses."""

    atoms: dict[str, Fraction]
    objects: dict[str, object] = field(default_factory=dict, repr=False)

    def total(self) -> Fraction:
        return sum(self.atoms.values(), Fraction(0))

    def __len__(self):
        return len(self.atoms)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["key", "numerator", "denominator"])
        for k in sorted(self.atoms):
            p = self.atoms[k]
            w.writerow([k, p.numerator, p.denominator])
        return buf.getvalue()


def _multinomial(n: int, parts) -> int:
    out = math.factorial(n)
    for k in parts:
        out //= math.factorial(k)
    return out


def count_graphs(c: GraphConstraint) -> int:
    """Number of (coloring, edge set) pairs meeting the constraint."""
    total = _multinomial(c.n, c.counts)
    for i, j, k in c.pair_list():
        total *= math.comb(pool_size(c.counts[i], c.counts[j], i == j), k)
    return total


def _distinct_permutations(counts: list[int]) -> Iterator[tuple[int, ...]]:
    n = sum(counts)
    if n == 0:
        yield ()
        return
    for a, k in enumerate(counts):
        if k:
            counts[a] -= 1
            for rest in _distinct_permutations(counts):
                yield (a,) + rest
            counts[a] += 1


def _edge_sets(classes, i, j, k, diagonal):
    na, nb = len(classes[i]), len(classes[j])
    from itertools import combinations
    for combo in combinations(range(pool_size(na, nb, diagonal)), k):
        if diagonal:
            p, q = unrank_pair(np.array(combo, dtype=np.int64), na)
        else:
            p, q = np.divmod(np.array(combo, dtype=np.int64), nb)
        yield [(int(classes[i][a]), int(classes[j][b])) for a, b in zip(p, q)]


def iter_graphs(c: GraphConstraint, guard: int = GUARD) -> Iterator[ColoredGraph]:
    """Every graph meeting the constraint exactly, each once."""
    size = count_graphs(c)
    if size > guard:
        raise GuardError("conditioned graphs", size, guard)
    sym = c.alphabet.symbols
    pairs = c.pair_list()
    for coloring in _distinct_permutations(list(c.counts)):
        arr = np.array(coloring, dtype=np.int64)
        classes = [np.flatnonzero(arr == a) for a in range(c.m)]
        colors = tuple(sym[a] for a in coloring)

        def rec(idx, acc):
            if idx == len(pairs):
                yield ColoredGraph(c.alphabet, colors, frozenset(acc))
                return
            i, j, k = pairs[idx]
            for es in _edge_sets(classes, i, j, k, i == j):
                yield from rec(idx + 1, acc + es)

        yield from rec(0, [])


def enumerate_graphs(c: GraphConstraint, guard: int = GUARD) -> ExactLaw:
    """Uniform law over the admissible graphs."""
    graphs = list(iter_graphs(c, guard))
    p = Fraction(1, len(graphs))
    keys = [graph_key(g) for g in graphs]
    return ExactLaw({k: p for k in keys}, dict(zip(keys, graphs)))


def exact_match_probability(x: ColoredGraph, rho, d: float, c: GraphConstraint,
                            guard: int = GUARD) -> Fraction:
    """``P(rho_n(x, Y) <= d)`` for Y uniform over the admissible graphs."""
    if x.n != c.n:
        raise ValidationError(f"source graph has {x.n} vertices, constraint has {c.n}")
    bx = x.balls()
    hits = total = 0
    limit = Fraction(d) * x.n
    for y in iter_graphs(c, guard):
        total += 1
        dist = sum((Fraction(rho(a, b)) for a, b in zip(bx, y.balls())), Fraction(0))
        hits += dist <= limit
    return Fraction(hits, total)


def allocation_law_exact(c: GraphConstraint, guard: int = GUARD) -> ExactLaw:
    """Exact law of the occupancy measure of the allocation model.

    Steps are independent, so the sequence sum is carried out step by step
    over bin-count states, merging equal states; no sequence is skipped.
    """
    size = 1
    for i, j, k in c.pair_list():
        size *= (c.counts[i] * c.counts[j]) ** k
    if size > guard:
        raise GuardError("allocation pick sequences", size, guard)
    colors = np.repeat(np.arange(c.m), c.counts)
    classes = [np.flatnonzero(colors == a).tolist() for a in range(c.m)]
    start = tuple((0,) * c.m for _ in range(c.n))
    states: dict[tuple, Fraction] = {start: Fraction(1)}
    for i, j, k in c.pair_list():
        w = Fraction(1, c.counts[i] * c.counts[j])
        for _ in range(k):
            nxt: dict[tuple, Fraction] = {}
            for st, p in states.items():
                for v1 in classes[i]:
                    for v2 in classes[j]:
                        rows = list(st)
                        r = list(rows[v1]); r[j] += 1; rows[v1] = tuple(r)
                        r = list(rows[v2]); r[i] += 1; rows[v2] = tuple(r)
                        key = tuple(rows)
                        nxt[key] = nxt.get(key, 0) + p * w
            states = nxt
    sym = c.alphabet.symbols
    atoms: dict[str, Fraction] = {}
    objects: dict[str, dict] = {}
    for st, p in states.items():
        counts = Counter(Ball(sym[a], row) for a, row in zip(colors.tolist(), st))
        key = ball_counts_key(counts)
        atoms[key] = atoms.get(key, 0) + p
        objects[key] = {b: Fraction(k, c.n) for b, k in sorted(counts.items())}
    return ExactLaw(atoms, objects)


def _occupancy_counts(nu: Mapping[Ball, float], n: int) -> dict[Ball, int]:
    out = {}
    for b, w in nu.items():
        k = round(float(w) * n)
        if abs(float(w) * n - k) > 1e-9:
            raise ValidationError(f"n * nu({b}) = {float(w) * n} is not an integer")
        if k:
            out[b] = k
    return out


def log_tclass_probability(nu: Mapping[Ball, float], c: GraphConstraint) -> float:
    """Log of the occupancy probability, from exact integer factorials."""
    p = tclass_probability(nu, c, exact=True)
    if p == 0:
        return -math.inf
    return math.log(p.numerator) - math.log(p.denominator)


def tclass_probability(nu: Mapping[Ball, float], c: GraphConstraint, exact: bool = False):
    """Probability that the allocation model produces occupancy measure ``nu``.

    Product over colors a of the multinomial choosing which bins get which
    ball type, times, for every ordered pair (a, b), the multinomial
    distributing the ``n pi(a, b)`` b-balls over the a-bins, times
    ``(1 / n sigma(a)) ** (n pi(a, b))``.
    """
    counts = _occupancy_counts(nu, c.n)
    sym = c.alphabet.symbols
    idx = {a: i for i, a in enumerate(sym)}
    bins = [0] * c.m
    balls = [[0] * c.m for _ in range(c.m)]
    for b, k in counts.items():
        if b.color not in idx or len(b.degrees) != c.m:
            return Fraction(0) if exact else 0.0
        a = idx[b.color]
        bins[a] += k
        for j, l in enumerate(b.degrees):
            balls[a][j] += k * l
    npi = [[c.edges[a][b] * (2 if a == b else 1) for b in range(c.m)] for a in range(c.m)]
    if bins != list(c.counts) or balls != npi:
        return Fraction(0) if exact else 0.0
    num = 1
    den = 1
    for a in range(c.m):
        by_color = [k for b, k in counts.items() if idx[b.color] == a]
        num *= _multinomial(c.counts[a], by_color)
        for j in range(c.m):
            if npi[a][j] == 0:
                continue
            num *= math.factorial(npi[a][j])
            for b, k in counts.items():
                if idx[b.color] == a:
                    den *= math.factorial(b.degrees[j]) ** k
            den *= c.counts[a] ** npi[a][j]
    p = Fraction(num, den)
    if exact:
        return p
    return math.exp(math.log(num) - math.log(den))


def rate_bruteforce(K, rho, d: float, t_grid) -> float:
    """Primal upper estimate of R(d): smallest ``H(nu_t || K x K)`` over grid tilts with mean distortion <= d.

    The relative entropy is summed directly from the coupling's atoms.
    """
    P: RateProblem = _problem(K, rho)
    if d >= P.d_av:
        return 0.0
    best = math.inf
    logp = P.logp
    ref = logp[:, None] + logp[None, :]
    grid = np.asarray(t_grid, dtype=float)
    N = len(logp)
    chunk = max(1, 2_000_000 // (N * N))
    for lo in range(0, len(grid), chunk):
        t = grid[lo:lo + chunk, None, None]
        A = logp[None, None, :] + t * P.D[None]
        logZ = np.logaddexp.reduce(A, axis=2)
        logM = logp[None, :, None] + A - logZ[:, :, None]
        M = np.exp(logM)
        mean = (M * P.D[None]).sum(axis=(1, 2))
        H = (M * (logM - ref[None])).sum(axis=(1, 2))
        ok = mean <= d
        if ok.any():
            best = min(best, float(H[ok].min()))
    return max(best, 0.0)
