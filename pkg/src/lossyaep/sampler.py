"""Colored random graphs conditioned on exact color and pair counts.

Also the balls-in-bins allocation model and the step-by-step coupling
between the two, with its mismatch counters.

Randomness comes from counter-based Philox streams seeded with explicit
64-bit integers.  Draw order: vertex colors first, then color pairs
``{a, b}`` in alphabet order, then the steps of each pair.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .measures import Alphabet, Ball, ColoredGraph, ValidationError

_TOL = 1e-9


def make_rng(seed) -> np.random.Generator:
    """Philox generator from an int / SeedSequence; Generators pass through."""
    if isinstance(seed, np.random.Generator):
        return seed
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(int(seed))
    return np.random.Generator(np.random.Philox(seed))


def pool_size(na: int, nb: int, diagonal: bool) -> int:
    return math.comb(na, 2) if diagonal else na * nb


@dataclass(frozen=True)
class GraphConstraint:
    """Exact color counts ``n sigma(a)`` and edge counts ``m(a, b)``.

    ``edges[i][j]`` is the number of edges between colors i and j (symmetric;
    the diagonal counts edges inside a color class).
    """

    alphabet: Alphabet
    counts: tuple[int, ...]
    edges: tuple[tuple[int, ...], ...]

    @property
    def n(self) -> int:
        return sum(self.counts)

    @property
    def m(self) -> int:
        return len(self.alphabet)

    @property
    def sigma(self) -> dict[str, Fraction]:
        return {a: Fraction(c, self.n) for a, c in zip(self.alphabet, self.counts)}

    @property
    def pi(self) -> dict[tuple[str, str], Fraction]:
        s = self.alphabet.symbols
        return {(s[i], s[j]): Fraction(self.edges[i][j] * (2 if i == j else 1), self.n)
                for i in range(self.m) for j in range(self.m)}

    def pair_list(self):
        """``(i, j, m_ij)`` for i <= j with at least one edge, in alphabet order."""
        return [(i, j, self.edges[i][j]) for i in range(self.m) for j in range(i, self.m)
                if self.edges[i][j] > 0]

    @property
    def color_multiset(self) -> np.ndarray:
        return np.repeat(np.arange(self.m), self.counts)


def _as_vector(sigma, alphabet: Alphabet) -> list[float]:
    if isinstance(sigma, Mapping):
        extra = set(sigma) - set(alphabet)
        if extra:
            raise ValidationError(f"sigma has colors outside the alphabet: {sorted(extra)}")
        return [sigma.get(a, 0) for a in alphabet]
    sigma = list(sigma)
    if len(sigma) != len(alphabet):
        raise ValidationError(f"sigma has {len(sigma)} entries for {len(alphabet)} colors")
    return sigma


def _as_matrix(pi, alphabet: Alphabet) -> list[list[float]]:
    m = len(alphabet)
    if isinstance(pi, Mapping):
        mat = [[0] * m for _ in range(m)]
        for (a, b), w in pi.items():
            mat[alphabet.index(a)][alphabet.index(b)] = w
        return mat
    mat = [list(r) for r in pi]
    if len(mat) != m or any(len(r) != m for r in mat):
        raise ValidationError(f"pi must be a {m}x{m} matrix")
    return mat


def _integral(x, what: str) -> int:
    k = round(float(x))
    if abs(float(x) - k) > _TOL or k < 0:
        raise ValidationError(f"{what} = {float(x)!r} is not a nonnegative integer")
    return k


def validate_constraint(n: int, sigma, pi, alphabet: Alphabet | Sequence[str]) -> GraphConstraint:
    """Check integrality and capacity of ``(n, sigma, pi)`` and return exact counts."""
    if not isinstance(alphabet, Alphabet):
        alphabet = Alphabet(tuple(alphabet))
    if n < 1:
        raise ValidationError("n must be at least 1")
    sig = _as_vector(sigma, alphabet)
    mat = _as_matrix(pi, alphabet)
    sym = alphabet.symbols
    if abs(sum(float(s) for s in sig) - 1) > _TOL:
        raise ValidationError(f"sigma sums to {sum(float(s) for s in sig)}, not 1")
    counts = [_integral(n * s, f"n*sigma({sym[i]})") for i, s in enumerate(sig)]
    m = len(alphabet)
    edges = [[0] * m for _ in range(m)]
    for i in range(m):
        for j in range(i, m):
            if abs(float(mat[i][j]) - float(mat[j][i])) > _TOL:
                raise ValidationError(f"pi not symmetric at ({sym[i]}, {sym[j]})")
            k = _integral(n * mat[i][j] / (2 if i == j else 1), f"m({sym[i]}, {sym[j]})")
            cap = pool_size(counts[i], counts[j], i == j)
            if k > cap:
                raise ValidationError(f"m({sym[i]}, {sym[j]}) = {k} exceeds capacity {cap}")
            edges[i][j] = edges[j][i] = k
    return GraphConstraint(alphabet, tuple(counts), tuple(tuple(r) for r in edges))


def constraint_of(g: ColoredGraph) -> GraphConstraint:
    """The constraint a graph satisfies exactly."""
    m = len(g.alphabet)
    counts = np.bincount(g.color_index, minlength=m)
    edges = np.zeros((m, m), dtype=int)
    ci = g.color_index
    for u, v in g.edges:
        a, b = sorted((ci[u], ci[v]))
        edges[a, b] += 1
        if a != b:
            edges[b, a] += 1
    return GraphConstraint(g.alphabet, tuple(int(c) for c in counts),
                           tuple(tuple(int(x) for x in r) for r in edges))


def unrank_pair(idx, k: int):
    """Map ranks ``0..C(k,2)-1`` to pairs ``(i, j)``, ``i < j``, in row-major order."""
    idx = np.asarray(idx, dtype=np.int64)
    # i is the largest row whose start offset is <= idx
    starts = np.cumsum(np.r_[0, np.arange(k - 1, 0, -1)])
    i = np.searchsorted(starts, idx, side="right") - 1
    j = idx - starts[i] + i + 1
    return i, j


def _color_classes(colors: np.ndarray, m: int) -> list[np.ndarray]:
    return [np.flatnonzero(colors == a) for a in range(m)]


def _pair_endpoints(idx, na: int, nb: int, diagonal: bool):
    if diagonal:
        return unrank_pair(idx, na)
    idx = np.asarray(idx, dtype=np.int64)
    return idx // nb, idx % nb


def sample_colors(c: GraphConstraint, rng: np.random.Generator) -> np.ndarray:
    return rng.permutation(c.color_multiset)


def sample_graph(c: GraphConstraint, seed) -> ColoredGraph:
    """Uniform draw from the graphs meeting the constraint exactly."""
    rng = make_rng(seed)
    colors = sample_colors(c, rng)
    classes = _color_classes(colors, c.m)
    edges = []
    for i, j, k in c.pair_list():
        na, nb = c.counts[i], c.counts[j]
        idx = rng.choice(pool_size(na, nb, i == j), size=k, replace=False)
        p, q = _pair_endpoints(idx, na, nb, i == j)
        edges += zip(classes[i][p].tolist(), classes[j][q].tolist())
    sym = c.alphabet.symbols
    return ColoredGraph(c.alphabet, tuple(sym[a] for a in colors), frozenset(edges))


@dataclass(frozen=True)
class BallBatch:
    """Balls of a batch of graphs: ``colors (B, n)`` and ``degrees (B, n, m)``."""

    colors: np.ndarray
    degrees: np.ndarray

    def __len__(self):
        return self.colors.shape[0]


def _batch_subsets(rng: np.random.Generator, size: int, pool: int, k: int) -> np.ndarray:
    """``(size, k)`` rows, each a uniform k-subset of ``range(pool)``."""
    if k == pool:
        return np.broadcast_to(np.arange(pool), (size, k))
    if k * k < pool:
        # iid draws conditioned on being distinct: uniform over k-subsets
        out = rng.integers(pool, size=(size, k))
        bad = np.arange(size)
        while True:
            srt = np.sort(out[bad], axis=1)
            dup = np.any(srt[:, 1:] == srt[:, :-1], axis=1)
            bad = bad[dup]
            if bad.size == 0:
                return out
            out[bad] = rng.integers(pool, size=(bad.size, k))
    keys = rng.random((size, pool))
    return np.argpartition(keys, k - 1, axis=1)[:, :k]


def iter_ball_batches(c: GraphConstraint, size: int, seed, chunk: int = 20000):
    """Yield :class:`BallBatch` chunks of ``size`` independent uniform graphs in total.

    Same conditional law as :func:`sample_graph`, different random stream.
    """
    rng = make_rng(seed)
    n, m = c.n, c.m
    offsets = np.r_[0, np.cumsum(c.counts)]
    base = c.color_multiset
    for lo in range(0, size, chunk):
        B = min(chunk, size - lo)
        colors = rng.permuted(np.broadcast_to(base, (B, n)), axis=1)
        order = np.argsort(colors, axis=1, kind="stable")
        flat = []
        rows = np.arange(B)[:, None]
        for i, j, k in c.pair_list():
            na, nb = c.counts[i], c.counts[j]
            sel = _batch_subsets(rng, B, pool_size(na, nb, i == j), k)
            p, q = _pair_endpoints(sel, na, nb, i == j)
            vp = order[:, offsets[i]:offsets[i] + na][rows, p]
            vq = order[:, offsets[j]:offsets[j] + nb][rows, q]
            flat.append(((rows * n + vp) * m + j).ravel())
            flat.append(((rows * n + vq) * m + i).ravel())
        if flat:
            deg = np.bincount(np.concatenate(flat), minlength=B * n * m).reshape(B, n, m)
        else:
            deg = np.zeros((B, n, m), dtype=np.int64)
        yield BallBatch(colors.astype(np.int8), deg.astype(np.int16))


def sample_ball_batch(c: GraphConstraint, size: int, seed, chunk: int = 20000) -> BallBatch:
    parts = list(iter_ball_batches(c, size, seed, chunk))
    return BallBatch(np.concatenate([b.colors for b in parts]),
                     np.concatenate([b.degrees for b in parts]))


@dataclass(frozen=True)
class AllocationState:
    """Bin colors plus per-bin ball counts ``counts[v, b]``."""

    alphabet: Alphabet
    colors: tuple[str, ...]
    counts: np.ndarray

    @property
    def n(self) -> int:
        return len(self.colors)

    def balls(self) -> list[Ball]:
        return [Ball(c, tuple(int(x) for x in row)) for c, row in zip(self.colors, self.counts)]

    def occupancy_measure(self) -> dict[Ball, Fraction]:
        out: dict[Ball, Fraction] = {}
        for b in self.balls():
            out[b] = out.get(b, 0) + Fraction(1, self.n)
        return dict(sorted(out.items()))


def _draw_picks(c: GraphConstraint, rng, classes):
    """Per-pair arrays of independent uniform picks ``V1 in V(a)``, ``V2 in V(b)``."""
    picks = []
    for i, j, k in c.pair_list():
        v1 = classes[i][rng.integers(c.counts[i], size=k)]
        v2 = classes[j][rng.integers(c.counts[j], size=k)]
        picks.append((i, j, v1, v2))
    return picks


def _deposit(c: GraphConstraint, picks) -> np.ndarray:
    counts = np.zeros((c.n, c.m), dtype=np.int64)
    for i, j, v1, v2 in picks:
        np.add.at(counts, (v1, j), 1)
        np.add.at(counts, (v2, i), 1)
    return counts


def sample_allocation(c: GraphConstraint, seed) -> AllocationState:
    """Balls-in-bins model: each step drops a b-ball in V1 and an a-ball in V2."""
    rng = make_rng(seed)
    colors = sample_colors(c, rng)
    picks = _draw_picks(c, rng, _color_classes(colors, c.m))
    sym = c.alphabet.symbols
    return AllocationState(c.alphabet, tuple(sym[a] for a in colors), _deposit(c, picks))


@dataclass(frozen=True)
class CouplingReport:
    graph: ColoredGraph
    allocation: AllocationState
    mismatches: dict[tuple[str, str], int]
    tv: float

    @property
    def total_mismatches(self) -> int:
        return sum(self.mismatches.values())

    def rows(self):
        """Flat records ``(n, a, b, B, tv)``, one per color pair."""
        return [(self.graph.n, a, b, k, self.tv) for (a, b), k in self.mismatches.items()]


def _redraw(rng, present: set, va: np.ndarray, vb: np.ndarray, diagonal: bool):
    """Uniform edge from the pool between ``va`` and ``vb`` that is not yet present."""
    na, nb = len(va), len(vb)
    size = pool_size(na, nb, diagonal)
    if 2 * len(present) < size:
        while True:
            p, q = _pair_endpoints(rng.integers(size), na, nb, diagonal)
            e = tuple(sorted((int(va[p]), int(vb[q]))))
            if e not in present:
                return e
    free = []
    for r in range(size):
        p, q = _pair_endpoints(r, na, nb, diagonal)
        e = tuple(sorted((int(va[p]), int(vb[q]))))
        if e not in present:
            free.append(e)
    return free[rng.integers(len(free))]


def sample_coupled(c: GraphConstraint, seed) -> CouplingReport:
    """Run the allocation and the graph construction on the same picks.

    A pick that is a self-pair or an existing edge is replaced by a uniform
    fresh edge of the same color pair and counted as a mismatch.  With the
    same seed, the allocation equals :func:`sample_allocation`'s.
    """
    ss = np.random.SeedSequence(int(seed)) if not isinstance(seed, np.random.SeedSequence) else seed
    rng = make_rng(ss)
    colors = sample_colors(c, rng)
    classes = _color_classes(colors, c.m)
    picks = _draw_picks(c, rng, classes)
    redraw_rng = make_rng(ss.spawn(1)[0])
    sym = c.alphabet.symbols
    edges: set = set()
    mismatches = {}
    for i, j, v1, v2 in picks:
        present: set = set()
        bad = 0
        for p, q in zip(v1.tolist(), v2.tolist()):
            e = (min(p, q), max(p, q))
            if p == q or e in present:
                e = _redraw(redraw_rng, present, classes[i], classes[j], i == j)
                bad += 1
            present.add(e)
        edges |= present
        mismatches[sym[i], sym[j]] = bad
    alloc = AllocationState(c.alphabet, tuple(sym[a] for a in colors), _deposit(c, picks))
    g = ColoredGraph(c.alphabet, alloc.colors, frozenset(edges))
    return CouplingReport(g, alloc, mismatches, _count_tv(g.color_index, g.degree_matrix, colors, alloc.counts))


def _count_tv(ca, da, cb, db) -> float:
    """Total variation between the empirical ball laws of two equal-size vertex sets."""
    diff = Counter(zip(ca.tolist(), map(tuple, da.tolist())))
    diff.subtract(zip(cb.tolist(), map(tuple, db.tolist())))
    return sum(abs(v) for v in diff.values()) / (2 * len(ca))


def mismatch_prob(k: int, m: int, diagonal: bool) -> float:
    """Per-step redraw probability ``1{diag}/m + (1 - 1{diag}/m)(k-1)/m^2``."""
    if not 1 <= k <= m:
        raise ValidationError(f"step k={k} outside 1..{m}")
    s = (1.0 / m) if diagonal else 0.0
    return s + (1 - s) * (k - 1) / m**2


def bennett_e(t: float) -> float:
    if t < 0:
        raise ValidationError("bennett_e needs t >= 0")
    return (1 + t) * math.log1p(t) - t


def bennett_tail(m: int, var_rate: float, delta: float, n: int) -> float:
    """Bennett bound ``exp(-m v e(n delta / (m v)))`` on ``P(S - ES >= n delta)``.

    ``S`` is a sum of ``m`` independent [0, 1]-valued variables with average
    variance ``v = var_rate``.
    """
    if m < 1 or var_rate <= 0 or delta <= 0 or n < 1:
        raise ValidationError("bennett_tail needs m >= 1, var_rate > 0, delta > 0, n >= 1")
    v = m * var_rate
    return math.exp(-v * bennett_e(n * delta / v))
