"""Colored graphs, balls and their empirical measures.

Measures are plain dicts mapping atoms to masses.  Empirical measures built
from graphs carry exact :class:`fractions.Fraction` masses so that identities
between them hold exactly; everything else uses floats.
"""
from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np

log = logging.getLogger(__name__)

Measure = Mapping[Hashable, float]


class ValidationError(ValueError):
    """Input violates a documented precondition."""


class TruncationError(ValueError):
    """A measure has mass outside the truncated ball box."""


@dataclass(frozen=True)
class Alphabet:
    symbols: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(str(s) for s in self.symbols))
        if not self.symbols:
            raise ValidationError("alphabet must contain at least one color")
        if len(set(self.symbols)) != len(self.symbols):
            raise ValidationError(f"alphabet symbols not distinct: {self.symbols}")

    def __len__(self):
        return len(self.symbols)

    def __iter__(self):
        return iter(self.symbols)

    def index(self, color: str) -> int:
        try:
            return self._index[color]
        except KeyError:
            raise ValidationError(f"color {color!r} not in alphabet {self.symbols}") from None

    @cached_property
    def _index(self) -> dict[str, int]:
        return {s: i for i, s in enumerate(self.symbols)}

    def pairs(self):
        """Unordered color pairs (a, b), a <= b in alphabet order."""
        m = len(self.symbols)
        return [(self.symbols[i], self.symbols[j]) for i in range(m) for j in range(i, m)]


@dataclass(frozen=True, order=True)
class Ball:
    """A vertex color together with its neighbor-color counts.

    ``degrees[i]`` counts neighbors of color ``alphabet.symbols[i]``.
    """

    color: str
    degrees: tuple[int, ...]

    @property
    def total_degree(self) -> int:
        return sum(self.degrees)

    def __str__(self):
        return f"{self.color}[{','.join(map(str, self.degrees))}]"


@dataclass(frozen=True)
class ColoredGraph:
    """Simple undirected graph on vertices ``0..n-1`` with colored vertices."""

    alphabet: Alphabet
    colors: tuple[str, ...]
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "colors", tuple(self.colors))
        n = len(self.colors)
        for c in self.colors:
            self.alphabet.index(c)
        normed = set()
        for e in self.edges:
            u, v = (int(x) for x in e)
            if u == v:
                raise ValidationError(f"self-loop at vertex {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise ValidationError(f"edge ({u}, {v}) has endpoint outside 0..{n - 1}")
            key = (min(u, v), max(u, v))
            if key in normed:
                raise ValidationError(f"duplicate edge {key}")
            normed.add(key)
        object.__setattr__(self, "edges", frozenset(normed))

    @property
    def n(self) -> int:
        return len(self.colors)

    @cached_property
    def color_index(self) -> np.ndarray:
        return np.array([self.alphabet.index(c) for c in self.colors], dtype=np.int64)

    @cached_property
    def degree_matrix(self) -> np.ndarray:
        """``(n, m)`` array of neighbor-color counts."""
        deg = np.zeros((self.n, len(self.alphabet)), dtype=np.int64)
        ci = self.color_index
        for u, v in self.edges:
            deg[u, ci[v]] += 1
            deg[v, ci[u]] += 1
        return deg

    def balls(self, cap: int | None = None) -> list[Ball]:
        return [ball_of(self, v, cap) for v in range(self.n)]


def ball_of(g: ColoredGraph, v: int, cap: int | None = None) -> Ball:
    """Ball of vertex ``v``; counts above ``cap`` are clamped and logged."""
    if not 0 <= v < g.n:
        raise ValidationError(f"vertex {v} out of range 0..{g.n - 1}")
    deg = [int(x) for x in g.degree_matrix[v]]
    if cap is not None and max(deg, default=0) > cap:
        log.warning("truncation: vertex %d has neighbor counts %s above cap %d", v, deg, cap)
        deg = [min(x, cap) for x in deg]
    return Ball(g.colors[v], tuple(deg))


def color_measure(g: ColoredGraph) -> dict[str, Fraction]:
    if g.n == 0:
        raise ValidationError("color measure of an empty graph")
    counts = Counter(g.colors)
    return {a: Fraction(counts.get(a, 0), g.n) for a in g.alphabet}


def pair_measure(g: ColoredGraph) -> dict[tuple[str, str], Fraction]:
    """Edge-end counts per color pair divided by n; diagonal a-a edges count twice."""
    counts: Counter = Counter()
    for u, v in g.edges:
        a, b = g.colors[u], g.colors[v]
        counts[a, b] += 1
        counts[b, a] += 1
    n = max(g.n, 1)
    return {(a, b): Fraction(counts.get((a, b), 0), n) for a in g.alphabet for b in g.alphabet}


def ball_measure(g: ColoredGraph, cap: int | None = None) -> dict[Ball, Fraction]:
    counts = Counter(g.balls(cap))
    return {b: Fraction(c, g.n) for b, c in sorted(counts.items())}


def joint_ball_measure(x: ColoredGraph, y: ColoredGraph) -> dict[tuple[Ball, Ball], Fraction]:
    if x.n != y.n:
        raise ValidationError(f"graph sizes differ: {x.n} != {y.n}")
    counts = Counter(zip(x.balls(), y.balls()))
    return {k: Fraction(c, x.n) for k, c in sorted(counts.items())}


def marginal(nu: Mapping[tuple, float], i: int) -> dict:
    out: dict = {}
    for key, w in nu.items():
        out[key[i]] = out.get(key[i], 0) + w
    return out


def phi_statistics(L: Mapping[Ball, float], alphabet: Alphabet):
    """Color and pair statistics ``(sigma, pi)`` of a ball measure."""
    sigma = {a: 0 for a in alphabet}
    pi = {(a, b): 0 for a in alphabet for b in alphabet}
    for ball, w in L.items():
        sigma[ball.color] += w
        for j, b in enumerate(alphabet.symbols):
            if ball.degrees[j]:
                pi[ball.color, b] += ball.degrees[j] * w
    return sigma, pi


def reshuffle(nu: Mapping[tuple[Ball, Ball], float]) -> dict:
    """Regroup ``((a_x, l_x), (a_y, l_y))`` atoms as ``((a_x, a_y), (l_x, l_y))``."""
    out = {}
    for (bx, by), w in nu.items():
        out[(bx.color, by.color), (bx.degrees, by.degrees)] = w
    return out


def unshuffle(omega: Mapping[tuple, float]) -> dict[tuple[Ball, Ball], float]:
    out = {}
    for ((ax, ay), (lx, ly)), w in omega.items():
        out[Ball(ax, tuple(lx)), Ball(ay, tuple(ly))] = w
    return out


def _check_masses(*measures):
    for mu in measures:
        for k, w in mu.items():
            if w < 0:
                raise ValidationError(f"negative mass {w} at atom {k!r}")


def relative_entropy(nu: Measure, mu: Measure) -> float:
    """``sum nu log(nu / mu)`` in nats, with ``0 log 0 = 0`` and ``+inf`` off the support of mu."""
    _check_masses(nu, mu)
    terms = []
    for k, p in nu.items():
        if p == 0:
            continue
        q = mu.get(k, 0)
        if q == 0:
            return math.inf
        p = float(p)
        terms.append(p * (math.log(p) - math.log(float(q))))
    return max(math.fsum(terms), 0.0)


def total_variation(nu: Measure, mu: Measure) -> float:
    keys = set(nu) | set(mu)
    return 0.5 * math.fsum(abs(float(nu.get(k, 0)) - float(mu.get(k, 0))) for k in keys)


@dataclass(frozen=True)
class ConsistencyReport:
    consistent: bool
    worst_asymmetry: float
    worst_at: tuple | None = None

    def __bool__(self):
        return self.consistent


def color_flows(L: Mapping[Ball, float], alphabet: Alphabet) -> np.ndarray:
    """``flow[a, b] = sum_l l(b) L(a, l)`` as an ``(m, m)`` float array."""
    flow = np.zeros((len(alphabet), len(alphabet)))
    for ball, w in L.items():
        flow[alphabet.index(ball.color)] += float(w) * np.asarray(ball.degrees, dtype=float)
    return flow


def is_consistent(nu: Mapping[tuple[Ball, Ball], float], alphabet: Alphabet, tol: float = 1e-12) -> ConsistencyReport:
    """Both coordinate ball marginals must induce symmetric color-pair flows."""
    worst, where = 0.0, None
    for i in (0, 1):
        flow = color_flows(marginal(nu, i), alphabet)
        asym = np.abs(flow - flow.T)
        k = np.unravel_index(np.argmax(asym), asym.shape)
        if asym[k] > worst:
            worst = float(asym[k])
            where = (i, alphabet.symbols[k[0]], alphabet.symbols[k[1]])
    return ConsistencyReport(worst <= tol, worst, where)


_KINDS = ("ball_hamming", "color_hamming", "squared_degree_diff", "table")


@dataclass(frozen=True)
class DistortionFn:
    """Single-letter distortion between two balls.

    ``table`` maps ``(Ball, Ball)`` pairs to values; pairs missing from the
    table take ``default`` (an error when ``default`` is None).
    """

    kind: str = "ball_hamming"
    table: Mapping[tuple[Ball, Ball], float] | None = None
    default: float | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValidationError(f"unknown distortion kind {self.kind!r}; expected one of {_KINDS}")
        if self.kind == "table":
            if self.table is None:
                raise ValidationError("table distortion needs a table")
            bad = [v for v in self.table.values() if not (v >= 0 and math.isfinite(v))]
            if bad or (self.default is not None and not (self.default >= 0 and math.isfinite(self.default))):
                raise ValidationError("table distortion values must be finite and nonnegative")

    def __call__(self, bx: Ball, by: Ball) -> float:
        if self.kind == "ball_hamming":
            return float(bx != by)
        if self.kind == "color_hamming":
            return float(bx.color != by.color)
        if self.kind == "squared_degree_diff":
            return float((bx.total_degree - by.total_degree) ** 2)
        try:
            return float(self.table[bx, by])
        except KeyError:
            if self.default is None:
                raise ValidationError(f"distortion table has no entry for ({bx}, {by})") from None
            return float(self.default)

    def pairwise(self, cx, dx, cy, dy, alphabet: Alphabet | None = None) -> np.ndarray:
        """Vectorized distortion on broadcastable arrays of color indices and degree vectors.

        ``dx``/``dy`` carry the degree axis last.  ``alphabet`` is only needed
        for table lookups.
        """
        cx, cy = np.asarray(cx), np.asarray(cy)
        dx, dy = np.asarray(dx), np.asarray(dy)
        if self.kind == "ball_hamming":
            return ((cx != cy) | np.any(dx != dy, axis=-1)).astype(float)
        if self.kind == "color_hamming":
            return (cx != cy).astype(float)
        if self.kind == "squared_degree_diff":
            return ((dx.sum(-1) - dy.sum(-1)) ** 2).astype(float)
        if alphabet is None:
            raise ValidationError("table distortion needs the alphabet for vectorized evaluation")
        cx, cy = np.broadcast_arrays(cx, cy)
        shape = cx.shape
        dx = np.broadcast_to(dx, shape + dx.shape[-1:])
        dy = np.broadcast_to(dy, shape + dy.shape[-1:])
        out = np.empty(shape)
        sym = alphabet.symbols
        for idx in np.ndindex(*shape):
            out[idx] = self(Ball(sym[cx[idx]], tuple(int(v) for v in dx[idx])),
                            Ball(sym[cy[idx]], tuple(int(v) for v in dy[idx])))
        return out

    def to_dict(self) -> dict:
        d: dict = {"kind": self.kind}
        if self.kind == "table":
            d["table"] = [
                {"x": [bx.color, list(bx.degrees)], "y": [by.color, list(by.degrees)], "value": v}
                for (bx, by), v in self.table.items()
            ]
            if self.default is not None:
                d["default"] = self.default
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> DistortionFn:
        extra = set(d) - {"kind", "table", "default"}
        if extra:
            raise ValidationError(f"unknown distortion keys: {sorted(extra)}")
        kind = d.get("kind", "ball_hamming")
        table = None
        if kind == "table":
            table = {}
            for row in d.get("table", []):
                bx = Ball(row["x"][0], tuple(row["x"][1]))
                by = Ball(row["y"][0], tuple(row["y"][1]))
                table[bx, by] = float(row["value"])
        return cls(kind, table, d.get("default"))


def distortion(x: ColoredGraph, y: ColoredGraph, rho: DistortionFn) -> float:
    """Average single-letter distortion between corresponding vertex balls."""
    if x.n != y.n:
        raise ValidationError(f"graph sizes differ: {x.n} != {y.n}")
    return math.fsum(rho(bx, by) for bx, by in zip(x.balls(), y.balls())) / x.n


def expectation(f, nu: Mapping[tuple[Ball, Ball], float]) -> float:
    return math.fsum(float(w) * f(bx, by) for (bx, by), w in nu.items())


# graph text format: "n m", then n lines "v color", then m lines "u v"

def write_graph(g: ColoredGraph) -> str:
    lines = [f"{g.n} {len(g.edges)}"]
    lines += [f"{v} {c}" for v, c in enumerate(g.colors)]
    lines += [f"{u} {v}" for u, v in sorted(g.edges)]
    return "\n".join(lines) + "\n"


def read_graph(text: str, alphabet: Alphabet | Sequence[str] | None = None) -> ColoredGraph:
    rows = [ln.split() for ln in text.splitlines() if ln.strip()]
    if not rows or len(rows[0]) != 2:
        raise ValidationError("graph file must start with a 'n m' header")
    n, m = int(rows[0][0]), int(rows[0][1])
    if len(rows) != 1 + n + m:
        raise ValidationError(f"expected {1 + n + m} non-empty lines, found {len(rows)}")
    colors: list[str | None] = [None] * n
    for row in rows[1:1 + n]:
        v = int(row[0])
        if not 0 <= v < n or colors[v] is not None:
            raise ValidationError(f"bad or repeated vertex line {' '.join(row)!r}")
        colors[v] = row[1]
    edges = [(int(r[0]), int(r[1])) for r in rows[1 + n:]]
    if alphabet is None:
        alphabet = sorted(set(colors))
    if not isinstance(alphabet, Alphabet):
        alphabet = Alphabet(tuple(alphabet))
    return ColoredGraph(alphabet, tuple(colors), frozenset(edges))


def graph_key(g: ColoredGraph) -> str:
    """Canonical one-line serialization (colors, sorted edge list)."""
    edges = ",".join(f"{u}-{v}" for u, v in sorted(g.edges))
    return f"{' '.join(g.colors)}|{edges}"


def ball_counts_key(counts: Mapping[Ball, int]) -> str:
    """Canonical serialization of an occupancy (ball-count) measure."""
    return " ".join(f"{b}*{c}" for b, c in sorted(counts.items()) if c)


def make_graph(colors: Iterable[str], edges: Iterable[tuple[int, int]] = (), alphabet=None) -> ColoredGraph:
    colors = tuple(colors)
    if alphabet is None:
        alphabet = sorted(set(colors))
    if not isinstance(alphabet, Alphabet):
        alphabet = Alphabet(tuple(alphabet))
    return ColoredGraph(alphabet, colors, frozenset(edges))
