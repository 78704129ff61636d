"""Monte Carlo checks of the lossy AEP and of the lemmas behind it.

Every random draw is keyed by a seed sequence derived from
``(config seed, purpose tag, n, repetition)``, so tables are reproducible
bit for bit.  Match-probability trials are split into shards whose hit
counts are summed, so the result depends on the shard count but not on
the order (or process) in which shards run.
"""
from __future__ import annotations

import csv
import logging
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .kernel_rate import RateProblem, RateResult, build_kernel, rate_distortion
from .measures import (Alphabet, ColoredGraph, DistortionFn, ValidationError, ball_measure,
                       total_variation)
from .sampler import (GraphConstraint, iter_ball_batches, pool_size, sample_coupled,
                      sample_graph)

log = logging.getLogger(__name__)

SOURCE, CODEWORD, COUPLING, LLN = 1, 2, 3, 4


def seed_for(seed: int, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed), *map(int, key)])


@dataclass(frozen=True)
class ExperimentConfig:
    """A constraint family (sigma, pi) with the sizes and budgets to run it at."""

    alphabet: tuple[str, ...]
    sigma: tuple[float, ...]
    pi: tuple[tuple[float, ...], ...]
    ns: tuple[int, ...] = (8, 16, 32)
    rho: DistortionFn = field(default_factory=DistortionFn)
    d: float | None = None
    d_grid: tuple[float, ...] = ()
    samples: int = 10_000
    seed: int = 0
    shards: int = 1
    workers: int = 1
    source_seeds: int = 1
    reps: int = 1000
    eps: float = 0.05
    tail_tol: float = 1e-12

    def __post_init__(self):
        if self.samples < 1 or self.shards < 1 or self.reps < 1 or self.source_seeds < 1:
            raise ValidationError("samples, shards, reps and source_seeds must be >= 1")
        for n in self.ns:
            round_constraint(n, self.sigma, self.pi, self.alphabet)

    @property
    def alpha(self) -> Alphabet:
        return Alphabet(tuple(self.alphabet))

    def kernel(self):
        return build_kernel(self.sigma, self.pi, self.alpha, self.tail_tol)


def _largest_remainder(weights: Sequence[float], total: int) -> list[int]:
    raw = [float(w) * total for w in weights]
    out = [math.floor(x) for x in raw]
    order = sorted(range(len(raw)), key=lambda i: (out[i] - raw[i], i))
    for i in order[: total - sum(out)]:
        out[i] += 1
    return out


def round_constraint(n: int, sigma, pi, alphabet) -> GraphConstraint:
    """Nearest integer constraint at size n.

    Color counts by largest remainder; edge counts rounded to nearest and
    clipped to the pool capacity.  The realized (sigma_n, pi_n) are
    ``c.sigma`` and ``c.pi`` of the result.
    """
    if not isinstance(alphabet, Alphabet):
        alphabet = Alphabet(tuple(alphabet))
    m = len(alphabet)
    if n < 1:
        raise ValidationError("n must be >= 1")
    counts = _largest_remainder(sigma, n)
    edges = [[0] * m for _ in range(m)]
    for i in range(m):
        for j in range(i, m):
            w = 0.5 * (float(pi[i][j]) + float(pi[j][i]))
            k = int(math.floor(n * w / (2 if i == j else 1) + 0.5))
            k = min(k, pool_size(counts[i], counts[j], i == j))
            edges[i][j] = edges[j][i] = k
    return GraphConstraint(alphabet, tuple(counts), tuple(tuple(r) for r in edges))


@dataclass(frozen=True)
class EstimateRow:
    n: int
    d: float
    hits: int
    samples: int
    p_hat: float
    stderr: float
    neg_log_rate: float
    zero_hit_bound: float | None = None

    @classmethod
    def from_counts(cls, n: int, d: float, hits: int, samples: int) -> EstimateRow:
        p = hits / samples
        se = math.sqrt(p * (1 - p) / samples)
        rate = -math.log(p) / n if hits else math.inf
        return cls(n, d, hits, samples, p, se, rate, None if hits else 3.0 / samples)


def _shard_hits(args) -> int:
    c, cx, dx, rho, d, size, ss = args
    limit = d * c.n + 1e-9
    hits = 0
    for batch in iter_ball_batches(c, size, ss):
        dist = rho.pairwise(cx[None, :], dx[None, :, :], batch.colors, batch.degrees, c.alphabet)
        hits += int(np.count_nonzero(dist.sum(axis=1) <= limit))
    return hits


def shard_sizes(samples: int, shards: int) -> list[int]:
    q, r = divmod(samples, shards)
    return [q + (i < r) for i in range(shards)]


def estimate_match_probability(x: ColoredGraph, rho: DistortionFn, d: float, c: GraphConstraint,
                               samples: int, seed, shards: int = 1, workers: int = 1) -> EstimateRow:
    """Fraction of independent codewords Y with ``rho_n(x, Y) <= d``."""
    if x.n != c.n or x.alphabet != c.alphabet:
        raise ValidationError("source graph does not match the constraint's size/alphabet")
    if samples < 1:
        raise ValidationError("samples must be >= 1")
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(int(seed))
    jobs = [(c, x.color_index, x.degree_matrix, rho, d, k, s)
            for k, s in zip(shard_sizes(samples, shards), ss.spawn(shards)) if k]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(workers) as ex:
            hits = sum(ex.map(_shard_hits, jobs))
    else:
        hits = sum(map(_shard_hits, jobs))
    return EstimateRow.from_counts(c.n, d, hits, samples)


@dataclass
class AEPResult:
    rows: list[dict]
    gaps: list[dict]
    reference: RateResult
    warning: str | None = None


def aep_convergence(cfg: ExperimentConfig) -> AEPResult:
    """Estimate ``-(1/n) log P(rho_n(x, Y) <= d)`` along ``cfg.ns`` and compare with R(d)."""
    if cfg.d is None:
        raise ValidationError("aep_convergence needs a distortion level d")
    P = RateProblem(cfg.kernel(), cfg.rho)
    ref = rate_distortion(P, None, cfg.d)
    warning = None
    if not P.d_min < cfg.d < P.d_av:
        warning = f"d={cfg.d} outside (d_min, d_av) = ({P.d_min:.6g}, {P.d_av:.6g})"
        log.warning(warning)
    rows, gaps = [], []
    for n in cfg.ns:
        c = round_constraint(n, cfg.sigma, cfg.pi, cfg.alphabet)
        per_n = []
        for s in range(cfg.source_seeds):
            x = sample_graph(c, seed_for(cfg.seed, SOURCE, n, s))
            est = estimate_match_probability(x, cfg.rho, cfg.d, c, cfg.samples,
                                             seed_for(cfg.seed, CODEWORD, n, s), cfg.shards, cfg.workers)
            rows.append({"n": n, "d": cfg.d, "hits": est.hits, "samples": est.samples,
                         "p_hat": est.p_hat, "stderr": est.stderr,
                         "neg_log_rate": est.neg_log_rate, "R_ref": ref.R, "source": s})
            per_n.append(abs(est.neg_log_rate - ref.R))
        gaps.append({"n": n, "gap": statistics.median(per_n)})
    return AEPResult(rows, gaps, ref, warning)


def coupling_experiment(cfg: ExperimentConfig) -> list[dict]:
    """Mean mismatch counts per color pair and the frequency of ``tv >= eps``, per n."""
    rows = []
    for n in cfg.ns:
        c = round_constraint(n, cfg.sigma, cfg.pi, cfg.alphabet)
        reports = [sample_coupled(c, seed_for(cfg.seed, COUPLING, n, r)) for r in range(cfg.reps)]
        frac = sum(r.tv >= cfg.eps for r in reports) / cfg.reps
        sym = c.alphabet.symbols
        for i, j, _ in c.pair_list():
            key = (sym[i], sym[j])
            B = np.array([r.mismatches[key] for r in reports], dtype=float)
            se = B.std(ddof=1) / math.sqrt(len(B)) if len(B) > 1 else 0.0
            rows.append({"n": n, "a": key[0], "b": key[1], "mean_B": float(B.mean()),
                         "stderr_B": float(se), "bound": 1 + (i == j),
                         "frac_tv_ge_eps": frac, "eps": cfg.eps, "reps": cfg.reps})
        if not c.pair_list():
            rows.append({"n": n, "a": "", "b": "", "mean_B": 0.0, "stderr_B": 0.0, "bound": 1,
                         "frac_tv_ge_eps": frac, "eps": cfg.eps, "reps": cfg.reps})
    return rows


def lln_experiment(cfg: ExperimentConfig) -> list[dict]:
    """Total variation between a sampled graph's ball measure and the kernel, per n and seed."""
    K = cfg.kernel()
    atoms = K.atoms
    rows = []
    for n in cfg.ns:
        c = round_constraint(n, cfg.sigma, cfg.pi, cfg.alphabet)
        for s in range(cfg.source_seeds):
            g = sample_graph(c, seed_for(cfg.seed, LLN, n, s))
            rows.append({"n": n, "seed": s, "tv": total_variation(ball_measure(g), atoms)})
    return rows


def medians_by_n(rows: list[dict], key: str) -> dict[int, float]:
    out: dict[int, list] = {}
    for r in rows:
        out.setdefault(r["n"], []).append(r[key])
    return {n: statistics.median(v) for n, v in out.items()}


AEP_HEADER = ["n", "d", "hits", "samples", "p_hat", "stderr", "neg_log_rate", "R_ref", "source"]
COUPLING_HEADER = ["n", "a", "b", "mean_B", "stderr_B", "bound", "frac_tv_ge_eps", "eps", "reps"]
LLN_HEADER = ["n", "seed", "tv"]
GAP_HEADER = ["n", "gap"]


def write_csv(path, header: list[str], rows: list[dict]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=header, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: r[k] for k in header})
    return path
