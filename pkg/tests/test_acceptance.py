"""Acceptance suite: the ten criteria at their stated tolerances.

Each test records one PASS/FAIL line, printed in the terminal summary.
Reference values for the binary Hamming instance were produced by
``scripts/derive_binary_hamming.py`` (grid search on the dual, no code
shared with the package) and frozen here.
"""
import json
import math
import shutil
import time
from collections import Counter

import numpy as np
import pytest
from scipy import stats

from conftest import ACCEPTANCE_LINES
from lossyaep import experiments as ex
from lossyaep.cli import main
from lossyaep.kernel_rate import (RateProblem, build_kernel, distortion_ldp_rate,
                                  rate_distortion, tilted_coupling)
from lossyaep.measures import Alphabet, ColoredGraph, DistortionFn, graph_key
from lossyaep.oracle import (allocation_law_exact, enumerate_graphs, exact_match_probability,
                             tclass_probability)
from lossyaep.sampler import make_rng, sample_graph, validate_constraint

AB = Alphabet(("a", "b"))

# frozen output of scripts/derive_binary_hamming.py
BINARY_R = {0.1: 0.3680642071684971, 0.25: 0.13081203594113688, 0.4: 0.02013551355068882}
BINARY_I_075 = 0.13081203594113688


def record(num: int, ok: bool, detail: str):
    line = f"criterion {num}: {'PASS' if ok else 'FAIL'} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_01_kernel_correctness():
    rng = np.random.default_rng(20240101)
    t0 = time.perf_counter()
    worst_mass = worst_mean = 0.0
    for _ in range(10):
        s = rng.uniform(0.1, 0.9)
        paa, pab, pbb = rng.uniform(0, 1.2, size=3)
        K = build_kernel([s, 1 - s], [[paa, pab], [pab, pbb]], AB, tail_tol=1e-12)
        worst_mass = max(worst_mass, abs(math.fsum(K.probs) - 1))
        worst_mean = max(worst_mean, float(np.abs(K.mean_degrees() - K.pi).max()))
    elapsed = time.perf_counter() - t0
    ok = worst_mass <= 1e-12 and worst_mean <= 1e-10 and elapsed < 1.0
    record(1, ok, f"mass err {worst_mass:.1e}, mean err {worst_mean:.1e}, {elapsed:.2f}s")


def _direct_entropy(P: RateProblem, M: np.ndarray) -> float:
    ref = P.logp[:, None] + P.logp[None, :]
    pos = M > 0
    return float(np.sum(M[pos] * (np.log(M[pos]) - ref[pos])))


def test_02_duality():
    instances = [
        (build_kernel([0.4, 0.6], [[0.3, 0.35], [0.35, 0.5]], AB), DistortionFn("ball_hamming")),
        (build_kernel([1.0], [[1.0]], Alphabet(("a",))), DistortionFn("squared_degree_diff")),
        (build_kernel([0.5, 0.5], [[0.2, 0.3], [0.3, 0.2]], AB), DistortionFn("color_hamming")),
    ]
    t0 = time.perf_counter()
    worst_gap = worst_mean = 0.0
    for K, rho in instances:
        P = RateProblem(K, rho)
        for d in np.linspace(P.d_min, P.d_av, 22)[1:-1]:
            r = rate_distortion(P, None, float(d))
            nu = tilted_coupling(P, None, r.t_star)
            worst_gap = max(worst_gap, abs(r.R - _direct_entropy(P, nu.matrix)))
            worst_mean = max(worst_mean, abs(nu.mean_distortion - d))
    elapsed = time.perf_counter() - t0
    ok = worst_gap <= 1e-8 and worst_mean <= 1e-9 and elapsed < 5.0
    record(2, ok, f"max |R - H| {worst_gap:.1e}, max |mean - d| {worst_mean:.1e}, {elapsed:.2f}s")


def test_03_binary_hamming():
    K = build_kernel([0.5, 0.5], [[0, 0], [0, 0]], AB)
    rho = DistortionFn("ball_hamming")
    errs = [abs(rate_distortion(K, rho, d).R - v) for d, v in BINARY_R.items()]
    i75 = distortion_ldp_rate(K, rho, 0.75).R
    i25 = distortion_ldp_rate(K, rho, 0.25).R
    errs += [abs(i75 - BINARY_I_075), abs(i75 - i25)]
    ok = max(errs) <= 1e-8
    record(3, ok, f"max err {max(errs):.1e}")


TCLASS_INSTANCES = [
    (2, [1.0], [[1.0]], "a"),
    (4, [0.5, 0.5], [[0.5, 0.5], [0.5, 0.5]], "ab"),
    (3, [2 / 3, 1 / 3], [[2 / 3, 1 / 3], [1 / 3, 0]], "ab"),
]


def test_04_tclass_vs_enumeration():
    worst = 0.0
    sums_exact = True
    for n, sigma, pi, alph in TCLASS_INSTANCES:
        c = validate_constraint(n, sigma, pi, alph)
        law = allocation_law_exact(c)
        tc = {k: tclass_probability(nu, c, exact=True) for k, nu in law.objects.items()}
        sums_exact &= law.total() == 1 and sum(tc.values()) == 1
        worst = max(worst, max(abs(float(tc[k]) - float(p)) for k, p in law.atoms.items()))
    ok = worst <= 1e-12 and sums_exact
    record(4, ok, f"max atom diff {worst:.1e}, laws sum to 1: {sums_exact}")


def test_05_sampler_uniformity():
    c = validate_constraint(4, [0.5, 0.5], [[0, 0.5], [0.5, 0]], AB)
    keys = sorted(enumerate_graphs(c).atoms)
    assert len(keys) == 36
    rng = make_rng(5)
    counts = Counter()
    N = 1_000_000
    for _ in range(N):
        g = sample_graph(c, rng)
        counts[g.colors, g.edges] += 1
    observed = Counter({graph_key(ColoredGraph(c.alphabet, *k)): v for k, v in counts.items()})
    assert set(observed) == set(keys)
    p = stats.chisquare([observed[k] for k in keys]).pvalue
    record(5, p > 0.001, f"chi-square p = {p:.3f} over {len(keys)} outcomes, {N} samples")


def test_06_oracle_vs_monte_carlo():
    t0 = time.perf_counter()
    cases = [
        (validate_constraint(4, [0.5, 0.5], [[0.5, 0.5], [0.5, 0.5]], AB), DistortionFn("ball_hamming"), 0.5),
        (validate_constraint(5, [0.6, 0.4], [[0.4, 0.4], [0.4, 0.4]], AB), DistortionFn("squared_degree_diff"), 0.4),
    ]
    z = []
    for i, (c, rho, d) in enumerate(cases):
        x = sample_graph(c, 100 + i)
        exact = float(exact_match_probability(x, rho, d, c))
        est = ex.estimate_match_probability(x, rho, d, c, 100_000, 200 + i)
        se = math.sqrt(exact * (1 - exact) / est.samples)
        z.append(abs(est.p_hat - exact) / se)
    elapsed = time.perf_counter() - t0
    ok = max(z) <= 3 and elapsed < 30
    record(6, ok, f"|z| = {', '.join(f'{v:.2f}' for v in z)}, {elapsed:.1f}s")


COUPLING_FAMILY = dict(alphabet=("a", "b"), sigma=(0.5, 0.5), pi=((0.25, 0.25), (0.25, 0.25)))


def test_07_coupling():
    cfg = ex.ExperimentConfig(**COUPLING_FAMILY, ns=(200,), reps=10_000, seed=7)
    rows = ex.coupling_experiment(cfg)
    mean_ok = all(r["mean_B"] <= r["bound"] + 3 * r["stderr_B"] for r in rows)
    wins = 0
    for meta in range(5):
        mcfg = ex.ExperimentConfig(**COUPLING_FAMILY, ns=(50, 200), reps=1000, seed=1000 + meta)
        fr = {r["n"]: r["frac_tv_ge_eps"] for r in ex.coupling_experiment(mcfg)}
        wins += fr[200] < fr[50]
    means = ", ".join(f"{r['a']}{r['b']} {r['mean_B']:.3f}/{r['bound']}" for r in rows)
    record(7, mean_ok and wins >= 4, f"mean B {means}; exceedance n=200 < n=50 in {wins}/5 meta-reps")


AEP_FAMILY = dict(alphabet=("a", "b"), sigma=(0.5, 0.5), pi=((0.25, 0.25), (0.25, 0.25)),
                  rho=DistortionFn("ball_hamming"), d=0.7)


def test_08_aep_convergence():
    t0 = time.perf_counter()
    cfg = ex.ExperimentConfig(**AEP_FAMILY, ns=(8, 32), samples=1_000_000, source_seeds=20, seed=11)
    res = ex.aep_convergence(cfg)
    gaps = {g["n"]: g["gap"] for g in res.gaps}
    elapsed = time.perf_counter() - t0
    in_band = 0.05 <= res.reference.R <= 0.3
    ok = in_band and gaps[32] < gaps[8] and elapsed < 600
    record(8, ok, f"R(d) = {res.reference.R:.4f}, median gap n=8 {gaps[8]:.4f}, "
                  f"n=32 {gaps[32]:.4f}, {elapsed:.0f}s")


def test_09_wlln():
    cfg = ex.ExperimentConfig(alphabet=("a", "b"), sigma=(0.5, 0.5), pi=((0.5, 0.5), (0.5, 0.5)),
                              ns=(100, 400, 1600), source_seeds=20, seed=9)
    med = ex.medians_by_n(ex.lln_experiment(cfg), "tv")
    vals = [med[n] for n in (100, 400, 1600)]
    ok = vals[0] > vals[1] > vals[2]
    record(9, ok, "median TV " + ", ".join(f"n={n} {v:.4f}" for n, v in med.items()))


DET_FAMILY = {"alphabet": ["a", "b"], "sigma": [0.5, 0.5], "pi": [[0.25, 0.25], [0.25, 0.25]],
              "rho": {"kind": "ball_hamming"}, "seed": 123,
              "experiment": {"n": [8, 16], "d": 0.7, "samples": 20000, "source_seeds": 3,
                             "reps": 200, "shards": 3}}


def test_10_determinism(tmp_path):
    cfg_path = tmp_path / "run.json"
    cfg_path.write_text(json.dumps(DET_FAMILY))
    oracle_path = tmp_path / "oracle.json"
    oracle_path.write_text(json.dumps({**DET_FAMILY, "pi": [[0.5, 0.5], [0.5, 0.5]], "experiment": {"n": 4}}))
    out = tmp_path / "out"
    runs = {}
    for tag in ("first", "second"):
        # identical config, output directory included; cleared between runs
        shutil.rmtree(out, ignore_errors=True)
        for cmd in ("aep", "couple", "lln", "rate", "irho", "kernel", "gen"):
            assert main([cmd, "--config", str(cfg_path), "--out", str(out / cmd)]) == 0
        assert main(["oracle", "--config", str(oracle_path), "--out", str(out / "oracle")]) == 0
        runs[tag] = {p.relative_to(out): p.read_bytes() for p in sorted(out.rglob("*")) if p.is_file()}
    csvs = [p for p in runs["first"] if p.suffix == ".csv"]
    same = runs["first"] == runs["second"]
    record(10, same and len(csvs) >= 10, f"{len(runs['first'])} artifacts ({len(csvs)} CSV) byte-identical: {same}")
