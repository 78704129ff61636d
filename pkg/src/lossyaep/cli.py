"""Command-line front end.

    python -m lossyaep <subcommand> --config run.json [--seed S] [--out DIR] ...

Subcommands: gen, kernel, rate, irho, aep, couple, lln, oracle, metabolic.
Exit status is 0 on success, 2 on invalid input and 3 when an exact
enumeration would exceed its guard.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import experiments as ex
from .kernel_rate import RateProblem, build_kernel, distortion_ldp_rate, rate_distortion, rate_curve_rows
from .measures import Alphabet, DistortionFn, TruncationError, ValidationError, write_graph
from .metabolic import ingest_network, metabolic_report
from .oracle import (GuardError, ExactLaw, allocation_law_exact, enumerate_graphs,
                     tclass_probability)
from .sampler import sample_graph, validate_constraint

log = logging.getLogger("lossyaep")

EXIT_OK, EXIT_INVALID, EXIT_GUARD = 0, 2, 3

EXPERIMENT_KEYS = {"n", "d", "d_grid", "samples", "shards", "workers", "source_seeds", "reps",
                   "eps", "nodes", "edges", "queries", "guard"}


@dataclass
class RunConfig:
    alphabet: list[str] | None = None
    sigma: list[float] | None = None
    pi: list[list[float]] | None = None
    rho: dict | None = None
    tail_tol: float = 1e-12
    experiment: dict = field(default_factory=dict)
    seed: int = 0
    out_dir: str = "out"

    @classmethod
    def from_dict(cls, d: dict) -> RunConfig:
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ValidationError(f"unknown config keys: {sorted(extra)}")
        cfg = cls(**d)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> RunConfig:
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except (OSError, json.JSONDecodeError) as e:
            raise ValidationError(f"cannot read config {path}: {e}") from e

    def to_dict(self) -> dict:
        return asdict(self)

    def validate(self):
        extra = set(self.experiment) - EXPERIMENT_KEYS
        if extra:
            raise ValidationError(f"unknown experiment keys: {sorted(extra)}")
        if int(self.seed) < 0 or int(self.seed) >= 2**64:
            raise ValidationError("seed must be an unsigned 64-bit integer")
        self.distortion()
        if self.alphabet is not None:
            m = len(Alphabet(tuple(self.alphabet)))
            if self.sigma is None or self.pi is None:
                raise ValidationError("alphabet given without sigma and pi")
            if len(self.sigma) != m or len(self.pi) != m or any(len(r) != m for r in self.pi):
                raise ValidationError(f"sigma/pi shapes do not match the {m}-color alphabet")

    def distortion(self, default: str = "ball_hamming") -> DistortionFn:
        return DistortionFn.from_dict(self.rho if self.rho is not None else {"kind": default})

    def require_family(self):
        if self.alphabet is None:
            raise ValidationError("this subcommand needs alphabet, sigma and pi")

    def kernel(self):
        self.require_family()
        return build_kernel(self.sigma, self.pi, Alphabet(tuple(self.alphabet)), self.tail_tol)

    def ns(self) -> list[int]:
        n = self.experiment.get("n")
        if n is None:
            raise ValidationError("experiment.n is required")
        return [int(x) for x in (n if isinstance(n, list) else [n])]

    def experiment_config(self) -> ex.ExperimentConfig:
        self.require_family()
        e = self.experiment
        return ex.ExperimentConfig(
            alphabet=tuple(self.alphabet), sigma=tuple(self.sigma),
            pi=tuple(tuple(r) for r in self.pi), ns=tuple(self.ns()), rho=self.distortion(),
            d=e.get("d"), d_grid=tuple(e.get("d_grid", ())), samples=int(e.get("samples", 10_000)),
            seed=int(self.seed), shards=int(e.get("shards", 1)), workers=int(e.get("workers", 1)),
            source_seeds=int(e.get("source_seeds", 1)), reps=int(e.get("reps", 1000)),
            eps=float(e.get("eps", 0.05)), tail_tol=self.tail_tol)


def parse_d(text: str) -> list[float]:
    """``0.25`` or a grid ``start:stop:count`` (inclusive ends)."""
    try:
        if ":" in text:
            a, b, k = text.split(":")
            return [float(x) for x in np.linspace(float(a), float(b), int(k))]
        return [float(text)]
    except ValueError as e:
        raise ValidationError(f"bad --d value {text!r}") from e


def _write_rows(path: Path, header, rows):
    return ex.write_csv(path, header, rows)


def _write_json(path: Path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _d_values(cfg: RunConfig, P: RateProblem) -> list[float]:
    e = cfg.experiment
    if "d_grid" in e:
        return [float(x) for x in e["d_grid"]]
    if e.get("d") is not None:
        return [float(e["d"])]
    return [float(x) for x in np.linspace(P.d_min, P.d_av, 22)[1:-1]]


def cmd_gen(cfg: RunConfig, out: Path):
    cfg.require_family()
    n = cfg.ns()[0]
    c = validate_constraint(n, cfg.sigma, cfg.pi, cfg.alphabet)
    g = sample_graph(c, cfg.seed)
    (out / "graph.txt").write_text(write_graph(g))


def cmd_kernel(cfg: RunConfig, out: Path):
    K = cfg.kernel()
    P = RateProblem(K, cfg.distortion())
    rows = [{"color": b.color, "degrees": " ".join(map(str, b.degrees)), "probability": p}
            for b, p in K.atoms.items()]
    _write_rows(out / "kernel.csv", ["color", "degrees", "probability"], rows)
    _write_json(out / "kernel_summary.json", {
        "L_max": K.L_max, "atoms": len(K), "truncation_mass": K.truncation_mass,
        "tail_tol": K.tail_tol, "d_min": P.d_min, "d_av": P.d_av, "d_max": P.d_max,
        "mean_degrees": K.mean_degrees().tolist()})


def cmd_rate(cfg: RunConfig, out: Path):
    P = RateProblem(cfg.kernel(), cfg.distortion())
    results = [rate_distortion(P, None, d) for d in _d_values(cfg, P)]
    _write_rows(out / "rd.csv", ["d", "R_nats", "t_star", "status", "truncation_mass"],
                rate_curve_rows(results))


def cmd_irho(cfg: RunConfig, out: Path):
    P = RateProblem(cfg.kernel(), cfg.distortion())
    e = cfg.experiment
    zs = _d_values(cfg, P) if ("d" in e or "d_grid" in e) else \
        [float(x) for x in np.linspace(P.d_min, P.d_max, 22)[1:-1]]
    rows = []
    for z in zs:
        r = distortion_ldp_rate(P, None, z)
        rows.append({"z": z, "I_nats": r.R, "t_star": r.t_star, "status": r.status,
                     "truncation_mass": r.truncation_mass})
    _write_rows(out / "irho.csv", ["z", "I_nats", "t_star", "status", "truncation_mass"], rows)


def cmd_aep(cfg: RunConfig, out: Path):
    res = ex.aep_convergence(cfg.experiment_config())
    _write_rows(out / "aep.csv", ex.AEP_HEADER, res.rows)
    _write_rows(out / "aep_gap.csv", ex.GAP_HEADER, res.gaps)
    if res.warning:
        _write_json(out / "aep_warning.json", {"warning": res.warning})


def cmd_couple(cfg: RunConfig, out: Path):
    _write_rows(out / "coupling.csv", ex.COUPLING_HEADER, ex.coupling_experiment(cfg.experiment_config()))


def cmd_lln(cfg: RunConfig, out: Path):
    rows = ex.lln_experiment(cfg.experiment_config())
    _write_rows(out / "lln.csv", ex.LLN_HEADER, rows)
    med = ex.medians_by_n(rows, "tv")
    _write_rows(out / "lln_median.csv", ["n", "median_tv"],
                [{"n": n, "median_tv": v} for n, v in med.items()])


def _law_csv(path: Path, law: ExactLaw):
    path.write_text(law.to_csv())


def cmd_oracle(cfg: RunConfig, out: Path):
    cfg.require_family()
    guard = int(cfg.experiment.get("guard", 10**7))
    c = validate_constraint(cfg.ns()[0], cfg.sigma, cfg.pi, cfg.alphabet)
    alloc = allocation_law_exact(c, guard)
    _law_csv(out / "allocation_law.csv", alloc)
    tclass = ExactLaw({k: tclass_probability(nu, c, exact=True) for k, nu in alloc.objects.items()})
    _law_csv(out / "tclass.csv", tclass)
    _law_csv(out / "graphs.csv", enumerate_graphs(c, guard))


def cmd_metabolic(cfg: RunConfig, out: Path):
    e = cfg.experiment
    if "nodes" not in e or "edges" not in e:
        raise ValidationError("metabolic needs experiment.nodes and experiment.edges (or --nodes/--edges)")
    ing = ingest_network(e["nodes"], e["edges"])
    curve = []
    if e.get("d_grid") or e.get("d") is not None:
        sigma = [float(ing.sigma[a]) for a in ing.graph.alphabet]
        pi = [[float(ing.pi[a, b]) for b in ing.graph.alphabet] for a in ing.graph.alphabet]
        # degrees s, r of the two balls enter as (s - r)^2 unless the config says otherwise
        rho = cfg.distortion(default="squared_degree_diff")
        P = RateProblem(build_kernel(sigma, pi, ing.graph.alphabet, cfg.tail_tol), rho)
        curve = rate_curve_rows([rate_distortion(P, None, d) for d in _d_values(cfg, P)])
    rep = metabolic_report(ing, [float(x) for x in e.get("queries", [])], curve)
    _write_json(out / "metabolic_report.json", rep.to_dict())


COMMANDS = {
    "gen": cmd_gen, "kernel": cmd_kernel, "rate": cmd_rate, "irho": cmd_irho, "aep": cmd_aep,
    "couple": cmd_couple, "lln": cmd_lln, "oracle": cmd_oracle, "metabolic": cmd_metabolic,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lossyaep", description=__doc__.splitlines()[0])
    p.add_argument("subcommand", choices=sorted(COMMANDS))
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--seed", type=int, help="unsigned 64-bit seed")
    p.add_argument("--out", help="output directory")
    p.add_argument("--samples", type=int)
    p.add_argument("--n", help="comma-separated graph sizes")
    p.add_argument("--d", help="distortion level, or grid start:stop:count")
    p.add_argument("--nodes", help="metabolic nodes CSV (id,type)")
    p.add_argument("--edges", help="metabolic edges CSV (u,v)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def resolve(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    exp = dict(cfg.experiment)
    if args.samples is not None:
        exp["samples"] = args.samples
    if args.n:
        try:
            exp["n"] = [int(x) for x in args.n.split(",")]
        except ValueError as e:
            raise ValidationError(f"bad --n value {args.n!r}") from e
    if args.d:
        ds = parse_d(args.d)
        if len(ds) == 1 and ":" not in args.d:
            exp["d"] = ds[0]
            exp.pop("d_grid", None)
        else:
            exp["d_grid"] = ds
    if args.nodes:
        exp["nodes"] = args.nodes
    if args.edges:
        exp["edges"] = args.edges
    cfg = replace(cfg, experiment=exp)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out:
        cfg.out_dir = args.out
    cfg.validate()
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve(args)
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.subcommand](cfg, out)
        _write_json(out / "resolved_config.json", cfg.to_dict())
    except GuardError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_GUARD
    except (ValidationError, TruncationError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
