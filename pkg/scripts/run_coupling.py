"""Mismatch counts of the graph/allocation coupling and the decay of P(tv >= eps).

    python3 scripts/run_coupling.py scripts/configs/aep_family.json --n 50,200 --reps 2000
"""
import argparse
from pathlib import Path

from lossyaep import experiments as ex
from lossyaep.cli import RunConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config")
    ap.add_argument("--n", default="50,200")
    ap.add_argument("--reps", type=int, default=2000)
    ap.add_argument("--out")
    args = ap.parse_args()
    cfg = RunConfig.load(args.config)
    cfg.experiment.update(n=[int(x) for x in args.n.split(",")], reps=args.reps)
    rows = ex.coupling_experiment(cfg.experiment_config())
    out = Path(args.out or cfg.out_dir)
    ex.write_csv(out / "coupling.csv", ex.COUPLING_HEADER, rows)
    for r in rows:
        print(f"n={r['n']:>5} {r['a']}{r['b']}: mean B = {r['mean_B']:.3f} +- {r['stderr_B']:.3f} "
              f"(bound {r['bound']}), P(tv >= {r['eps']}) = {r['frac_tv_ge_eps']:.4f}")


if __name__ == "__main__":
    main()
