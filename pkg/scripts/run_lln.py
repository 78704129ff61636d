"""Total variation between a sampled graph's ball measure and the kernel, by n.

    python3 scripts/run_lln.py scripts/configs/lln_family.json
"""
import argparse
from pathlib import Path

from lossyaep import experiments as ex
from lossyaep.cli import RunConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config")
    ap.add_argument("--out")
    args = ap.parse_args()
    cfg = RunConfig.load(args.config)
    rows = ex.lln_experiment(cfg.experiment_config())
    out = Path(args.out or cfg.out_dir)
    ex.write_csv(out / "lln.csv", ex.LLN_HEADER, rows)
    for n, v in ex.medians_by_n(rows, "tv").items():
        print(f"n={n:>6}  median TV = {v:.4f}")


if __name__ == "__main__":
    main()
