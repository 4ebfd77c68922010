"""Baseline vs. interpolation vs. extrapolation on simple and complex class boundaries.

    python scripts/boundary_study.py                      # linear, circles, spirals
    python scripts/boundary_study.py --kinds spirals --threads 4
"""

import argparse
import logging
from dataclasses import replace

from feataug import experiments as ex
from feataug.config import load_config


def verdict(kind: str, m: dict) -> bool:
    base = m["baseline"]
    if kind == "spirals":
        return m["extrapolation"] < base and m["interpolation"] >= base - 0.5
    return m["interpolation"] <= base and m["extrapolation"] >= base - 0.5


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--kinds", nargs="+", default=["linear", "circles", "spirals"])
    p.add_argument("--threads", type=int, default=1)
    args = p.parse_args()
    logging.basicConfig(level=logging.WARNING)

    for kind in args.kinds:
        cfg = replace(load_config(f"configs/{kind}.yaml"), threads=args.threads).validate()
        res = ex.cmd_classify(cfg, cfg.out_dir)
        means = {v: r.mean for v, r in res["results"].items()}
        row = "  ".join(f"{v} {r.mean:6.2f} +/- {r.std:4.2f}" for v, r in res["results"].items())
        print(f"{kind:8s} {row}  expected direction: {verdict(kind, means)}")


if __name__ == "__main__":
    main()
