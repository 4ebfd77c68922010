"""Train the sinusoid autoencoder, then report reconstruction and operator sweeps.

    python scripts/sinusoid_study.py --config configs/sinusoids.yaml
    python scripts/sinusoid_study.py --config configs/sinusoids.yaml --checkpoint runs/sinusoids/checkpoint.bin
"""

import argparse
import logging
import time
from pathlib import Path

from feataug import experiments as ex
from feataug.checkpoint import load_checkpoint
from feataug.config import load_config
from feataug.studies import extrapolation_check, interpolation_sweep, pick_pairs
from feataug.tensor import RandomStream


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--config", default="configs/sinusoids.yaml")
    p.add_argument("--checkpoint", help="skip training and reuse this checkpoint")
    p.add_argument("--pairs", type=int, default=5)
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    cfg = load_config(args.config)
    out = Path(cfg.out_dir)
    ckpt_path = args.checkpoint
    if ckpt_path is None:
        t0 = time.time()
        res = ex.cmd_train_sa(cfg, out)
        ckpt_path = res["checkpoint"]
        print(f"trained {res['updates']} updates in {time.time() - t0:.0f}s, "
              f"val_loss {res['history'][0].val_loss:.4g} -> {res['history'][-1].val_loss:.4g}")
    rt = ex.cmd_roundtrip(cfg, ckpt_path, out, "test")
    print(f"held-out reconstruction MSE {rt['aggregate']:.5f} over {len(rt['rows'])} sequences")

    ckpt = load_checkpoint(ckpt_path)
    prep = ex.preprocess(cfg, *ex.raw_data(cfg, RandomStream(cfg.seed)), ckpt.norm)
    seqs = [s.values for s in prep.train]
    pairs = pick_pairs(prep.train, args.pairs, RandomStream(cfg.seed).child("pairs"))

    sw = interpolation_sweep(ckpt.model, seqs, pairs[0], cfg.sweep.lambdas, ckpt.reverse)
    print(f"interpolation {pairs[0]}: distances "
          + " ".join(f"{d:.2f}" for d in sw.distances)
          + f"  monotone={sw.monotone()}  worst fit residual {sw.worst_residual():.3f}")
    for pair in pairs:
        chk = extrapolation_check(ckpt.model, seqs, pair, 0.5, ckpt.reverse)
        print(f"extrapolation {pair}: small {chk.a_lo:.3f} -> {chk.a_lo_child:.3f}, "
              f"large {chk.a_hi:.3f} -> {chk.a_hi_child:.3f}  ok={chk.passes()}")

    for op in ("interpolate", "extrapolate", "noise"):
        res = ex.cmd_sweep(cfg, ckpt_path, out / f"sweep_{op}", pairs[0], op)
        print(f"{op}: wrote {len(res['csv'])} curves and {res['svg']}")


if __name__ == "__main__":
    main()
