"""How many CG iterations does CGLB spend per optimiser step?

Trains CGLB on synthetic GP draws for several seeds and writes one CSV
row per optimiser step with the CG iteration count, objective and
gradient norm. The iteration column collapsing to zero after the early
steps is the warm-start effect; the printed summary compares the first
and last quarters.

    python scripts/warm_start_study.py --n 1500 --m 32 --steps 200 --seeds 5
"""

import argparse
import csv
import sys
from pathlib import Path

from cglb import config, data, training


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=1500, help="synthetic draw size")
    ap.add_argument("--m", type=int, default=32)
    ap.add_argument("--steps", type=int, default=200)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--lengthscale", type=float, default=0.3)
    ap.add_argument("--noise", type=float, default=0.05)
    ap.add_argument("--out", default="warm_start_study.csv")
    args = ap.parse_args()

    rows = []
    for seed in range(args.seeds):
        cfg = config.config_from_dict({
            "model": "cglb", "m": args.m, "seed": seed,
            "data": {"synthetic": {"kind": "gp", "n": args.n, "d": 2, "seed": seed,
                                    "lengthscale": args.lengthscale,
                                    "noise_variance": args.noise}},
            "optimizer": {"max_steps": args.steps},
        })
        ds = training.build_dataset(cfg)
        train_set, _, _ = data.split_standardize(ds, cfg.split_fraction, cfg.seed)
        records = []
        training.train(cfg, train_set, trace_sink=records.append)
        iters = [r["cg_iters"] for r in records]
        q = max(len(iters) // 4, 1)
        print(f"seed {seed}: {len(records) - 1} steps, CG iterations "
              f"first quarter {sum(iters[:q])}, last quarter {sum(iters[-q:])}")
        for r in records:
            rows.append({"seed": seed, "step": r["step"], "cg_iters": r["cg_iters"],
                         "objective": r["objective"], "grad_norm": r["grad_norm"]})

    out = Path(args.out)
    with out.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
    print(f"wrote {len(rows)} rows to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
