"""Train all four model kinds on one dataset and compare them.

Reports held-out RMSE/NLPD per model plus the exact log marginal
likelihood evaluated at each model's learned hyperparameters (the
hyperparameter-quality yardstick: higher is better).

    python scripts/model_comparison.py --n 900 --m 16 --steps 60
"""

import argparse
import sys

from cglb import config, data, models, training


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=900)
    ap.add_argument("--d", type=int, default=2)
    ap.add_argument("--m", type=int, default=16)
    ap.add_argument("--steps", type=int, default=60)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--lengthscale", type=float, default=0.25)
    ap.add_argument("--noise", type=float, default=0.05)
    args = ap.parse_args()

    base = {
        "m": args.m, "seed": args.seed,
        "data": {"synthetic": {"kind": "gp", "n": args.n, "d": args.d,
                                "seed": args.seed,
                                "lengthscale": args.lengthscale,
                                "noise_variance": args.noise}},
        "optimizer": {"max_steps": args.steps},
        "iterative": {"probes": 10, "cg_tol": 1e-2},
    }
    print(f"{'model':>10s} {'objective':>12s} {'lml@theta':>12s} "
          f"{'rmse':>8s} {'nlpd':>8s} {'noise':>8s} {'steps':>6s}")
    for kind in ("exact", "sgpr", "cglb", "iterative"):
        cfg = config.config_from_dict({**base, "model": kind})
        ds = training.build_dataset(cfg)
        train_set, test_set, _ = data.split_standardize(ds, cfg.split_fraction,
                                                        cfg.seed)
        model, result = training.train(cfg, train_set)
        metrics = training.evaluate(model, test_set)
        lml = models.exact_lml(model.params, train_set.X, train_set.y).value
        print(f"{kind:>10s} {-result.value:12.2f} {lml:12.2f} "
              f"{metrics['rmse']:8.4f} {metrics['nlpd']:8.4f} "
              f"{model.params.noise:8.4f} {len(result.trace) - 1:6d}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
