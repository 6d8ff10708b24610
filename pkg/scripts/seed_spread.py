"""Spread of sweep-cell accuracy over training seeds.

Each sweep cell is a single training run, so ratios of std_eps between cells
carry seed noise.  This retrains selected cells with several seeds on the
same data.

    python3 scripts/seed_spread.py --points 8,20 --seeds 5
"""

import argparse

import numpy as np

from aldsat.dataset import compute_normalization, generate_dataset, make_meta
from aldsat.evaluation import fit_and_evaluate
from aldsat.neuralnet import TrainConfig


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--points", default="8,20")
    parser.add_argument("--hidden", default="30")
    parser.add_argument("--seeds", type=int, default=5)
    parser.add_argument("--train", type=int, default=100_000)
    parser.add_argument("--epochs", type=int, default=100)
    args = parser.parse_args()
    hidden = tuple(int(h) for h in args.hidden.split(","))

    sigma = {}
    for n in (int(v) for v in args.points.split(",")):
        train = generate_dataset(make_meta(n, seed=1), args.train)
        test = generate_dataset(make_meta(n, seed=2), args.train // 10)
        train = train.with_stats(compute_normalization(train))
        sigma[n] = []
        for seed in range(1, args.seeds + 1):
            cfg = TrainConfig(epochs=args.epochs, init_seed=seed, shuffle_seed=seed)
            sigma[n].append(fit_and_evaluate(train, test, hidden, cfg)[1].std_eps)
            print(f"n={n} seed={seed} std_eps={sigma[n][-1]:.4f}", flush=True)
    for n, values in sigma.items():
        v = np.array(values)
        print(f"n={n}: mean {v.mean():.4f}  min {v.min():.4f}  max {v.max():.4f}")
    if len(sigma) == 2:
        a, b = (np.array(v) for v in sigma.values())
        print(f"ratio of seed means: {a.mean() / b.mean():.3f}")
        print(f"per-seed ratios: {np.round(a / b, 3).tolist()}")


if __name__ == "__main__":
    main()
