"""Deep-1 accuracy with growth per cycle fixed versus drawn from [0.02, 0.2] nm.

When the growth per cycle varies, a thin film from a short dose looks like a
saturated film with small growth per cycle, and the profile-to-t_sat map gets
much harder to learn.  This script measures how much.

    python3 scripts/growth_prior_sensitivity.py --train 100000 --epochs 100
"""

import argparse
import warnings

from aldsat.dataset import ParameterPriors, Prior, compute_normalization, generate_dataset, make_meta
from aldsat.evaluation import fit_and_evaluate
from aldsat.neuralnet import TrainConfig

PRIORS = {
    "fixed 0.1": ParameterPriors(),
    "0.09-0.11": ParameterPriors(growth_per_cycle=Prior(0.09, 0.11)),
    "0.02-0.2": ParameterPriors.wide_growth(),
}


def run(train_size: int, epochs: int, n_points: int, hidden: tuple[int, ...]) -> None:
    cfg = TrainConfig(epochs=epochs, init_seed=1, shuffle_seed=1)
    for label, priors in PRIORS.items():
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            train = generate_dataset(make_meta(n_points, seed=1, priors=priors), train_size)
            test = generate_dataset(make_meta(n_points, seed=2, priors=priors), max(train_size // 10, 100))
        train = train.with_stats(compute_normalization(train))
        _, report = fit_and_evaluate(train, test, hidden, cfg)
        print(f"{label:>10}: mean_eps {report.mean_eps:+.4f}  std_eps {report.std_eps:.4f}", flush=True)


if __name__ == "__main__":
    parser = argparse.ArgumentParser()
    parser.add_argument("--train", type=int, default=20_000)
    parser.add_argument("--epochs", type=int, default=30)
    parser.add_argument("--points", type=int, default=20)
    parser.add_argument("--hidden", default="30")
    args = parser.parse_args()
    run(args.train, args.epochs, args.points, tuple(int(h) for h in args.hidden.split(",")))
