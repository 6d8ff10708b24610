"""
Prediction-error statistics and the point-count / hidden-width sweeps.

The error of one prediction is ``eps = (t_pred - t_sat) / t_sat``; a model
is summarized by the mean and (population) standard deviation of ``eps`` over
a test set.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .dataset import Dataset, compute_normalization
from .neuralnet import Mlp, TrainConfig, architecture, init_mlp, predict_log10, train

SWEEP_HEADER = ["n_points", "arch", "mean_eps", "std_eps", "mse_log"]
SCATTER_HEADER = ["t_sat", "eps", "dose_ratio"]

DEFAULT_POINT_COUNTS = (4, 5, 8, 10, 16, 20)
DEFAULT_WIDTHS = (2, 5, 10, 20, 30, 50)
# label -> hidden widths
REFERENCE_ARCHITECTURES = {"shallow": (), "30": (30,), "30-10": (30, 10)}


def arch_label(hidden) -> str:
    return "-".join(str(h) for h in hidden) if hidden else "shallow"


def relative_error(t_pred, t_sat):
    t_sat = np.asarray(t_sat, dtype=np.float64)
    if np.any(t_sat <= 0):
        raise ValueError("t_sat must be positive")
    out = (np.asarray(t_pred, dtype=np.float64) - t_sat) / t_sat
    return float(out) if out.ndim == 0 else out


@dataclass
class EvalReport:
    mean_eps: float
    std_eps: float
    mse_log: float
    n_samples: int
    t_sat: np.ndarray = field(repr=False)
    eps: np.ndarray = field(repr=False)
    dose_ratio: np.ndarray = field(repr=False)

    def summary(self) -> dict:
        return {
            "mean_eps": self.mean_eps,
            "std_eps": self.std_eps,
            "mse_log": self.mse_log,
            "n_samples": self.n_samples,
        }


def report_from_predictions(t_pred, test: Dataset, target_mean: float = 0.0, target_std: float = 1.0) -> EvalReport:
    """Summarize predicted saturation times against a test set.

    ``mse_log`` is measured on log10 times standardized with the given target
    statistics (those the model was trained with).
    """
    if len(test) == 0:
        raise ValueError("empty test set")
    t_pred = np.asarray(t_pred, dtype=np.float64)
    eps = relative_error(t_pred, test.saturation_time)
    eps = np.atleast_1d(eps)
    z_pred = (np.log10(t_pred) - target_mean) / target_std
    z_true = (np.log10(test.saturation_time) - target_mean) / target_std
    return EvalReport(
        mean_eps=float(eps.mean()),
        std_eps=float(eps.std()),
        mse_log=float(np.mean((z_pred - z_true) ** 2)),
        n_samples=len(test),
        t_sat=test.saturation_time.copy(),
        eps=eps,
        dose_ratio=test.dose_time / test.saturation_time,
    )


def evaluate(mlp: Mlp, test: Dataset) -> EvalReport:
    if mlp.n_inputs != test.meta.n_points + 1:
        raise ValueError(f"model expects {mlp.n_inputs - 1} thickness values, dataset has {test.meta.n_points}")
    log_pred = predict_log10(mlp, test.thickness, test.dose_time)
    return report_from_predictions(10.0**log_pred, test, mlp.stats.target_mean, mlp.stats.target_std)


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------


@dataclass
class SweepRow:
    n_points: int
    arch: str
    report: EvalReport
    repeat: int = 0


@dataclass
class SweepResult:
    axis: str  # "n_points" or "width"
    rows: list[SweepRow] = field(default_factory=list)

    def get(self, n_points: int, arch: str, repeat: int = 0) -> EvalReport:
        for row in self.rows:
            if (row.n_points, row.arch, row.repeat) == (n_points, arch, repeat):
                return row.report
        raise KeyError((n_points, arch, repeat))

    def table(self) -> list[dict]:
        return [{"n_points": r.n_points, "arch": r.arch, **r.report.summary()} for r in self.rows]


def fit_and_evaluate(train_set: Dataset, test_set: Dataset, hidden, config: TrainConfig) -> tuple[Mlp, EvalReport]:
    """One sweep cell: fresh network from ``config.init_seed``, trained then tested."""
    if train_set.stats is None:
        train_set = train_set.with_stats(compute_normalization(train_set))
    mlp = init_mlp(architecture(train_set.meta.n_points, hidden), config.init_seed)
    model = train(mlp, train_set, config).mlp
    return model, evaluate(model, test_set)


def _cell(args):
    train_set, test_set, hidden, config = args
    return fit_and_evaluate(train_set, test_set, hidden, config)[1]


def _run_cells(cells, workers: int):
    if workers <= 1:
        return [_cell(c) for c in cells]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_cell, cells))


def _repeat_config(config: TrainConfig, repeat: int) -> TrainConfig:
    if repeat == 0:
        return config
    return TrainConfig(**{**config.__dict__, "init_seed": config.init_seed + repeat, "shuffle_seed": config.shuffle_seed + repeat})


def sweep_points(
    datasets: dict[int, tuple[Dataset, Dataset]],
    architectures: dict[str, tuple[int, ...]],
    config: TrainConfig,
    repeats: int = 1,
    workers: int = 1,
) -> SweepResult:
    """Train and test every architecture on every (train, test) pair keyed by point count."""
    keys = [(n, label, r) for n in sorted(datasets) for label in architectures for r in range(repeats)]
    cells = [(*datasets[n], architectures[label], _repeat_config(config, r)) for n, label, r in keys]
    reports = _run_cells(cells, workers)
    return SweepResult("n_points", [SweepRow(n, label, rep, r) for (n, label, r), rep in zip(keys, reports)])


def sweep_width(
    widths,
    train_set: Dataset,
    test_set: Dataset,
    config: TrainConfig,
    repeats: int = 1,
    workers: int = 1,
) -> SweepResult:
    """One-hidden-layer networks of each width, on one dataset."""
    keys = [(int(w), r) for w in widths for r in range(repeats)]
    cells = [(train_set, test_set, (w,), _repeat_config(config, r)) for w, r in keys]
    reports = _run_cells(cells, workers)
    n = train_set.meta.n_points
    return SweepResult("width", [SweepRow(n, str(w), rep, r) for (w, r), rep in zip(keys, reports)])


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------


def write_sweep_csv(rows: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_HEADER)
        for row in rows:
            writer.writerow([row["n_points"], row["arch"], *(repr(float(row[k])) for k in SWEEP_HEADER[2:])])


def read_sweep_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return [
            {"n_points": int(r["n_points"]), "arch": r["arch"], **{k: float(r[k]) for k in SWEEP_HEADER[2:]}}
            for r in reader
        ]


def write_scatter_csv(report: EvalReport, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SCATTER_HEADER)
        for row in zip(report.t_sat.tolist(), report.eps.tolist(), report.dose_ratio.tolist()):
            writer.writerow([repr(v) for v in row])


def read_scatter_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    return np.array([[float(v) for v in r] for r in rows], dtype=np.float64).reshape(-1, 3)


def scatter_svg(report: EvalReport, title: str = "", width: int = 480, height: int = 360) -> str:
    """Relative error against true saturation time (log axis), one dot per sample.

    Dots are grey-keyed to t_dose / t_sat: darker means closer to saturation.
    """
    margin = 50
    pw, ph = width - 2 * margin, height - 2 * margin
    if report.n_samples:
        lx = np.log10(report.t_sat)
        x_lo, x_hi = math.floor(lx.min()), math.ceil(lx.max())
        if x_hi == x_lo:
            x_hi += 1
        y_lim = max(float(np.max(np.abs(report.eps))), 1e-3) * 1.1
    else:
        lx, x_lo, x_hi, y_lim = np.zeros(0), 0, 1, 1.0

    def px(v):
        return margin + (v - x_lo) / (x_hi - x_lo) * pw

    def py(e):
        return margin + (1 - (e + y_lim) / (2 * y_lim)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="{margin}" y="{margin}" width="{pw}" height="{ph}" fill="white" stroke="black"/>',
        f'<line x1="{margin}" y1="{py(0):.2f}" x2="{margin + pw}" y2="{py(0):.2f}" stroke="#888" stroke-dasharray="4 3"/>',
        f'<text x="{width / 2}" y="{height - 12}" text-anchor="middle" font-size="12">log10 t_sat (s)</text>',
        f'<text x="14" y="{height / 2}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 14 {height / 2})">relative error</text>',
        f'<text x="{width / 2}" y="24" text-anchor="middle" font-size="13">{escape(title)}</text>',
    ]
    for tick in range(x_lo, x_hi + 1):
        out.append(f'<text x="{px(tick):.2f}" y="{margin + ph + 16}" text-anchor="middle" font-size="10">{tick}</text>')
    for e in (-y_lim / 1.1, 0.0, y_lim / 1.1):
        out.append(f'<text x="{margin - 4}" y="{py(e) + 3:.2f}" text-anchor="end" font-size="10">{e:.3g}</text>')
    out.append('<g class="samples">')
    for x, e, r in zip(lx.tolist(), report.eps.tolist(), report.dose_ratio.tolist()):
        grey = int(round(220 * (1.0 - min(max(r, 0.0), 1.0))))
        out.append(f'<circle cx="{px(x):.2f}" cy="{py(e):.2f}" r="1.5" fill="rgb({grey},{grey},{grey})"/>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def export_report(obj, path, format: str = "csv") -> None:
    """Write an EvalReport (scatter CSV or SVG) or a SweepResult (sweep CSV)."""
    if isinstance(obj, SweepResult):
        if format != "csv":
            raise ValueError("sweeps export to csv only")
        write_sweep_csv(obj.table(), path)
    elif isinstance(obj, EvalReport):
        if format == "csv":
            write_scatter_csv(obj, path)
        elif format in ("svg", "svg-scatter"):
            Path(path).write_text(scatter_svg(obj))
        else:
            raise ValueError(f"unknown format {format!r}")
    else:
        raise TypeError(f"cannot export {type(obj).__name__}")
