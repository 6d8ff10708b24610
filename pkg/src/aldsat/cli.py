"""
Command-line entry point.

    aldsat generate --points 20 --samples 100000 --seed 1 --out train.alds
    aldsat train --data train.alds --hidden 30 --out model.json
    aldsat evaluate --model model.json --data test.alds --out-dir eval/
    aldsat sweep-points --out-dir runs/points
    aldsat sweep-width --out-dir runs/width
    aldsat reproduce-all --scale ci --out-dir runs/ci

Exit codes: 0 success, 1 internal error, 2 usage or validation error.
Every subcommand also accepts ``--config FILE`` (JSON object keyed by option
name, e.g. ``{"samples": 1000}``); explicit flags win over the file.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import platform
import sys
import traceback
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .dataset import (
    REFERENCE_SPACINGS,
    Dataset,
    DatasetFormatError,
    ParameterPriors,
    Prior,
    compute_normalization,
    export_csv,
    generate_dataset,
    load,
    make_meta,
    save,
)
from .evaluation import (
    DEFAULT_POINT_COUNTS,
    DEFAULT_WIDTHS,
    REFERENCE_ARCHITECTURES,
    arch_label,
    evaluate,
    fit_and_evaluate,
    scatter_svg,
    write_scatter_csv,
    write_sweep_csv,
)
from .neuralnet import ModelFormatError, TrainConfig, architecture, count_parameters, init_mlp, load_model, save_model, train
from .transport import ReactorGeometry

log = logging.getLogger("aldsat")

SCALES = {
    "ci": {"train_samples": 10_000, "test_samples": 1_000, "epochs": 30},
    "paper": {"train_samples": 100_000, "test_samples": 10_000, "epochs": 100},
}


class UsageError(Exception):
    """Invalid flags, configuration or inputs (exit code 2)."""


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def versions() -> dict:
    import numba

    return {"aldsat": __version__, "numpy": np.__version__, "numba": numba.__version__, "python": platform.python_version()}


def write_manifest(path, args: argparse.Namespace, inputs=(), outputs=(), base=None, **extra) -> None:
    base = Path(base) if base else Path(path).parent

    def rel(p):
        p = Path(p)
        try:
            return str(p.resolve().relative_to(base.resolve()))
        except ValueError:
            return str(p)

    flags = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "config")}
    manifest = {
        "command": args.command,
        "flags": json.loads(json.dumps(flags, default=str)),
        "versions": versions(),
        "inputs": {rel(p): sha256(p) for p in inputs},
        "outputs": {rel(p): sha256(p) for p in outputs if Path(p).exists()},
        **extra,
    }
    write_json(path, manifest)


def parse_int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def parse_hidden(text: str) -> tuple[int, ...]:
    if text.strip().lower() in ("none", "shallow", ""):
        return ()
    widths = tuple(parse_int_list(text.replace("-", ",")))
    if any(w < 1 for w in widths):
        raise argparse.ArgumentTypeError("hidden widths must be positive")
    return widths


def parse_prior(text: str) -> tuple[str, Prior]:
    """``name=low:high`` or ``name=low:high:log``."""
    try:
        name, spec = text.split("=", 1)
        parts = spec.split(":")
        low, high = float(parts[0]), float(parts[1])
        log_scale = len(parts) > 2 and parts[2] == "log"
        return name.strip(), Prior(low, high, log_scale)
    except (ValueError, IndexError) as exc:
        raise argparse.ArgumentTypeError(f"bad prior {text!r}: {exc}") from None


def geometry_from(args) -> ReactorGeometry:
    try:
        return ReactorGeometry(args.length, args.radius, args.velocity)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def priors_from(args) -> ParameterPriors:
    overrides = dict(args.prior or [])
    if getattr(args, "wide_growth", False):
        overrides.setdefault("growth_per_cycle", Prior(0.02, 0.2))
    unknown = set(overrides) - set(ParameterPriors.__dataclass_fields__)
    if unknown:
        raise UsageError(f"unknown prior(s): {sorted(unknown)}")
    try:
        return ParameterPriors(**overrides)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def check_points(n: int, allow_custom: bool) -> None:
    if n not in REFERENCE_SPACINGS and not allow_custom:
        raise UsageError(f"--points must be one of {sorted(REFERENCE_SPACINGS)} (use --allow-custom to override)")
    if n < 1:
        raise UsageError("--points must be positive")


def check_output_file(path) -> Path:
    path = Path(path)
    if not path.parent.is_dir():
        raise UsageError(f"output directory {path.parent} does not exist")
    if path.exists() and path.is_dir():
        raise UsageError(f"{path} is a directory")
    return path


def ensure_dir(path) -> Path:
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create {path}: {exc}") from exc
    return path


def load_dataset(path) -> Dataset:
    if not Path(path).is_file():
        raise UsageError(f"dataset {path} not found")
    return load(path)


def build_meta(n, seed, args):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        meta = make_meta(n, seed, geometry_from(args), priors_from(args), args.theta_sat)
    if not meta.is_standard:
        print(f"note: non-standard dataset ({n} points at {meta.spacing:g} m spacing)", file=sys.stderr)
    return meta


def train_config(args, train_seed: int) -> TrainConfig:
    try:
        return TrainConfig(
            learning_rate=args.lr,
            epochs=args.epochs,
            batch_size=args.batch_size,
            shuffle_seed=train_seed,
            init_seed=train_seed,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def protocol_line(cfg: TrainConfig) -> str:
    return f"epochs={cfg.epochs} batch={cfg.batch_size} lr={cfg.learning_rate:g}"


# ---------------------------------------------------------------------------
# generate / train / evaluate
# ---------------------------------------------------------------------------


def cmd_generate(args) -> int:
    check_points(args.points, args.allow_custom)
    out = check_output_file(args.out)
    if args.samples < 1:
        raise UsageError("--samples must be >= 1")
    meta = build_meta(args.points, args.seed, args)
    dataset = generate_dataset(meta, args.samples, workers=args.workers)
    if args.with_stats:
        dataset = dataset.with_stats(compute_normalization(dataset))
    save(dataset, out)
    outputs = [out]
    if args.csv:
        export_csv(dataset, check_output_file(args.csv))
        outputs.append(Path(args.csv))
    write_manifest(out.with_name(out.name + ".manifest.json"), args, outputs=outputs, seeds={"data": args.seed})
    print(f"wrote {len(dataset)} samples, {meta.n_points} points at {meta.spacing:g} m spacing -> {out}")
    return 0


def cmd_train(args) -> int:
    out = check_output_file(args.out)
    data = load_dataset(args.data)
    cfg = train_config(args, args.seed)
    stats = data.stats or compute_normalization(data)
    dims = architecture(data.meta.n_points, args.hidden)
    print(protocol_line(cfg))
    result = train(init_mlp(dims, cfg.init_seed), data.with_stats(stats), cfg)
    save_model(result.mlp, out)
    loss_csv = out.with_suffix(".loss.csv")
    lines = ["epoch,loss", f"0,{result.initial_loss!r}"]
    lines += [f"{i + 1},{loss!r}" for i, loss in enumerate(result.loss_history)]
    loss_csv.write_text("\n".join(lines) + "\n")
    write_manifest(
        out.with_suffix(".manifest.json"), args, inputs=[args.data], outputs=[out, loss_csv],
        seeds={"train": args.seed}, protocol=protocol_line(cfg), dims=list(dims), param_count=count_parameters(dims),
    )
    final = result.loss_history[-1] if result.loss_history else result.initial_loss
    print(f"trained {arch_label(args.hidden)} ({count_parameters(dims)} parameters), final loss {final:.6g} -> {out}")
    return 0


def cmd_evaluate(args) -> int:
    out_dir = ensure_dir(args.out_dir)
    if not Path(args.model).is_file():
        raise UsageError(f"model {args.model} not found")
    model = load_model(args.model)
    data = load_dataset(args.data)
    if model.n_inputs != data.meta.n_points + 1:
        raise UsageError(
            f"model expects {model.n_inputs - 1} thickness values but dataset has {data.meta.n_points} points"
        )
    report = evaluate(model, data)
    stem = args.name
    write_json(out_dir / f"{stem}.json", {**report.summary(), "arch": arch_label(model.hidden), "n_points": data.meta.n_points})
    write_scatter_csv(report, out_dir / f"{stem}_scatter.csv")
    (out_dir / f"{stem}_scatter.svg").write_text(scatter_svg(report, title=f"{arch_label(model.hidden)}, n={data.meta.n_points}"))
    write_manifest(
        out_dir / f"{stem}.manifest.json", args, inputs=[args.model, args.data],
        outputs=[out_dir / f"{stem}.json", out_dir / f"{stem}_scatter.csv", out_dir / f"{stem}_scatter.svg"],
        base=out_dir,
    )
    print(f"mean_eps={report.mean_eps:.6f} std_eps={report.std_eps:.6f} n_samples={report.n_samples}")
    return 0


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Cell:
    n_points: int
    hidden: tuple[int, ...]

    @property
    def label(self) -> str:
        return arch_label(self.hidden)

    @property
    def name(self) -> str:
        return f"n{self.n_points}_{self.label}"


class Workspace:
    """Datasets, trained models and per-cell results under one directory, reused across runs."""

    def __init__(self, root, args, train_samples: int, test_samples: int, cfg: TrainConfig):
        self.root = ensure_dir(root)
        self.args = args
        self.train_samples = train_samples
        self.test_samples = test_samples
        self.cfg = cfg
        self.data_seed = args.data_seed
        for sub in ("data", "models", "cells", "figures"):
            ensure_dir(self.root / sub)

    def dataset_paths(self, n: int) -> tuple[Path, Path]:
        return self.root / "data" / f"train_n{n}.alds", self.root / "data" / f"test_n{n}.alds"

    def _dataset(self, path: Path, n: int, seed: int, size: int) -> Dataset:
        meta = build_meta(n, seed, self.args)
        if path.exists() and not self.args.force:
            try:
                d = load(path)
                if d.meta == meta and len(d) == size:
                    return d
            except DatasetFormatError:
                pass
            log.info("regenerating %s", path)
        d = generate_dataset(meta, size, workers=self.args.workers)
        save(d, path)
        return d

    def datasets(self, n: int) -> tuple[Dataset, Dataset]:
        train_path, test_path = self.dataset_paths(n)
        train_set = self._dataset(train_path, n, self.data_seed, self.train_samples)
        test_set = self._dataset(test_path, n, self.data_seed + 1, self.test_samples)
        if train_set.stats is None:
            train_set = train_set.with_stats(compute_normalization(train_set))
            save(train_set, train_path)
        return train_set, test_set

    def fingerprint(self, cell: Cell) -> dict:
        train_path, test_path = self.dataset_paths(cell.n_points)
        return {
            "n_points": cell.n_points,
            "hidden": list(cell.hidden),
            "train_config": asdict(self.cfg),
            "train_sha256": sha256(train_path),
            "test_sha256": sha256(test_path),
        }

    def cell_path(self, cell: Cell) -> Path:
        return self.root / "cells" / f"{cell.name}.json"

    def cached(self, cell: Cell):
        path = self.cell_path(cell)
        if self.args.force or not path.exists():
            return None
        doc = json.loads(path.read_text())
        return doc if doc.get("fingerprint") == self.fingerprint(cell) else None

    def run(self, cells: list[Cell]) -> dict[Cell, dict]:
        cells = list(dict.fromkeys(cells))
        for n in sorted({c.n_points for c in cells}):
            self.datasets(n)
        results = {c: self.cached(c) for c in cells}
        todo = [c for c in cells if results[c] is None]
        if todo:
            log.info("training %d cell(s), %d reused", len(todo), len(cells) - len(todo))
            jobs = [(str(self.root), c, self.cfg) for c in todo]
            if self.args.workers > 1 and len(todo) > 1:
                with ProcessPoolExecutor(max_workers=self.args.workers) as pool:
                    docs = list(pool.map(_run_cell, jobs))
            else:
                docs = [_run_cell(job) for job in jobs]
            for cell, doc in zip(todo, docs):
                doc["fingerprint"] = self.fingerprint(cell)
                write_json(self.cell_path(cell), doc)
                results[cell] = doc
        return results


def _run_cell(job) -> dict:
    root, cell, cfg = job
    root = Path(root)
    train_set = load(root / "data" / f"train_n{cell.n_points}.alds")
    test_set = load(root / "data" / f"test_n{cell.n_points}.alds")
    model, report = fit_and_evaluate(train_set, test_set, cell.hidden, cfg)
    save_model(model, root / "models" / f"{cell.name}.json")
    write_scatter_csv(report, root / "figures" / f"scatter_{cell.name}.csv")
    (root / "figures" / f"scatter_{cell.name}.svg").write_text(
        scatter_svg(report, title=f"{cell.label}, n={cell.n_points}")
    )
    return {
        "n_points": cell.n_points,
        "arch": cell.label,
        "param_count": model.n_params,
        **report.summary(),
    }


def _sweep_rows(results: dict[Cell, dict], cells: list[Cell], arch_column=None) -> list[dict]:
    rows = []
    for c in cells:
        doc = results[c]
        rows.append({**doc, "arch": arch_column(c) if arch_column else doc["arch"]})
    return rows


def _workspace(args, scale="paper") -> Workspace:
    # explicit flags beat the scale preset
    for key in ("train_samples", "test_samples", "epochs"):
        if getattr(args, key) is None:
            setattr(args, key, SCALES[scale][key])
    train_samples, test_samples = args.train_samples, args.test_samples
    if train_samples < 2 or test_samples < 1:
        raise UsageError("need at least 2 training and 1 test sample")
    return Workspace(args.out_dir, args, train_samples, test_samples, train_config(args, args.train_seed))


def cmd_sweep_points(args) -> int:
    for n in args.counts:
        check_points(n, args.allow_custom)
    archs = [parse_hidden(a) for a in args.archs.split(",")] if args.archs else list(REFERENCE_ARCHITECTURES.values())
    ws = _workspace(args)
    cells = [Cell(n, h) for n in sorted(args.counts) for h in archs]
    results = ws.run(cells)
    out = ws.root / "sweep_points.csv"
    write_sweep_csv(_sweep_rows(results, cells), out)
    write_manifest(ws.root / "sweep_points.manifest.json", args, outputs=[out], seeds=_seeds(args))
    print(f"wrote {len(cells)} rows -> {out}")
    return 0


def cmd_sweep_width(args) -> int:
    check_points(args.points, args.allow_custom)
    ws = _workspace(args)
    cells = [Cell(args.points, (w,)) for w in args.widths]
    results = ws.run(cells)
    out = ws.root / "sweep_width.csv"
    write_sweep_csv(_sweep_rows(results, cells), out)
    write_manifest(ws.root / "sweep_width.manifest.json", args, outputs=[out], seeds=_seeds(args))
    print(f"wrote {len(cells)} rows -> {out}")
    return 0


def _seeds(args) -> dict:
    return {"data": args.data_seed, "train": args.train_seed}


def acceptance_checks(points: dict, widths: dict, deep: dict, shallow: dict, scale: str) -> dict:
    """Pass/fail of the sweep and accuracy gates on one reproduction run."""
    factor = 2.0 if scale == "ci" else 1.0
    return {
        "param_count_691": deep["param_count"] == 691,
        "deep1_std_eps_le_0.05": deep["std_eps"] <= 0.05 * factor,
        "deep1_abs_mean_eps_le_0.02": abs(deep["mean_eps"]) <= 0.02 * factor,
        "shallow_std_ge_3x_deep1": shallow["std_eps"] >= 3 * deep["std_eps"],
        "points_n8_le_2x_n20": points[8] <= 2 * points[20],
        "points_n4_gt_n8": points[4] > points[8],
        "width_M20_le_1.5x_M30": widths[20] <= 1.5 * widths[30],
        "width_M2_ge_2x_M30": widths[2] >= 2 * widths[30],
    }


def cmd_reproduce_all(args) -> int:
    ws = _workspace(args, scale=args.scale)
    shallow, deep1, deep2 = (Cell(20, h) for h in REFERENCE_ARCHITECTURES.values())
    point_cells = [Cell(n, h) for n in DEFAULT_POINT_COUNTS for h in REFERENCE_ARCHITECTURES.values()]
    width_cells = [Cell(20, (w,)) for w in DEFAULT_WIDTHS]
    results = ws.run(point_cells + width_cells)

    write_sweep_csv(_sweep_rows(results, point_cells), ws.root / "sweep_points.csv")
    write_sweep_csv(_sweep_rows(results, width_cells), ws.root / "sweep_width.csv")
    train20, _ = ws.datasets(20)
    p1, p99 = np.percentile(train20.saturation_time, [1, 99])
    models = {c.label: results[c] for c in (shallow, deep1, deep2)}
    points = {n: results[Cell(n, (30,))]["std_eps"] for n in DEFAULT_POINT_COUNTS}
    widths = {w: results[Cell(20, (w,))]["std_eps"] for w in DEFAULT_WIDTHS}
    summary = {
        "scale": args.scale,
        "train_samples": ws.train_samples,
        "test_samples": ws.test_samples,
        "protocol": protocol_line(ws.cfg),
        "seeds": _seeds(args),
        "param_count": results[deep1]["param_count"],
        "models": models,
        "sweep_points": {f"{r['n_points']}/{r['arch']}": r for r in _sweep_rows(results, point_cells)},
        "sweep_width": {str(w): results[Cell(20, (w,))] for w in DEFAULT_WIDTHS},
        "tsat_p99_over_p1": float(p99 / p1),
        "checks": acceptance_checks(points, widths, results[deep1], results[shallow], args.scale),
    }
    for doc in [*summary["models"].values(), *summary["sweep_points"].values(), *summary["sweep_width"].values()]:
        doc.pop("fingerprint", None)
    write_json(ws.root / "summary.json", summary)
    outputs = [ws.root / "summary.json", ws.root / "sweep_points.csv", ws.root / "sweep_width.csv"]
    write_manifest(ws.root / "manifest.json", args, outputs=outputs, seeds=_seeds(args))
    for label, doc in models.items():
        print(f"{label:>8}: mean_eps={doc['mean_eps']:+.5f} std_eps={doc['std_eps']:.5f}")
    failed = [k for k, ok in summary["checks"].items() if not ok]
    print("all checks passed" if not failed else f"failed checks: {', '.join(failed)}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _add_physics(p):
    g = p.add_argument_group("reactor and priors")
    g.add_argument("--length", type=float, default=ReactorGeometry.length, help="deposition zone length (m)")
    g.add_argument("--radius", type=float, default=ReactorGeometry.radius, help="tube radius (m)")
    g.add_argument("--velocity", type=float, default=ReactorGeometry.gas_velocity, help="gas velocity (m/s)")
    g.add_argument("--theta-sat", type=float, default=0.99, help="coverage defining saturation")
    g.add_argument("--prior", type=parse_prior, action="append", metavar="NAME=LO:HI[:log]",
                   help="override one parameter prior (repeatable)")
    g.add_argument("--wide-growth", action="store_true", help="draw growth per cycle from [0.02, 0.2] nm")


def _add_training(p, epochs_default=100):
    g = p.add_argument_group("training")
    g.add_argument("--epochs", type=int, default=epochs_default)
    g.add_argument("--batch-size", type=int, default=64)
    g.add_argument("--lr", type=float, default=1e-3)


def _add_sweep_common(p):
    _add_physics(p)
    _add_training(p, epochs_default=None)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--train-samples", type=int, default=None, help="default: 100000, or the --scale preset")
    p.add_argument("--test-samples", type=int, default=None, help="default: 10000, or the --scale preset")
    p.add_argument("--data-seed", type=int, default=1, help="train split seed; test split uses seed + 1")
    p.add_argument("--train-seed", type=int, default=1, help="initialization and shuffling seed")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--force", action="store_true", help="recompute cached datasets and cells")
    p.add_argument("--allow-custom", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aldsat", description=__doc__.split("\n\n")[0].strip())
    parser.add_argument("--version", action="version", version=f"aldsat {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a dataset file")
    p.add_argument("--points", type=int, default=20)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", required=True)
    p.add_argument("--csv", help="also export the records as CSV")
    p.add_argument("--with-stats", action="store_true", help="store normalization stats of this set")
    p.add_argument("--allow-custom", action="store_true", help="permit point counts outside the reference six")
    p.add_argument("--workers", type=int, default=1)
    _add_physics(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train a network on a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--hidden", type=parse_hidden, default=(30,), help="e.g. 30, 30,10 or none")
    p.add_argument("--seed", type=int, default=1, help="initialization and shuffling seed")
    p.add_argument("--out", required=True)
    _add_training(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a model on a test set")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--name", default="report")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep-points", help="accuracy versus number of profile points")
    p.add_argument("--counts", type=parse_int_list, default=list(DEFAULT_POINT_COUNTS))
    p.add_argument("--archs", default=None, help="comma list of shallow, 30, 30-10 ... (default: all three)")
    _add_sweep_common(p)
    p.set_defaults(func=cmd_sweep_points)

    p = sub.add_parser("sweep-width", help="accuracy versus hidden layer width")
    p.add_argument("--widths", type=parse_int_list, default=list(DEFAULT_WIDTHS))
    p.add_argument("--points", type=int, default=20)
    _add_sweep_common(p)
    p.set_defaults(func=cmd_sweep_width)

    p = sub.add_parser("reproduce-all", help="datasets, models, sweeps and summary in one run")
    p.add_argument("--scale", choices=sorted(SCALES), default="ci")
    _add_sweep_common(p)
    p.set_defaults(func=cmd_reproduce_all)

    for p in _subparsers(parser).values():
        p.add_argument("--config", help="JSON file of option defaults; flags win")
    return parser


def _subparsers(parser) -> dict:
    return next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction)).choices


def _apply_config(parser, argv: list[str]) -> None:
    """Load ``--config`` (if any) into the chosen subcommand's defaults."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    command = next((tok for tok in rest if not tok.startswith("-")), None)
    choices = _subparsers(parser)
    if known.config is None or command not in choices:
        return
    try:
        config = json.loads(Path(known.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        parser.error(f"cannot read config {known.config}: {exc}")
    if not isinstance(config, dict):
        parser.error("config file must hold a JSON object")
    subparser = choices[command]
    actions = {a.dest: a for a in subparser._actions if a.dest not in ("help", "config", "func")}
    unknown = sorted(set(config) - set(actions))
    if unknown:
        parser.error(f"unknown config key(s) for {command}: {', '.join(unknown)}")
    converted = {}
    for key, value in config.items():
        action = actions[key]
        if isinstance(value, str) and action.type is not None:
            value = action.type(value)
        action.required = False
        converted[key] = value
    # defaults, so explicit flags still win
    subparser.set_defaults(**converted)


def parse_args(argv=None) -> argparse.Namespace:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    _apply_config(parser, argv)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (UsageError, DatasetFormatError, ModelFormatError) as exc:
        print(f"aldsat {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception:  # noqa: BLE001
        traceback.print_exc()
        return 1


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
