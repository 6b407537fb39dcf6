"""Command-line front end: synth, preprocess, train, eval, ablate, profiles.

Every command prints machine-parsable key=value summary lines, exits 0
on success and 2 on error, and produces byte-identical output files when
re-run with the same configuration and seed. Defaults reproduce the
reference setup (omega 0.9, 64x64 images, line profiles, kNN with k=1).

A JSON config file can preload any long-form flag (keys use underscores,
e.g. {"fill_mode": "stroke"}); explicit flags win over the file.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .evalmetrics import evaluate, render_report, report_key_values
from .features import (
    FLATTENED,
    LINE_PROFILE,
    MODES,
    flatten_baseline,
    lg_preprocess_batch,
    read_features_csv,
    write_features_csv,
)
from .imagecore import LabeledDataset, augment_dataset, load_dataset_dir, write_dataset_dir
from .learners import (
    ModelFormatError,
    NumericError,
    TrainConfig,
    knn_fit,
    load_model,
    mlp_init,
    mlp_train,
    model_size_bytes,
    save_model,
    write_history_csv,
)
from .synthshapes import (
    CLASS_NAMES,
    SPLITS,
    TABLE_COUNTS,
    generate_binary_dataset,
    generate_dataset,
)

ENV_SEED = "LGPREP_SEED"

REPRESENTATIONS = (LINE_PROFILE, FLATTENED)


class CliError(Exception):
    """User-facing command failure; message goes to stderr, exit code 2."""


@dataclass
class RunConfig:
    """Resolved options for one command; defaults mirror the reference setup."""

    command: str
    data: str | None = None
    features: str | None = None
    model: str | None = None
    out: str | None = None
    history: str | None = None
    size: int = 64
    omega: float = 0.9
    mode: str = "full"
    representation: str = LINE_PROFILE
    model_kind: str = "knn"
    k: int = 1
    learning_rate: float = 1e-3
    rho: float = 0.9
    epsilon: float = 1e-8
    batch_size: int = 32
    epochs: int = 50
    patience: int = 10
    seed: int = 0
    workers: int | None = None
    counts: dict | None = None
    fill_mode: str = "filled"
    binary: bool = False
    augment_train_to: int | None = None
    splits: tuple[str, ...] = SPLITS
    split_name: str = "test"


def _default_seed() -> int:
    raw = os.environ.get(ENV_SEED, "0")
    try:
        return int(raw)
    except ValueError as exc:
        raise CliError(f"{ENV_SEED} must be an integer, got {raw!r}") from exc


def _parse_counts(pairs: list[str] | None, binary: bool) -> dict | None:
    if not pairs:
        return None
    want = 2 if binary else len(CLASS_NAMES)
    counts = {}
    for pair in pairs:
        split, _, values = pair.partition("=")
        if not values:
            raise CliError(f"--counts expects split=v0,v1,... got {pair!r}")
        try:
            row = tuple(int(v) for v in values.split(","))
        except ValueError as exc:
            raise CliError(f"bad counts in {pair!r}: {exc}") from exc
        if len(row) != want:
            raise CliError(f"--counts for {split!r} needs {want} values, got {len(row)}")
        counts[split] = row
    return counts


def _features_of(ds: LabeledDataset, cfg: RunConfig) -> LabeledDataset:
    if cfg.representation == LINE_PROFILE:
        mat = lg_preprocess_batch(ds, omega=cfg.omega, mode=cfg.mode, workers=cfg.workers)
    else:
        mat = np.stack([flatten_baseline(img) for img, _ in ds.items])
    items = [(mat[i], label) for i, (_, label) in enumerate(ds.items)]
    return LabeledDataset(items=items, class_names=list(ds.class_names), split=ds.split)


def _emit(lines: list[str]) -> None:
    for line in lines:
        print(line)


# ---------------------------------------------------------------------------
# commands


def cmd_synth(cfg: RunConfig) -> int:
    if cfg.out is None:
        raise CliError("synth needs --out")
    if cfg.binary:
        datasets = generate_binary_dataset(size=cfg.size, counts=cfg.counts, seed=cfg.seed)
    else:
        counts = cfg.counts if cfg.counts is not None else TABLE_COUNTS
        datasets = generate_dataset(
            size=cfg.size, counts=counts, seed=cfg.seed, fill_mode=cfg.fill_mode
        )
    if cfg.augment_train_to is not None:
        if "train" not in datasets:
            raise CliError("--augment-train-to needs a train split in --counts")
        datasets["train"] = augment_dataset(
            datasets["train"], cfg.augment_train_to, seed=cfg.seed
        )
    lines = [f"out={cfg.out}", f"size={cfg.size}", f"seed={cfg.seed}"]
    for split, ds in datasets.items():
        written = write_dataset_dir(ds, Path(cfg.out) / split)
        lines.append(f"split_{split}={written}")
    _emit(lines)
    return 0


def cmd_preprocess(cfg: RunConfig) -> int:
    if cfg.data is None or cfg.out is None:
        raise CliError("preprocess needs --data and --out")
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = [
        f"omega={cfg.omega}",
        f"mode={cfg.mode}",
        f"representation={cfg.representation}",
    ]
    class_names: list[str] | None = None
    for split in cfg.splits:
        split_dir = Path(cfg.data) / split
        if not split_dir.is_dir():
            raise CliError(f"missing split directory {split_dir}")
        ds = load_dataset_dir(split_dir, split=split, size=cfg.size)
        if class_names is None:
            class_names = list(ds.class_names)
        elif class_names != list(ds.class_names):
            raise CliError(f"split {split} has class dirs {ds.class_names}, expected {class_names}")
        feats = _features_of(ds, cfg)
        path = out_dir / f"features_{split}.csv"
        rows = write_features_csv(path, feats)
        dim = feats.items[0][0].shape[0] if rows else 0
        lines.append(f"rows_{split}={rows}")
        lines.append(f"file_{split}={path}")
        if rows:
            lines.append(f"dim_{split}={dim}")
    if class_names:
        # sidecar: the CSV rows carry integer labels only
        (out_dir / "classes.txt").write_text("\n".join(class_names) + "\n", encoding="ascii")
    _emit(lines)
    return 0


def _sidecar_class_names(features_dir) -> list[str] | None:
    path = Path(features_dir) / "classes.txt"
    if not path.is_file():
        return None
    names = [line.strip() for line in path.read_text(encoding="ascii").splitlines() if line.strip()]
    return names or None


def _load_split_features(features_dir: str, split: str) -> LabeledDataset:
    path = Path(features_dir) / f"features_{split}.csv"
    if not path.is_file():
        raise CliError(f"missing features file {path}")
    return read_features_csv(path, class_names=_sidecar_class_names(features_dir), split=split)


def cmd_train(cfg: RunConfig) -> int:
    if cfg.features is None or cfg.out is None:
        raise CliError("train needs --features and --out")
    train_ds = _load_split_features(cfg.features, "train")
    lines = [f"model={cfg.model_kind}", f"representation={cfg.representation}"]
    if cfg.model_kind == "knn":
        model = knn_fit(train_ds, k=cfg.k, feature_kind=cfg.representation)
        lines.append(f"k={cfg.k}")
    elif cfg.model_kind == "mlp":
        val_ds = _load_split_features(cfg.features, "validation")
        dim = train_ds.items[0][0].shape[0]
        net = mlp_init(
            dim,
            len(train_ds.class_names),
            seed=cfg.seed,
            feature_kind=cfg.representation,
            class_names=list(train_ds.class_names),
        )
        tc = TrainConfig(
            learning_rate=cfg.learning_rate,
            rho=cfg.rho,
            epsilon=cfg.epsilon,
            batch_size=cfg.batch_size,
            epochs=cfg.epochs,
            patience=cfg.patience,
            seed=cfg.seed,
        )
        model, history = mlp_train(net, train_ds, val_ds, tc)
        history_path = Path(cfg.history) if cfg.history else Path(cfg.out).parent / "history.csv"
        write_history_csv(history_path, history)
        best = max(history, key=lambda row: row["val_acc"])
        lines.append(f"epochs_run={len(history)}")
        lines.append(f"best_val_acc={best['val_acc']:.6f}")
        lines.append(f"history={history_path}")
    else:
        raise CliError(f"unknown model kind {cfg.model_kind!r}")
    size = save_model(model, cfg.out)
    lines.append(f"train_rows={len(train_ds)}")
    lines.append(f"model_file={cfg.out}")
    lines.append(f"model_bytes={size}")
    _emit(lines)
    return 0


def cmd_eval(cfg: RunConfig) -> int:
    if cfg.model is None or cfg.features is None or cfg.out is None:
        raise CliError("eval needs --model, --features and --out")
    model = load_model(cfg.model)
    ds = read_features_csv(cfg.features, class_names=list(model.class_names), split=cfg.split_name)
    report = evaluate(model, ds)
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.txt").write_text(render_report(report, cfg.split_name), encoding="ascii")
    lines = report_key_values(report, cfg.split_name)
    with open(out_dir / "metrics.csv", "w", encoding="ascii") as fh:
        fh.write("key,value\n")
        for line in lines:
            key, _, value = line.partition("=")
            fh.write(f"{key},{value}\n")
    if report.roc_points is not None:
        fpr, tpr, thr = report.roc_points
        with open(out_dir / "roc.csv", "w", encoding="ascii") as fh:
            fh.write("fpr,tpr,threshold\n")
            for f, t, h in zip(fpr, tpr, thr):
                fh.write(f"{f:.17g},{t:.17g},{h:.17g}\n")
        lines.append(f"roc_file={out_dir / 'roc.csv'}")
    _emit(lines)
    return 0


def cmd_ablate(cfg: RunConfig) -> int:
    if cfg.data is None or cfg.out is None:
        raise CliError("ablate needs --data and --out")
    train_raw = load_dataset_dir(Path(cfg.data) / "train", split="train", size=cfg.size)
    test_raw = load_dataset_dir(Path(cfg.data) / "test", split="test", size=cfg.size)
    removed_of_mode = {"full": "none", "no_convolution": "convolution", "no_shift": "shift"}
    blocks = []
    accs = {}
    for mode in MODES:
        mode_cfg = RunConfig(
            command="ablate",
            omega=cfg.omega,
            mode=mode,
            representation=LINE_PROFILE,
            workers=cfg.workers,
        )
        model = knn_fit(_features_of(train_raw, mode_cfg), k=cfg.k)
        report = evaluate(model, _features_of(test_raw, mode_cfg))
        accs[mode] = report.accuracy
        block = [f"removed={removed_of_mode[mode]}", f"mode={mode}"]
        block.extend(report_key_values(report, "test"))
        blocks.append("\n".join(block))
    text = "\n\n".join(blocks) + "\n"
    out_path = Path(cfg.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(text, encoding="ascii")
    print(text, end="")
    print(f"delta_no_convolution={accs['full'] - accs['no_convolution']:.6f}")
    print(f"delta_no_shift={accs['full'] - accs['no_shift']:.6f}")
    print(f"report_file={out_path}")
    return 0


def cmd_profiles(cfg: RunConfig) -> int:
    if cfg.features is None or cfg.out is None:
        raise CliError("profiles needs --features and --out")
    ds = read_features_csv(cfg.features, class_names=_sidecar_class_names(Path(cfg.features).parent))
    mat = ds.stack()
    labels = ds.labels()
    dim = mat.shape[1]
    if dim % 2:
        raise CliError(f"feature dim {dim} is not an even line-profile length")
    half = dim // 2
    names = list(ds.class_names)
    columns = []
    header = ["index"]
    for ci, name in enumerate(names):
        rows = mat[labels == ci]
        if rows.shape[0] == 0:
            raise CliError(f"class {name} has no instances")
        mean = rows.mean(axis=0)
        columns.extend([mean[:half], mean[half:]])
        header.extend([f"{name}_x", f"{name}_y"])
    out_path = Path(cfg.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", encoding="ascii") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(half):
            cells = [str(i)] + [f"{col[i]:.17g}" for col in columns]
            fh.write(",".join(cells) + "\n")
    _emit(
        [
            f"classes={len(names)}",
            f"profile_len={half}",
            f"rows={half}",
            f"file={out_path}",
        ]
    )
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=_default_seed(), help="master seed (env LGPREP_SEED)")
    p.add_argument("--config", type=str, default=None, help="JSON file preloading flag defaults")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lgprep",
        description="frequency-domain line-profile preprocessing and classifiers",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic shape corpus as split directories")
    p.add_argument("--out", required=True)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--counts", action="append", metavar="SPLIT=N0,N1,...",
                   help="per-class counts for one split; repeatable")
    p.add_argument("--fill-mode", choices=("filled", "stroke", "mixed"), default="filled")
    p.add_argument("--binary", action="store_true", help="two-class texture/object proxy corpus")
    p.add_argument("--augment-train-to", type=int, default=None)
    _add_common(p)

    p = sub.add_parser("preprocess", help="reduce image splits to feature CSVs")
    p.add_argument("--data", required=True, help="corpus root with split subdirectories")
    p.add_argument("--out", required=True, help="directory for features_<split>.csv")
    p.add_argument("--splits", type=str, default=",".join(SPLITS))
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--omega", type=float, default=0.9)
    p.add_argument("--mode", choices=MODES, default="full")
    p.add_argument("--representation", choices=REPRESENTATIONS, default=LINE_PROFILE)
    p.add_argument("--workers", type=int, default=None)
    _add_common(p)

    p = sub.add_parser("train", help="fit a classifier on feature CSVs")
    p.add_argument("--features", required=True, help="directory holding features_<split>.csv")
    p.add_argument("--out", required=True, help="model file path")
    p.add_argument("--model", dest="model_kind", choices=("knn", "mlp"), default="knn")
    p.add_argument("--representation", choices=REPRESENTATIONS, default=LINE_PROFILE)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--rho", type=float, default=0.9)
    p.add_argument("--epsilon", type=float, default=1e-8)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--patience", type=int, default=10)
    p.add_argument("--history", type=str, default=None, help="epoch metrics CSV (mlp only)")
    _add_common(p)

    p = sub.add_parser("eval", help="score a model on one feature CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True, help="one features_<split>.csv file")
    p.add_argument("--out", required=True, help="directory for report.txt/metrics.csv/roc.csv")
    p.add_argument("--split-name", type=str, default="test")
    _add_common(p)

    p = sub.add_parser("ablate", help="compare full/no_convolution/no_shift side by side")
    p.add_argument("--data", required=True, help="corpus root with train/ and test/")
    p.add_argument("--out", required=True, help="text report path")
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--omega", type=float, default=0.9)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--workers", type=int, default=None)
    _add_common(p)

    p = sub.add_parser("profiles", help="per-class mean line profiles as CSV")
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    _add_common(p)

    return parser


def _apply_config_file(parser: argparse.ArgumentParser, argv: list[str]) -> list[str]:
    """Preload defaults from --config JSON; explicit flags still win."""
    probe = argparse.ArgumentParser(add_help=False)
    probe.add_argument("--config", type=str, default=None)
    known, _ = probe.parse_known_args(argv)
    if known.config is None:
        return argv
    try:
        with open(known.config, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read config {known.config}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise CliError(f"config {known.config} must hold a JSON object")
    for sub_action in parser._subparsers._group_actions:  # noqa: SLF001 - argparse offers no API
        for sub_parser in sub_action.choices.values():
            valid = {a.dest for a in sub_parser._actions}
            sub_parser.set_defaults(**{k: v for k, v in cfg.items() if k in valid})
    return argv


_COMMANDS = {
    "synth": cmd_synth,
    "preprocess": cmd_preprocess,
    "train": cmd_train,
    "eval": cmd_eval,
    "ablate": cmd_ablate,
    "profiles": cmd_profiles,
}


def _config_from_namespace(ns: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(command=ns.command)
    for key, value in vars(ns).items():
        if key == "config" or value is None:
            continue
        if key == "counts":
            cfg.counts = _parse_counts(value, getattr(ns, "binary", False))
        elif key == "splits" and isinstance(value, str):
            cfg.splits = tuple(s for s in value.split(",") if s)
        elif hasattr(cfg, key):
            setattr(cfg, key, value)
    return cfg


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _apply_config_file(parser, argv)
        ns = parser.parse_args(argv)
        cfg = _config_from_namespace(ns)
        return _COMMANDS[cfg.command](cfg)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError, ModelFormatError, NumericError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
