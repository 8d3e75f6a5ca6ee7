"""Command-line surface: split, train, eval, ablate, predict, gradcheck.

Exit status contract: 0 on success, 1 for training/evaluation failures
(including failed gradient checks), 2 for input or configuration errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ARCH_NAMES, ExperimentConfig, resolve_config
from .data import (
    DatasetSplit,
    Sample,
    load_dataset,
    load_labels_csv,
    load_pgm,
    prepare,
    stratified_split,
)
from .errors import ConfigError, DataError, ShapeError, TrainingError, WeightFileError
from .losses import LOSS_KINDS, LossConfig
from .metrics import compute_metrics, confusion_from_predictions, render_confusion_figure, write_metrics_report
from .model import build, forward, load_weights, save_weights, vgg16_spec, vgg_tiny_spec, write_weight_file
from .optim import OptimizerConfig
from .train import evaluate, format_log_csv, run_training, to_model_input
from .verification import run_all_gradient_checks


def _arch_spec(config: ExperimentConfig, attention: bool | None = None):
    attn = config.attention if attention is None else attention
    h, w, c = config.input_shape
    if config.arch == "vgg16":
        return vgg16_spec(attention=attn, input_hw=(h, w), in_channels=c, dropout_rate=config.dropout)
    return vgg_tiny_spec(attention=attn, input_hw=(h, w), in_channels=c, dropout_rate=config.dropout)


def _require(config: ExperimentConfig, command: str, *field_names: str) -> None:
    missing = [name for name in field_names if not getattr(config, name)]
    if missing:
        flags = ", ".join("--" + name.replace("_", "-") for name in missing)
        raise ConfigError(f"{command} requires {flags}")


def _load_split(config: ExperimentConfig) -> DatasetSplit:
    path = Path(config.split)
    if not path.is_file():
        raise DataError(f"split manifest {path} does not exist")
    return DatasetSplit.from_json(path.read_text())


def _samples_by_ids(samples: list[Sample], ids: list[str], part: str) -> list[Sample]:
    by_id = {s.id: s for s in samples}
    missing = [i for i in ids if i not in by_id]
    if missing:
        raise DataError(f"{part} split names unknown sample ids: {missing[:5]}")
    return [by_id[i] for i in ids]


def _write_config_sidecar(artifact_path: str, config: ExperimentConfig) -> None:
    sidecar = Path(str(artifact_path) + ".config.json")
    sidecar.write_text(json.dumps(config.resolved_dict(), sort_keys=True, indent=2) + "\n")


def _best_weights_path(weights_out: str) -> str:
    p = Path(weights_out)
    if p.suffix:
        return str(p.with_name(p.stem + ".best" + p.suffix))
    return str(p) + ".best"


def cmd_split(config: ExperimentConfig) -> int:
    _require(config, "split", "data_dir", "labels", "out")
    records = load_labels_csv(config.labels)
    data_dir = Path(config.data_dir)
    for fname, _ in records:
        if not (data_dir / fname).is_file():
            raise DataError(f"labelled image {data_dir / fname} does not exist")
    split = stratified_split(records, seed=config.seed)
    Path(config.out).write_text(split.to_json())
    print(f"wrote {config.out} (train {len(split.train)}, validation {len(split.validation)}, "
          f"test {len(split.test)})")
    return 0


def _train_once(config: ExperimentConfig, samples: list[Sample], split: DatasetSplit,
                attention: bool | None = None):
    model = build(_arch_spec(config, attention), config.seed)
    if config.weights_in:
        load_weights(model, config.weights_in)
    result = run_training(
        model,
        _samples_by_ids(samples, split.train, "train"),
        _samples_by_ids(samples, split.validation, "validation"),
        loss_config=LossConfig(kind=config.loss, alpha=config.alpha, beta=config.beta),
        opt_config=OptimizerConfig(lr0=config.lr0, decay=config.decay),
        epochs=config.epochs,
        batch_size=config.batch_size,
        seed=config.seed,
        threshold=config.threshold,
    )
    return model, result


def cmd_train(config: ExperimentConfig) -> int:
    _require(config, "train", "data_dir", "labels", "split", "weights_out")
    log_out = config.log_out or str(config.weights_out) + ".log.csv"
    h, w, _ = config.input_shape
    samples = load_dataset(config.data_dir, config.labels, (h, w))
    split = _load_split(config)
    model, result = _train_once(config, samples, split)

    Path(log_out).write_text(format_log_csv(result.log))
    save_weights(model, config.weights_out)
    best_path = _best_weights_path(config.weights_out)
    write_weight_file(best_path, result.best_params)
    _write_config_sidecar(log_out, config)
    print(f"wrote {config.weights_out}, {best_path}, {log_out} "
          f"(best validation accuracy {result.best_val_accuracy:.6f} at epoch {result.best_epoch})")
    return 0


def cmd_eval(config: ExperimentConfig) -> int:
    _require(config, "eval", "data_dir", "labels", "split", "weights_in", "report_out")
    figure_out = config.figure_out or str(Path(config.report_out).with_suffix(".svg"))
    h, w, _ = config.input_shape
    samples = load_dataset(config.data_dir, config.labels, (h, w))
    split = _load_split(config)
    test_samples = _samples_by_ids(samples, split.test, "test")
    model = build(_arch_spec(config), config.seed)
    load_weights(model, config.weights_in)
    loss_config = LossConfig(kind=config.loss, alpha=config.alpha, beta=config.beta)
    _, _, labels, predictions = evaluate(model, test_samples, loss_config, config.threshold)
    cm = confusion_from_predictions(labels, predictions, config.threshold)
    report = compute_metrics(cm)
    write_metrics_report(report, config.report_out, config.threshold, config.resolved_dict())
    render_confusion_figure(cm, figure_out)
    print(f"wrote {config.report_out}, {figure_out} (accuracy {report.accuracy:.6f}, mcc {report.mcc:.6f})")
    return 0


ABLATION_CSV_HEADER = "model,loss,sensitivity,specificity,precision,accuracy,f1,mcc"


def cmd_ablate(config: ExperimentConfig) -> int:
    _require(config, "ablate", "data_dir", "labels", "out")
    h, w, _ = config.input_shape
    samples = load_dataset(config.data_dir, config.labels, (h, w))
    if config.split:
        split = _load_split(config)
    else:
        split = stratified_split(samples, seed=config.seed)
    test_samples = _samples_by_ids(samples, split.test, "test")

    rows = [ABLATION_CSV_HEADER]
    for attention in (False, True):
        model_name = f"attention-{config.arch}" if attention else config.arch
        for loss_kind in LOSS_KINDS:
            cell = ExperimentConfig(**{**config.resolved_dict(), "attention": attention, "loss": loss_kind})
            try:
                model, _ = _train_once(cell, samples, split, attention)
                loss_config = LossConfig(kind=loss_kind, alpha=cell.alpha, beta=cell.beta)
                _, _, labels, predictions = evaluate(model, test_samples, loss_config, cell.threshold)
                r = compute_metrics(confusion_from_predictions(labels, predictions, cell.threshold))
                rows.append(f"{model_name},{loss_kind},{r.sensitivity:.6f},{r.specificity:.6f},"
                            f"{r.precision:.6f},{r.accuracy:.6f},{r.f1:.6f},{r.mcc:.6f}")
            except (TrainingError, ShapeError, ValueError) as exc:
                print(f"ablation cell {model_name}/{loss_kind} failed: {exc}", file=sys.stderr)
                rows.append(f"{model_name},{loss_kind},nan,nan,nan,nan,nan,nan")
    Path(config.out).write_text("\n".join(rows) + "\n")
    _write_config_sidecar(config.out, config)
    print(f"wrote {config.out} ({len(rows) - 1} cells)")
    return 0


def cmd_predict(config: ExperimentConfig, image_path: str) -> int:
    _require(config, "predict", "weights_in")
    path = Path(image_path)
    if not path.is_file():
        raise DataError(f"image {path} does not exist")
    h, w, _ = config.input_shape
    image = prepare(load_pgm(path), (h, w))
    model = build(_arch_spec(config), config.seed)
    load_weights(model, config.weights_in)
    score, _ = forward(model, to_model_input(image, model), training=False)
    label = "malignant" if score >= config.threshold else "benign"
    print(f"{path.name},{score:.6f},{label}")
    return 0


def cmd_gradcheck(config: ExperimentConfig) -> int:
    results = run_all_gradient_checks(seed=config.seed)
    failed = [r for r in results if not r.passed]
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{r.unit:<32s} max_rel_error={r.max_error:.3e}  {status}")
    print(f"{len(results) - len(failed)}/{len(results)} gradient checks passed (tolerance {results[0].tolerance:g})")
    return 1 if failed else 0


def _add_config_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--arch", choices=ARCH_NAMES)
    parser.add_argument("--attention", action=argparse.BooleanOptionalAction, default=None)
    parser.add_argument("--loss", choices=LOSS_KINDS)
    parser.add_argument("--alpha", type=float)
    parser.add_argument("--beta", type=float)
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--batch-size", type=int)
    parser.add_argument("--lr0", type=float)
    parser.add_argument("--decay", type=float)
    parser.add_argument("--dropout", type=float)
    parser.add_argument("--threshold", type=float)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--input-height", type=int)
    parser.add_argument("--input-width", type=int)
    parser.add_argument("--input-channels", type=int)
    parser.add_argument("--data", "--data-dir", dest="data_dir")
    parser.add_argument("--labels")
    parser.add_argument("--split")
    parser.add_argument("--weights-in")
    parser.add_argument("--weights-out")
    parser.add_argument("--report-out")
    parser.add_argument("--figure-out")
    parser.add_argument("--log-out")
    parser.add_argument("--out")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="attnvgg",
                                     description="Attention-gated VGG binary image classifier")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("split", "write a stratified train/validation/test manifest"),
        ("train", "train a model and write weights plus a training log"),
        ("eval", "evaluate weights on the test split and write report + figure"),
        ("ablate", "train and evaluate the 2 x 3 attention/loss grid"),
        ("predict", "score a single PGM image"),
        ("gradcheck", "verify every backward pass against finite differences"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_config_arguments(p)
        if name == "predict":
            p.add_argument("--image", required=True, help="path to a binary PGM image")
    return parser


_CONFIG_KEYS = [f for f in ExperimentConfig.__dataclass_fields__]


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        overrides = {k: getattr(args, k) for k in _CONFIG_KEYS if hasattr(args, k)}
        config = resolve_config(args.config, overrides)
        if args.command == "split":
            return cmd_split(config)
        if args.command == "train":
            return cmd_train(config)
        if args.command == "eval":
            return cmd_eval(config)
        if args.command == "ablate":
            return cmd_ablate(config)
        if args.command == "predict":
            return cmd_predict(config, args.image)
        return cmd_gradcheck(config)
    except (ConfigError, DataError, WeightFileError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (TrainingError, ShapeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())
