"""Command-line surface: one subcommand per pipeline stage plus `run`.

Exit codes are stable for scripting: 0 success, 2 configuration or usage
error, 3 stage failure.
"""

from __future__ import annotations

import functools
import logging
import os
import sys
from pathlib import Path

import click
import numpy as np

from . import backbone as backbone_ops
from . import metrics as metrics_ops
from .augment import AugmentationConfig, augment_split
from .dataset import DatasetManifest, ingest, scan, stratified_split
from .features import load_features, save_features
from .head import load_head, predict, save_head
from .optim import HyperParams
from .pipeline import (
    ConfigError,
    StageError,
    evaluate_features,
    load_run_config,
    run_pipeline,
)
from .trainer import TrainConfig, train, write_epoch_csv
from .tuner import SearchSpace, run_search, save_tune_result

EXIT_CONFIG = 2
EXIT_STAGE = 3


def _fail(code: int, message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _guarded(fn):
    """Map exceptions to the stable exit codes."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            _fail(EXIT_CONFIG, str(exc))
        except StageError as exc:
            _fail(EXIT_STAGE, str(exc))
        except (ValueError, OSError) as exc:
            _fail(EXIT_STAGE, str(exc))

    return wrapper


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Enable info logging.")
def main(verbose: bool) -> None:
    """Frozen-backbone transfer-learning pest classifier."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")


@main.command("ingest")
@click.option("--root", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@_guarded
def ingest_cmd(root: str, out: str) -> None:
    """Scan a class-per-folder image directory into a manifest."""
    manifest, skipped = scan(root)
    manifest.validate()
    manifest.save(out)
    counts = manifest.counts_by_split()
    click.echo(f"{len(manifest.samples)} samples in {manifest.class_count()} classes "
               f"({counts['unassigned']} unassigned); skipped {len(skipped)} "
               f"undecodable file(s)")


@main.command("split")
@click.option("--manifest", "manifest_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--train", default=0.7, show_default=True)
@click.option("--test", default=0.15, show_default=True)
@click.option("--val", default=0.15, show_default=True)
@click.option("--seed", default=0, show_default=True)
@_guarded
def split_cmd(manifest_path: str, out: str, train: float, test: float, val: float,
              seed: int) -> None:
    """Assign a stratified train/test/validation split."""
    manifest = DatasetManifest.load(manifest_path)
    result = stratified_split(manifest, (train, test, val), seed)
    result.save(out)
    counts = result.counts_by_split()
    click.echo(f"train={counts['train']} test={counts['test']} "
               f"validation={counts['validation']}")


@main.command("augment")
@click.option("--manifest", "manifest_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--out-manifest", type=click.Path(dir_okay=False),
              help="Defaults to <out>/manifest.json")
@click.option("--n", default=1, show_default=True, help="Augmentation sweeps.")
@click.option("--k", default=6, show_default=True, help="Variants per sweep per image.")
@click.option("--seed", default=0, show_default=True)
@_guarded
def augment_cmd(manifest_path: str, out_dir: str, out_manifest: str | None,
                n: int, k: int, seed: int) -> None:
    """Materialize the augmented training split to disk."""
    manifest = DatasetManifest.load(manifest_path)
    config = AugmentationConfig(iterations=n, copies_per_image=k, seed=seed)
    result = augment_split(manifest, config, out_dir)
    target = out_manifest or str(Path(out_dir) / "manifest.json")
    result.save(target)
    click.echo(f"{len(result.split_samples('train'))} train entries -> {target}")


@main.command("extract")
@click.option("--manifest", "manifest_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--graph", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--sidecar", type=click.Path(exists=True, dir_okay=False))
@click.option("--split", required=True,
              type=click.Choice(["train", "validation", "test", "unassigned"]))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--workers", default=1, show_default=True)
@_guarded
def extract_cmd(manifest_path: str, graph: str, sidecar: str | None, split: str,
                out: str, workers: int) -> None:
    """Run the frozen backbone over one split and persist the features."""
    manifest = DatasetManifest.load(manifest_path)
    spec = backbone_ops.load_spec(graph, sidecar)
    fm = backbone_ops.extract(manifest, spec, split, workers=workers)
    save_features(fm, out)
    click.echo(f"{fm.num_samples} x {fm.feature_dim} features ({spec.name}) -> {out}")


@main.command("tune")
@click.option("--features-train", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--features-val", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--trials", default=10, show_default=True)
@click.option("--epochs", default=20, show_default=True)
@click.option("--batch", default=16, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@_guarded
def tune_cmd(features_train: str, features_val: str, trials: int, epochs: int,
             batch: int, seed: int, out: str) -> None:
    """Random-search the optimizer/learning-rate/dropout grid."""
    train_fm = load_features(features_train)
    val_fm = load_features(features_val)
    result = run_search(SearchSpace(), trials, epochs, train_fm, val_fm, seed,
                        batch_size=batch)
    save_tune_result(result, out)
    best = result.best.hyperparams
    click.echo(f"best: {best.optimizer} lr={best.learning_rate} "
               f"dropout={best.dropout_rate} "
               f"val_accuracy={result.best.objective * 100:.2f}%")


@main.command("train")
@click.option("--features-train", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--features-val", type=click.Path(exists=True, dir_okay=False))
@click.option("--epochs", default=50, show_default=True)
@click.option("--batch", default=16, show_default=True)
@click.option("--optimizer", default="sgd", show_default=True,
              type=click.Choice(["adam", "rmsprop", "sgd"]))
@click.option("--lr", default=0.1, show_default=True)
@click.option("--dropout", default=0.4, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--curves", type=click.Path(dir_okay=False),
              help="Epoch-metrics CSV (defaults to <out stem>_curves.csv).")
@_guarded
def train_cmd(features_train: str, features_val: str | None, epochs: int, batch: int,
              optimizer: str, lr: float, dropout: float, seed: int, out: str,
              curves: str | None) -> None:
    """Train the softmax head with explicit hyperparameters."""
    train_fm = load_features(features_train)
    val_fm = load_features(features_val) if features_val else None
    config = TrainConfig(epochs=epochs, hyperparams=HyperParams(optimizer, lr, dropout),
                         batch_size=batch, seed=seed)
    params, records = train(train_fm, val_fm, config)
    save_head(params, out)
    curves_path = curves or str(Path(out).with_suffix("")) + "_curves.csv"
    write_epoch_csv(records, curves_path)
    last = records[-1]
    message = f"final train_acc={last.train_accuracy:.4f}"
    if last.val_accuracy is not None:
        message += f" val_acc={last.val_accuracy:.4f}"
    click.echo(message + f" -> {out}")


@main.command("evaluate")
@click.option("--head", "head_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--features-test", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--confusion-csv", type=click.Path(dir_okay=False))
@click.option("--roc-dir", type=click.Path(file_okay=False))
@_guarded
def evaluate_cmd(head_path: str, features_test: str, out: str,
                 confusion_csv: str | None, roc_dir: str | None) -> None:
    """Evaluate a trained head on a feature split and write the report."""
    params = load_head(head_path)
    test_fm = load_features(features_test)
    report = evaluate_features(params, test_fm, Path(out),
                               Path(confusion_csv) if confusion_csv else None,
                               Path(roc_dir) if roc_dir else None)
    click.echo(f"accuracy={report.accuracy:.4f} "
               f"(displays as {metrics_ops.display_percent(report.accuracy)}%) -> {out}")


@main.command("predict")
@click.option("--head", "head_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--graph", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--sidecar", type=click.Path(exists=True, dir_okay=False))
@click.argument("images", nargs=-1, required=True,
                type=click.Path(exists=True, dir_okay=False))
@_guarded
def predict_cmd(head_path: str, graph: str, sidecar: str | None,
                images: tuple[str, ...]) -> None:
    """Classify one or more images with a trained head."""
    params = load_head(head_path)
    spec = backbone_ops.load_spec(graph, sidecar)
    head_backbone = params.metadata.get("backbone")
    if head_backbone and head_backbone != spec.name:
        raise ConfigError(f"head was trained on backbone {head_backbone!r} but the "
                          f"graph is {spec.name!r}")
    if params.feature_dim != spec.feature_dim:
        raise ConfigError(f"head D={params.feature_dim} but backbone D={spec.feature_dim}")

    from .augment import load_rgb
    from .onnxlite import GraphRunner

    runner = GraphRunner.from_path(spec.graph_path)
    labels = params.metadata.get("labels") or [str(i) for i in range(params.num_classes)]
    for image_path in images:
        x = backbone_ops.preprocess(load_rgb(image_path), spec)[None, ...]
        row = runner.run({runner.graph.inputs[0].name: x})[0].reshape(-1)
        index, probs = predict(row.astype(np.float64), params)
        click.echo(f"{image_path}: {labels[index]}")
        for i, name in enumerate(labels):
            click.echo(f"  {name}: {probs[i]:.6f}")


@main.command("run")
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--workspace", type=click.Path(file_okay=False),
              help="Overrides config and PESTID_WORKSPACE.")
@click.option("--seed", type=int, help="Override master seed.")
@click.option("--trials", type=int)
@click.option("--tune-epochs", type=int)
@click.option("--final-epochs", type=int)
@_guarded
def run_cmd(config_path: str, workspace: str | None, seed: int | None,
            trials: int | None, tune_epochs: int | None,
            final_epochs: int | None) -> None:
    """Run the full pipeline: ingest through evaluation."""
    overrides = {
        "workspace": workspace or os.environ.get("PESTID_WORKSPACE"),
        "master_seed": seed,
        "trials": trials,
        "tune_epochs": tune_epochs,
        "final_epochs": final_epochs,
    }
    config = load_run_config(config_path, overrides)
    paths = run_pipeline(config)
    click.echo(f"report: {paths['report']}")


if __name__ == "__main__":
    main()
