"""End-to-end orchestration with stage-level artifact caching.

Stages: ingest -> split -> augment -> extract (train/val/test) -> tune ->
final train -> evaluate. Each stage writes its artifact plus a stamp
recording a content hash of its inputs and config; a stage is skipped
when the stamp still matches and its outputs exist. Artifacts embed the
master seed and the producing stage's config hash.
"""

from __future__ import annotations

import hashlib
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import backbone as backbone_ops
from . import metrics as metrics_ops
from .augment import AugmentationConfig, augment_split
from .dataset import DatasetManifest, dumps_canonical, ingest, stratified_split
from .features import load_features, save_features
from .head import load_head, save_head
from .trainer import TrainConfig, evaluate_split, train, write_epoch_csv
from .tuner import SearchSpace, run_search, save_tune_result

log = logging.getLogger(__name__)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(Exception):
    """Invalid run configuration; maps to exit code 2."""


class StageError(Exception):
    """A pipeline stage failed; maps to exit code 3."""

    def __init__(self, stage: str, artifact: Path, cause: Exception):
        super().__init__(f"stage {stage!r} failed while producing {artifact}: {cause}")
        self.stage = stage
        self.artifact = artifact
        self.cause = cause


@dataclass
class RunConfig:
    dataset_root: Path
    workspace: Path
    graph: Path
    sidecar: Path | None = None
    master_seed: int = 0
    ratios: tuple[float, float, float] = (0.7, 0.15, 0.15)  # train, test, validation
    augment: dict = field(default_factory=dict)   # AugmentationConfig overrides
    trials: int = 10
    tune_epochs: int = 20
    final_epochs: int = 50
    batch_size: int = 16
    extract_workers: int = 1

    def validate(self) -> None:
        for name in ("dataset_root", "graph"):
            path = getattr(self, name)
            if not Path(path).exists():
                raise ConfigError(f"{name} path does not exist: {path}")
        if self.sidecar is not None and not Path(self.sidecar).exists():
            raise ConfigError(f"sidecar path does not exist: {self.sidecar}")
        for name in ("trials", "tune_epochs", "final_epochs", "batch_size"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        # the tuner draws without replacement, so the budget cannot exceed
        # the configuration grid; reject up front rather than mid-pipeline
        from .tuner import SearchSpace

        grid_size = SearchSpace().size
        if self.trials > grid_size:
            raise ConfigError(
                f"trials={self.trials} exceeds the {grid_size}-point search grid")


def load_run_config(path: str | Path, overrides: dict | None = None) -> RunConfig:
    """Parse a TOML or JSON run configuration; explicit overrides win."""
    path = Path(path)
    try:
        if path.suffix == ".json":
            doc = json.loads(path.read_text())
        else:
            with open(path, "rb") as fh:
                doc = tomllib.load(fh)
    except Exception as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc

    merged = dict(doc)
    for key, value in (overrides or {}).items():
        if value is not None:
            merged[key] = value

    try:
        split = merged.get("split", {})
        ratios = (float(split.get("train", 0.7)),
                  float(split.get("test", 0.15)),
                  float(split.get("validation", 0.15)))
        tuning = merged.get("tuning", {})
        final = merged.get("final", {})
        config = RunConfig(
            dataset_root=Path(merged["dataset_root"]),
            workspace=Path(merged.get("workspace", "workspace")),
            graph=Path(merged["graph"]),
            sidecar=Path(merged["sidecar"]) if merged.get("sidecar") else None,
            master_seed=int(merged.get("master_seed", 0)),
            ratios=ratios,
            augment=dict(merged.get("augment", {})),
            trials=int(merged.get("trials", tuning.get("trials", 10))),
            tune_epochs=int(merged.get("tune_epochs", tuning.get("epochs", 20))),
            final_epochs=int(merged.get("final_epochs", final.get("epochs", 50))),
            batch_size=int(merged.get("batch_size", final.get("batch_size", 16))),
            extract_workers=int(merged.get("extract_workers", 1)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid run configuration: {exc}") from exc
    config.validate()
    return config


def _hash_bytes(*chunks: bytes) -> str:
    digest = hashlib.sha256()
    for chunk in chunks:
        digest.update(len(chunk).to_bytes(8, "little"))
        digest.update(chunk)
    return digest.hexdigest()


def _hash_files(paths: list[Path]) -> bytes:
    digest = hashlib.sha256()
    for path in paths:
        digest.update(Path(path).read_bytes())
    return digest.digest()


class _Stages:
    """Stage runner: executes a stage unless its stamp is still valid."""

    def __init__(self, workspace: Path, master_seed: int):
        self.workspace = workspace
        self.stamps = workspace / ".stamps"
        self.stamps.mkdir(parents=True, exist_ok=True)
        self.master_seed = master_seed

    def run(self, stage: str, key: str, outputs: list[Path], produce) -> bool:
        """Returns True when the stage executed, False when skipped."""
        stamp = self.stamps / f"{stage}.json"
        if stamp.exists():
            try:
                recorded = json.loads(stamp.read_text())
            except json.JSONDecodeError:
                recorded = {}
            if recorded.get("key") == key and all(Path(o).exists() for o in outputs):
                log.info("stage %s up to date, skipping", stage)
                return False
        try:
            produce()
        except StageError:
            raise
        except Exception as exc:
            raise StageError(stage, outputs[0] if outputs else self.workspace, exc) from exc
        missing = [o for o in outputs if not Path(o).exists()]
        if missing:
            raise StageError(stage, missing[0],
                             RuntimeError("stage completed without writing its artifact"))
        stamp.write_text(dumps_canonical({
            "key": key,
            "master_seed": self.master_seed,
            "outputs": [str(o) for o in outputs],
        }))
        return True


def run_pipeline(config: RunConfig) -> dict[str, Path]:
    """Execute every stage; returns the artifact paths keyed by stage."""
    config.validate()
    ws = Path(config.workspace)
    ws.mkdir(parents=True, exist_ok=True)
    stages = _Stages(ws, config.master_seed)
    spec = backbone_ops.load_spec(config.graph, config.sidecar)

    paths = {
        "manifest": ws / "manifest.json",
        "manifest_split": ws / "manifest_split.json",
        "augmented_dir": ws / "augmented",
        "manifest_augmented": ws / "manifest_augmented.json",
        "features_train": ws / "features_train.ppn",
        "features_validation": ws / "features_validation.ppn",
        "features_test": ws / "features_test.ppn",
        "tune": ws / "tune.json",
        "head": ws / "head.json",
        "curves": ws / "curves.csv",
        "report": ws / "report.json",
        "confusion_csv": ws / "confusion.csv",
        "roc_dir": ws / "roc",
    }

    # ingest
    dataset_files = sorted(p for p in Path(config.dataset_root).rglob("*") if p.is_file())
    ingest_key = _hash_bytes(_hash_files(dataset_files), str(config.dataset_root).encode())

    def do_ingest():
        manifest = ingest(config.dataset_root)
        manifest.provenance = _provenance(config, ingest_key)
        manifest.save(paths["manifest"])

    stages.run("ingest", ingest_key, [paths["manifest"]], do_ingest)

    # split
    split_key = _hash_bytes(paths["manifest"].read_bytes(),
                            dumps_canonical({"ratios": list(config.ratios),
                                             "seed": config.master_seed}).encode())

    def do_split():
        manifest = DatasetManifest.load(paths["manifest"])
        out = stratified_split(manifest, config.ratios, config.master_seed)
        out.provenance = _provenance(config, split_key)
        out.save(paths["manifest_split"])

    stages.run("split", split_key, [paths["manifest_split"]], do_split)

    # augment
    aug_config = AugmentationConfig(seed=config.master_seed, **config.augment)
    aug_key = _hash_bytes(paths["manifest_split"].read_bytes(),
                          dumps_canonical(vars(aug_config).copy()).encode())

    def do_augment():
        manifest = DatasetManifest.load(paths["manifest_split"])
        out = augment_split(manifest, aug_config, paths["augmented_dir"])
        out.provenance = _provenance(config, aug_key)
        out.save(paths["manifest_augmented"])

    stages.run("augment", aug_key, [paths["manifest_augmented"]], do_augment)

    # extract train/validation/test
    graph_bytes = Path(config.graph).read_bytes()
    for split_name, manifest_path in (("train", paths["manifest_augmented"]),
                                      ("validation", paths["manifest_split"]),
                                      ("test", paths["manifest_split"])):
        out_path = paths[f"features_{split_name}"]
        key = _hash_bytes(manifest_path.read_bytes(), graph_bytes,
                          dumps_canonical({"split": split_name,
                                           "spec": spec.preprocessing}).encode())

        def do_extract(split_name=split_name, manifest_path=manifest_path,
                       out_path=out_path, key=key):
            manifest = DatasetManifest.load(manifest_path)
            fm = backbone_ops.extract(manifest, spec, split_name,
                                      workers=config.extract_workers,
                                      provenance=_provenance(config, key))
            save_features(fm, out_path)

        stages.run(f"extract_{split_name}", key, [out_path], do_extract)

    # tune
    tune_key = _hash_bytes(paths["features_train"].read_bytes(),
                           paths["features_validation"].read_bytes(),
                           dumps_canonical({"trials": config.trials,
                                            "epochs": config.tune_epochs,
                                            "batch": config.batch_size,
                                            "seed": config.master_seed}).encode())

    def do_tune():
        train_fm = load_features(paths["features_train"])
        val_fm = load_features(paths["features_validation"])
        result = run_search(SearchSpace(), config.trials, config.tune_epochs,
                            train_fm, val_fm, config.master_seed,
                            batch_size=config.batch_size)
        save_tune_result(result, paths["tune"], _provenance(config, tune_key))

    stages.run("tune", tune_key, [paths["tune"]], do_tune)

    # final training with the best configuration
    train_key = _hash_bytes(paths["features_train"].read_bytes(),
                            paths["features_validation"].read_bytes(),
                            paths["tune"].read_bytes(),
                            dumps_canonical({"epochs": config.final_epochs,
                                             "batch": config.batch_size,
                                             "seed": config.master_seed}).encode())

    def do_train():
        from .tuner import load_best_hyperparams

        best = load_best_hyperparams(paths["tune"])
        train_fm = load_features(paths["features_train"])
        val_fm = load_features(paths["features_validation"])
        params, records = train(train_fm, val_fm,
                                TrainConfig(epochs=config.final_epochs, hyperparams=best,
                                            batch_size=config.batch_size,
                                            seed=config.master_seed))
        params.metadata["provenance"] = _provenance(config, train_key)
        save_head(params, paths["head"])
        write_epoch_csv(records, paths["curves"])

    stages.run("train", train_key, [paths["head"], paths["curves"]], do_train)

    # evaluate
    eval_key = _hash_bytes(paths["head"].read_bytes(),
                           paths["features_test"].read_bytes())

    def do_evaluate():
        params = load_head(paths["head"])
        test_fm = load_features(paths["features_test"])
        evaluate_features(params, test_fm, paths["report"], paths["confusion_csv"],
                          paths["roc_dir"], _provenance(config, eval_key))

    stages.run("evaluate", eval_key,
               [paths["report"], paths["confusion_csv"]], do_evaluate)
    return paths


def evaluate_features(params, test_fm, report_path: Path,
                      confusion_csv: Path | None = None,
                      roc_dir: Path | None = None,
                      provenance: dict | None = None) -> metrics_ops.EvalReport:
    """Predict a feature split and write the full evaluation report."""
    if test_fm.num_samples == 0:
        raise ValueError("test split is empty")
    evaluate_split(params, test_fm)  # dimension checks
    x = test_fm.features.astype("float64")
    from .head import forward_batch

    _, probs = forward_batch(x, params)
    predicted = probs.argmax(axis=1)
    num_classes = max(params.num_classes, test_fm.num_classes)
    report = metrics_ops.evaluate_predictions(test_fm.labels, predicted, probs,
                                              num_classes)
    metrics_ops.save_report(report, report_path, test_fm.class_names, provenance)
    if confusion_csv is not None:
        metrics_ops.save_confusion_csv(report.confusion, confusion_csv,
                                       test_fm.class_names)
    if roc_dir is not None:
        metrics_ops.save_roc_csvs(report.roc, roc_dir)
    return report


def _provenance(config: RunConfig, stage_key: str) -> dict:
    return {"master_seed": config.master_seed, "config_hash": stage_key}
