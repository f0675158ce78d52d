"""Train/test orchestration over a directory-tree dataset.

Dataset layout: <root>/<class_name>/<image>.pgm. Per class the first
train_per_class files in lexicographic order are the training split and
the remainder the test split; classes without a test remainder are
skipped. Templates are cached on disk keyed by a digest of the
segmentation/normalization configuration, so retraining or evaluating the
second classifier variant never recomputes them.
"""

from __future__ import annotations

import hashlib
import logging
import math
import os
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from irislam.errors import ConfigError, DatasetError, LocalizationError
from irislam.imaging import load_gray_image
from irislam.lamstar import (
    LamstarConfig,
    LamstarNetwork,
    TrainingLog,
    classify,
    load_model,
    save_model,
    train,
)
from irislam.normalization import IrisTemplate, load_template, save_template, unwrap
from irislam.segmentation import LocalizationConfig, localize_iris

logger = logging.getLogger(__name__)

CACHE_ENV_VAR = "IRISLAM_CACHE_DIR"


@dataclass(frozen=True)
class HarnessConfig:
    localization: LocalizationConfig = LocalizationConfig()
    radial_res: int = 20
    angular_res: int = 480
    lamstar: LamstarConfig = LamstarConfig()
    train_per_class: int = 5
    shift_range: int = 0
    cache_dir: str | None = None  # falls back to $IRISLAM_CACHE_DIR, then <root>/.template_cache

    def echo(self) -> dict[str, str]:
        """Flat key-value view of every resolved setting, for provenance."""
        out: dict[str, str] = {}
        for prefix, obj in (("", self), ("localization.", self.localization), ("lamstar.", self.lamstar)):
            for name, value in vars(obj).items():
                if name in ("localization", "lamstar"):
                    continue
                out[prefix + name] = repr(value)
        return dict(sorted(out.items()))

    def template_digest(self) -> str:
        """Digest of everything that affects template content."""
        keys = {k: v for k, v in self.echo().items()
                if k.startswith("localization.") or k in ("radial_res", "angular_res")}
        blob = ";".join(f"{k}={v}" for k, v in keys.items())
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class DatasetEntry:
    path: Path
    class_id: int
    split: str  # "train" | "test"


@dataclass(frozen=True)
class DatasetIndex:
    entries: list[DatasetEntry]
    class_names: list[str]

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    def split(self, which: str) -> list[DatasetEntry]:
        return [e for e in self.entries if e.split == which]


@dataclass
class EvalReport:
    accuracy: float  # NaN when the test set is empty
    per_class_accuracy: np.ndarray
    confusion: np.ndarray  # (num_classes, num_classes) counts, rows = truth
    train_seconds: float
    test_seconds: float
    config_echo: dict[str, str]
    num_test: int = 0
    num_failed: int = 0  # test images excluded by localization failure

    @property
    def accuracy_defined(self) -> bool:
        return not math.isnan(self.accuracy)


def index_dataset(root: str | Path, train_per_class: int) -> DatasetIndex:
    """Index <root>/<class>/<image>.pgm with a sorted-order train/test split.

    Classes with fewer than train_per_class + 1 images are skipped with a
    warning (no test remainder would exist).
    """
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"dataset root {root} is not a directory")
    if train_per_class < 1:
        raise ValueError("train_per_class must be positive")
    entries: list[DatasetEntry] = []
    class_names: list[str] = []
    for class_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        files = sorted(class_dir.glob("*.pgm"))
        if len(files) < train_per_class + 1:
            logger.warning(
                "skipping class %s: %d images, need more than %d",
                class_dir.name, len(files), train_per_class,
            )
            continue
        class_id = len(class_names)
        class_names.append(class_dir.name)
        for i, f in enumerate(files):
            entries.append(DatasetEntry(f, class_id, "train" if i < train_per_class else "test"))
    if not class_names:
        raise DatasetError(f"no class directory under {root} has more than {train_per_class} images")
    return DatasetIndex(entries=entries, class_names=class_names)


def _resolve_cache_dir(cfg: HarnessConfig, fallback_root: Path) -> Path:
    if cfg.cache_dir:
        return Path(cfg.cache_dir)
    env = os.environ.get(CACHE_ENV_VAR)
    if env:
        return Path(env)
    return fallback_root / ".template_cache"


def compute_template(path: Path, label: str, cfg: HarnessConfig) -> IrisTemplate:
    """Segment and unwrap one image (no caching)."""
    img = load_gray_image(path)
    loc = localize_iris(img, cfg.localization)
    return unwrap(img, loc, cfg.radial_res, cfg.angular_res, label=label)


def _templates_for(
    entries: list[DatasetEntry],
    index: DatasetIndex,
    cfg: HarnessConfig,
    cache_dir: Path,
) -> tuple[list[IrisTemplate], list[int], list[DatasetEntry]]:
    """Templates (cached) for the given entries; localization failures are
    logged and excluded. Returns (templates, labels, failed_entries)."""
    digest = cfg.template_digest()
    templates: list[IrisTemplate] = []
    labels: list[int] = []
    failed: list[DatasetEntry] = []
    for entry in entries:
        label = index.class_names[entry.class_id]
        cached = cache_dir / digest / label / (entry.path.stem + ".irt")
        if cached.is_file():
            templates.append(load_template(cached))
            labels.append(entry.class_id)
            continue
        try:
            t = compute_template(entry.path, label, cfg)
        except LocalizationError as exc:
            logger.warning("excluding %s: %s", entry.path, exc)
            failed.append(entry)
            continue
        cached.parent.mkdir(parents=True, exist_ok=True)
        save_template(t, cached)
        templates.append(t)
        labels.append(entry.class_id)
    return templates, labels, failed


def run_train(
    index: DatasetIndex,
    cfg: HarnessConfig,
    model_path: str | Path,
    dataset_root: Path | None = None,
) -> tuple[Path, TrainingLog]:
    """Build templates for the training split, train, persist the model."""
    train_entries = index.split("train")
    if not train_entries:
        raise DatasetError("index has no training entries")
    root = dataset_root if dataset_root is not None else train_entries[0].path.parent.parent
    cache_dir = _resolve_cache_dir(cfg, root)
    templates, labels, _ = _templates_for(train_entries, index, cfg, cache_dir)
    for class_id, name in enumerate(index.class_names):
        if class_id not in labels:
            raise DatasetError(f"class {name} lost all training images to localization failures")
    net = LamstarNetwork(cfg.angular_res, cfg.radial_res, index.num_classes, cfg.lamstar)
    log = train(net, templates, labels)
    model_path = Path(model_path)
    save_model(net, model_path)
    return model_path, log


def run_eval(
    model_path: str | Path,
    index: DatasetIndex,
    cfg: HarnessConfig,
    train_seconds: float = 0.0,
    dataset_root: Path | None = None,
) -> EvalReport:
    """Classify every test entry and assemble the evaluation report."""
    net = load_model(model_path)
    if net.subword_dim != cfg.radial_res or net.num_modules != cfg.angular_res:
        raise ConfigError(
            f"model expects {net.subword_dim}x{net.num_modules} templates, "
            f"config produces {cfg.radial_res}x{cfg.angular_res}"
        )
    if net.num_classes != index.num_classes:
        raise ConfigError(
            f"model has {net.num_classes} classes, dataset has {index.num_classes}"
        )
    test_entries = index.split("test")
    root = dataset_root if dataset_root is not None else (
        test_entries[0].path.parent.parent if test_entries else Path(".")
    )
    cache_dir = _resolve_cache_dir(cfg, root)
    templates, labels, failed = _templates_for(test_entries, index, cfg, cache_dir)

    n = index.num_classes
    confusion = np.zeros((n, n), dtype=np.int64)
    start = time.perf_counter()
    for t, label in zip(templates, labels):
        pred = classify(net, t, shift_range=cfg.shift_range)
        confusion[label, pred.class_index] += 1
    test_seconds = time.perf_counter() - start

    total = int(confusion.sum())
    accuracy = float(np.trace(confusion)) / total if total else float("nan")
    row_sums = confusion.sum(axis=1)
    per_class = np.divide(
        np.diag(confusion), row_sums,
        out=np.full(n, np.nan), where=row_sums > 0,
    )
    return EvalReport(
        accuracy=accuracy,
        per_class_accuracy=per_class,
        confusion=confusion,
        train_seconds=train_seconds,
        test_seconds=test_seconds,
        config_echo=cfg.echo(),
        num_test=total,
        num_failed=len(failed),
    )


def format_report_text(report: EvalReport, class_names: list[str]) -> str:
    """Human-readable report, including wall-clock timings."""
    lines = []
    if report.accuracy_defined:
        lines.append(f"accuracy: {report.accuracy:.4f} ({report.num_test} test images)")
    else:
        lines.append("accuracy: undefined (empty test set)")
    if report.num_failed:
        lines.append(f"excluded by localization failure: {report.num_failed}")
    lines.append(f"train time: {report.train_seconds:.4f} s")
    lines.append(f"test time:  {report.test_seconds:.4f} s")
    lines.append("per-class accuracy:")
    for name, acc in zip(class_names, report.per_class_accuracy):
        text = "n/a" if math.isnan(acc) else f"{acc:.4f}"
        lines.append(f"  {name}: {text}")
    lines.append("confusion matrix (rows = truth):")
    for name, row in zip(class_names, report.confusion):
        lines.append("  " + " ".join(f"{v:4d}" for v in row))
    lines.append("config:")
    for k, v in report.config_echo.items():
        lines.append(f"  {k} = {v}")
    return "\n".join(lines) + "\n"


def format_report_kv(report: EvalReport, class_names: list[str]) -> str:
    """Machine-readable key-value report. Deliberately excludes wall-clock
    timings so identical runs produce byte-identical files."""
    lines = []
    acc = "nan" if not report.accuracy_defined else repr(report.accuracy)
    lines.append(f"accuracy = {acc}")
    lines.append(f"num_test = {report.num_test}")
    lines.append(f"num_failed = {report.num_failed}")
    for name, a in zip(class_names, report.per_class_accuracy):
        lines.append(f"per_class_accuracy.{name} = {'nan' if math.isnan(a) else repr(float(a))}")
    for i, row in enumerate(report.confusion):
        lines.append(f"confusion.{class_names[i]} = {' '.join(str(v) for v in row)}")
    for k, v in report.config_echo.items():
        lines.append(f"config.{k} = {v}")
    return "\n".join(lines) + "\n"


def write_report(report: EvalReport, class_names: list[str], prefix: str | Path) -> tuple[Path, Path]:
    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    txt = prefix.with_suffix(".txt")
    kv = prefix.with_suffix(".kv")
    txt.write_text(format_report_text(report, class_names))
    kv.write_text(format_report_kv(report, class_names))
    return txt, kv


@dataclass
class VariantResult:
    name: str
    model_path: Path
    log: TrainingLog
    report: EvalReport


def compare_variants(
    index: DatasetIndex,
    cfg: HarnessConfig,
    out_dir: str | Path,
) -> list[VariantResult]:
    """Train and evaluate both LAMSTAR variants under identical config.

    The template cache is shared, so images are segmented once. Returns
    one result per variant, regular first.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    results = []
    for name, normalized in (("lamstar", False), ("normalized_lamstar", True)):
        variant_cfg = replace(cfg, lamstar=replace(cfg.lamstar, normalized=normalized))
        model_path = out_dir / f"{name}.lns"
        model_path, log = run_train(index, variant_cfg, model_path)
        report = run_eval(model_path, index, variant_cfg, train_seconds=log.train_seconds)
        write_report(report, index.class_names, out_dir / f"{name}_report")
        results.append(VariantResult(name, model_path, log, report))
    return results


def format_comparison(results: list[VariantResult]) -> str:
    """Two-row summary table: accuracy and wall-clock train/test time."""
    lines = [f"{'variant':<20} {'accuracy':>9} {'train s':>9} {'test s':>9}"]
    for r in results:
        acc = "n/a" if not r.report.accuracy_defined else f"{r.report.accuracy:.4f}"
        lines.append(
            f"{r.name:<20} {acc:>9} {r.report.train_seconds:>9.4f} {r.report.test_seconds:>9.4f}"
        )
    return "\n".join(lines) + "\n"
