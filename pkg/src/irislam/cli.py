"""Command-line surface: synth, segment, normalize, train, eval, compare.

Exit codes: 0 success, 1 usage error, 2 data error, 3 processing error.
Config files are flat `key = value` text; keys match HarnessConfig.echo()
names (e.g. localization.sigma, lamstar.delta, shift_range).
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from dataclasses import fields, replace
from pathlib import Path

import numpy as np

from irislam.errors import (
    ConfigError,
    DatasetError,
    FormatError,
    IrisLamError,
    LocalizationError,
)
from irislam.harness import (
    HarnessConfig,
    compare_variants,
    format_comparison,
    index_dataset,
    run_eval,
    run_train,
    write_report,
)
from irislam.imaging import GrayImage, load_gray_image, save_gray_image
from irislam.lamstar import LamstarConfig
from irislam.normalization import save_template, unwrap
from irislam.segmentation import Circle, IrisLocalization, LocalizationConfig, localize_iris
from irislam.synthdata import make_benchmark

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_PROCESSING = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; the CLI contract is 1
        self.print_usage(sys.stderr)
        raise SystemExit_(EXIT_USAGE, f"{self.prog}: error: {message}")


class SystemExit_(Exception):
    def __init__(self, code: int, message: str = ""):
        super().__init__(message)
        self.code = code


def _parse_config_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def _coerce(value: str, target_type: type):
    if target_type is bool:
        if value.lower() in ("1", "true", "yes", "on"):
            return True
        if value.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"cannot parse boolean from {value!r}")
    return target_type(value)


def _apply_config(cfg: HarnessConfig, values: dict[str, str]) -> HarnessConfig:
    loc_fields = {f.name: f.type for f in fields(LocalizationConfig)}
    lam_fields = {f.name: f.type for f in fields(LamstarConfig)}
    top_fields = {f.name: f.type for f in fields(HarnessConfig)}
    loc, lam = cfg.localization, cfg.lamstar
    top: dict[str, object] = {}
    types = {"float": float, "int": int, "bool": bool, "str": str, "str | None": str}
    for key, value in values.items():
        if key.startswith("localization."):
            name = key.removeprefix("localization.")
            if name not in loc_fields:
                raise ConfigError(f"unknown config key {key!r}")
            loc = replace(loc, **{name: _coerce(value, types[loc_fields[name]])})
        elif key.startswith("lamstar."):
            name = key.removeprefix("lamstar.")
            if name not in lam_fields:
                raise ConfigError(f"unknown config key {key!r}")
            lam = replace(lam, **{name: _coerce(value, types[lam_fields[name]])})
        else:
            if key not in top_fields or key in ("localization", "lamstar"):
                raise ConfigError(f"unknown config key {key!r}")
            top[key] = _coerce(value, types[top_fields[key]])
    return replace(cfg, localization=loc, lamstar=lam, **top)


def _load_harness_config(args) -> HarnessConfig:
    cfg = HarnessConfig()
    if getattr(args, "config", None):
        cfg = _apply_config(cfg, _parse_config_file(args.config))
    return cfg


def _draw_circle(pixels: np.ndarray, circle: Circle, value: float = 1.0) -> None:
    n = max(64, int(8 * math.pi * circle.r))
    t = np.linspace(0.0, 2.0 * math.pi, n, endpoint=False)
    xs = np.rint(circle.cx + circle.r * np.cos(t)).astype(int)
    ys = np.rint(circle.cy + circle.r * np.sin(t)).astype(int)
    keep = (xs >= 0) & (xs < pixels.shape[1]) & (ys >= 0) & (ys < pixels.shape[0])
    pixels[ys[keep], xs[keep]] = value


def _cmd_synth(args) -> int:
    train, test = make_benchmark(
        args.classes, args.train, args.test, args.seed, noise_sigma=args.noise
    )
    out = Path(args.out)
    for eye in train + test:
        class_dir = out / f"class{eye.class_id:03d}"
        class_dir.mkdir(parents=True, exist_ok=True)
        save_gray_image(eye.image, class_dir / f"{eye.name}.pgm")
    print(f"wrote {len(train)} train + {len(test)} test images for "
          f"{args.classes} classes under {out}")
    return EXIT_OK


def _cmd_segment(args) -> int:
    cfg = _load_harness_config(args)
    img = load_gray_image(args.image)
    loc = localize_iris(img, cfg.localization)
    print(f"pupil: cx={loc.pupil.cx:.1f} cy={loc.pupil.cy:.1f} r={loc.pupil.r:.1f}")
    print(f"iris:  cx={loc.iris.cx:.1f} cy={loc.iris.cy:.1f} r={loc.iris.r:.1f}")
    if args.overlay:
        pixels = img.pixels.copy()
        _draw_circle(pixels, loc.pupil)
        _draw_circle(pixels, loc.iris)
        save_gray_image(GrayImage(pixels), args.overlay)
        print(f"overlay written to {args.overlay}")
    return EXIT_OK


def _parse_loc(text: str) -> IrisLocalization | None:
    if text == "auto":
        return None
    parts = text.split(",")
    if len(parts) != 6:
        raise ConfigError("--loc expects 'auto' or 'pcx,pcy,pr,icx,icy,ir'")
    p = [float(v) for v in parts]
    return IrisLocalization(pupil=Circle(p[0], p[1], p[2]), iris=Circle(p[3], p[4], p[5]))


def _cmd_normalize(args) -> int:
    cfg = _load_harness_config(args)
    img = load_gray_image(args.image)
    loc = _parse_loc(args.loc)
    if loc is None:
        loc = localize_iris(img, cfg.localization)
    template = unwrap(img, loc, args.radial, args.angular, label=args.label)
    save_template(template, args.out)
    print(f"template {args.radial}x{args.angular} written to {args.out}")
    return EXIT_OK


def _cmd_train(args) -> int:
    cfg = _load_harness_config(args)
    lam = cfg.lamstar
    if args.normalized:
        lam = replace(lam, normalized=True)
    if args.epochs is not None:
        lam = replace(lam, epochs=args.epochs)
    if args.delta is not None:
        lam = replace(lam, delta=args.delta)
    cfg = replace(cfg, lamstar=lam)
    if args.train_per_class is not None:
        cfg = replace(cfg, train_per_class=args.train_per_class)
    index = index_dataset(args.data, cfg.train_per_class)
    model_path, log = run_train(index, cfg, args.out, dataset_root=Path(args.data))
    print(f"model written to {model_path}")
    print(f"epochs run: {log.epochs_run}, epoch errors: {log.epoch_errors}")
    print(f"train time: {log.train_seconds:.4f} s")
    counts = log.neuron_counts
    print(f"neurons per module: min={min(counts)} max={max(counts)} "
          f"mean={sum(counts) / len(counts):.1f}")
    return EXIT_OK


def _cmd_eval(args) -> int:
    cfg = _load_harness_config(args)
    if args.shift_range is not None:
        cfg = replace(cfg, shift_range=args.shift_range)
    if args.train_per_class is not None:
        cfg = replace(cfg, train_per_class=args.train_per_class)
    index = index_dataset(args.data, cfg.train_per_class)
    report = run_eval(args.model, index, cfg, dataset_root=Path(args.data))
    if args.report:
        txt, kv = write_report(report, index.class_names, args.report)
        print(f"reports written to {txt} and {kv}")
    if report.accuracy_defined:
        print(f"accuracy: {report.accuracy:.4f} on {report.num_test} test images")
    else:
        print("accuracy: undefined (empty test set)")
    return EXIT_OK


def _cmd_compare(args) -> int:
    cfg = _load_harness_config(args)
    if args.shift_range is not None:
        cfg = replace(cfg, shift_range=args.shift_range)
    if args.train_per_class is not None:
        cfg = replace(cfg, train_per_class=args.train_per_class)
    index = index_dataset(args.data, cfg.train_per_class)
    results = compare_variants(index, cfg, args.out_dir)
    print(format_comparison(results), end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="irislam", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="render a synthetic benchmark dataset")
    p.add_argument("--out", required=True, help="dataset root directory")
    p.add_argument("--classes", type=int, default=16)
    p.add_argument("--train", type=int, default=5)
    p.add_argument("--test", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", type=float, default=0.01)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("segment", help="locate pupil and iris circles")
    p.add_argument("image")
    p.add_argument("--overlay", help="write a debug PGM with the circles drawn")
    p.add_argument("--config")
    p.set_defaults(func=_cmd_segment)

    p = sub.add_parser("normalize", help="unwrap an iris into an IRT1 template")
    p.add_argument("image")
    p.add_argument("--loc", default="auto", help="'auto' or pcx,pcy,pr,icx,icy,ir")
    p.add_argument("--out", required=True)
    p.add_argument("--radial", type=int, default=20)
    p.add_argument("--angular", type=int, default=480)
    p.add_argument("--label", default=None)
    p.add_argument("--config")
    p.set_defaults(func=_cmd_normalize)

    p = sub.add_parser("train", help="train a model on a dataset directory")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="model file (.lns)")
    p.add_argument("--normalized", action="store_true")
    p.add_argument("--epochs", type=int)
    p.add_argument("--delta", type=float)
    p.add_argument("--train-per-class", type=int, dest="train_per_class")
    p.add_argument("--config")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a model on the test split")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--shift-range", type=int, dest="shift_range")
    p.add_argument("--train-per-class", type=int, dest="train_per_class")
    p.add_argument("--report", help="report file prefix (writes .txt and .kv)")
    p.add_argument("--config")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("compare", help="train and evaluate both variants")
    p.add_argument("--data", required=True)
    p.add_argument("--out-dir", default="compare_out")
    p.add_argument("--shift-range", type=int, dest="shift_range")
    p.add_argument("--train-per-class", type=int, dest="train_per_class")
    p.add_argument("--config")
    p.set_defaults(func=_cmd_compare)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit_ as exc:
        if str(exc):
            print(str(exc), file=sys.stderr)
        return exc.code
    except (DatasetError, FormatError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (LocalizationError, ConfigError, IrisLamError, ValueError) as exc:
        print(f"processing error: {exc}", file=sys.stderr)
        return EXIT_PROCESSING


if __name__ == "__main__":
    sys.exit(main())
