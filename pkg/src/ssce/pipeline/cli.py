"""Command-line entry point.

Subcommands::

    ingest-check  validate a class-per-directory image tree
    train-cnn     train one baseline classifier and save it
    train-gan     train one GAN per class (or one class) and save the generators
    synthesize    write pseudo-labeled images from saved generators
    eval-metrics  FID and IS of an image folder against a real folder
    run-ssce      the full pipeline from a config file
    report        re-emit report files from a saved run ledger
    make-toy-data write the procedural shapes dataset to disk

Exit codes: 0 success, 2 configuration error, 3 data error, 4 training
failure, 5 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ..data.dataset import DatasetError, ExtensionPlan, synthesize_pseudo_labeled
from ..data.io import ingest_directory, write_dataset
from ..data.toy import make_shapes
from ..metrics.scores import feature_stats, frechet_distance, inception_score
from .config import ConfigError, ExperimentConfig, load_config
from .experiment import (
    EXIT_CONFIG, EXIT_OK, Experiment, StageError, exit_code_for, gan_config_from, load_classifier,
    load_generator, save_classifier, save_generator, stable_seed,
)
from .gamma import RunLedger
from .report import emit_report
from .training import train_gan

log = logging.getLogger("ssce")


def _config(args) -> ExperimentConfig:
    overrides = {
        "seed": args.seed,
        "output_dir": args.out,
        "resolution": args.resolution,
        "gamma_max": args.gamma_max,
    }
    if getattr(args, "data", None):
        overrides["dataset_root"] = args.data
    if args.config:
        return load_config(args.config, **overrides)
    return ExperimentConfig(**{k: v for k, v in overrides.items() if v is not None})


def _prepared(args) -> Experiment:
    exp = Experiment(_config(args))
    exp.ingest()
    return exp


def cmd_ingest_check(args) -> int:
    cfg = _config(args)
    ds = ingest_directory(cfg.dataset_root, cfg.resolution, cfg.channels, cfg.skip_undecodable)
    print(f"{len(ds)} images at {cfg.resolution}px, {ds.num_classes} classes")
    for name, n in zip(ds.class_names, ds.class_counts()):
        print(f"  {name}: {n}")
    return EXIT_OK


def cmd_train_cnn(args) -> int:
    exp = _prepared(args)
    cfg = exp.cfg
    preset = args.preset or cfg.classifier_presets[0]
    structure = (preset, args.wd == "on")
    seed = stable_seed(cfg.seed, preset, structure[1], 0)
    res = exp._fit(exp.split, structure, args.epochs or cfg.cnn_epochs_base, seed)
    out = Path(cfg.output_dir)
    path = save_classifier(res.model, out / f"{preset}-wd-{args.wd}.ssce",
                           {"accuracy": res.accuracy, "seconds": res.seconds, "config_hash": exp.hash})
    (out / f"{preset}-wd-{args.wd}.trace.json").write_text(json.dumps(res.trace, indent=2), encoding="utf-8")
    print(f"accuracy {100 * res.accuracy:.2f}%  time {res.seconds:.2f}s  -> {path}")
    return EXIT_OK


def cmd_train_gan(args) -> int:
    exp = _prepared(args)
    cfg = exp.cfg
    embedder = load_classifier(args.embedder)[0] if args.embedder else None
    gcfg = gan_config_from(cfg)
    names = exp.dataset.class_names
    targets = [names.index(args.class_name)] if args.class_name else range(len(names))
    for c in targets:
        name = names[c]
        gdir = Path(cfg.output_dir) / "gan" / name
        res = train_gan(exp.split.train.of_class(c).images, gcfg, stable_seed(cfg.seed, "gan", name), embedder,
                        snapshot_dir=gdir / "snapshots")
        save_generator(res.pair, gcfg, name, gdir / "generator.ssce")
        (gdir / "trace.json").write_text(json.dumps({"trace": res.trace, "losses": res.losses}, indent=2),
                                         encoding="utf-8")
        tail = f"  final FID {res.final_fid:.4f}" if res.trace else ""
        print(f"class '{name}': {cfg.gan_iterations} iterations{tail} -> {gdir}")
    return EXIT_OK


def cmd_synthesize(args) -> int:
    gan_dir = Path(args.gan_dir)
    paths = sorted(gan_dir.glob("*/generator.ssce"))
    if not paths:
        raise DatasetError(f"no '<class>/generator.ssce' files under {gan_dir}")
    gens, names = [], []
    for p in paths:
        gen, ckpt = load_generator(p)
        gens.append(gen)
        names.append(ckpt.metadata.get("class_name", p.parent.name))
    plan = ExtensionPlan(args.gamma if args.gamma else 1, tuple([args.count] * len(gens)))
    ds = synthesize_pseudo_labeled(gens, plan, names, args.seed or 0)
    write_dataset(ds, args.out)
    print(f"wrote {len(ds)} images for classes {names} to {args.out}")
    return EXIT_OK


def cmd_eval_metrics(args) -> int:
    embedder, _ = load_classifier(args.embedder)
    res = embedder.resolution
    real = ingest_directory(args.real, res, embedder.channels) if args.real else None
    fake = ingest_directory(args.fake, res, embedder.channels)
    probs = embedder.predict_proba(fake.images)
    result = {"is": inception_score(probs, splits=args.splits)}
    if real is not None:
        result["fid"] = frechet_distance(feature_stats(embedder.embed(fake.images)),
                                         feature_stats(embedder.embed(real.images)))
    print(json.dumps(result))
    return EXIT_OK


def cmd_run_ssce(args) -> int:
    exp = Experiment(_config(args))
    result = exp.run()
    for row in result.ledger.summary():
        print(f"{row['structure']} wd-{row['wd']}: chosen gamma {row['chosen_gamma']}, "
              f"acc {row['acc_at_chosen']}, macc {row['macc']}")
    for kind, path in result.reports.items():
        print(f"{kind}: {path}")
    return EXIT_OK


def cmd_report(args) -> int:
    ledger = RunLedger.from_json(Path(args.ledger).read_text(encoding="utf-8"))
    formats = [f.strip() for f in args.format.split(",")]
    if any(f not in ("csv", "json") for f in formats):
        raise ConfigError(f"--format entries must be csv or json, got {args.format}")
    written = emit_report(ledger, args.out or Path(args.ledger).parent, formats, args.with_baseline, args.plots)
    for kind, path in written.items():
        print(f"{kind}: {path}")
    return EXIT_OK


def cmd_make_toy_data(args) -> int:
    ds = make_shapes(args.n_per_class, args.resolution or 32, args.seed or 0)
    write_dataset(ds, args.out)
    print(f"wrote {len(ds)} images ({', '.join(ds.class_names)}) to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value experiment config file")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--out", help="output directory (overrides the config)")
    common.add_argument("--resolution", type=int, help="image side length in pixels")
    common.add_argument("--gamma-max", type=int, dest="gamma_max", help="cap on the extension factor")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    parser = argparse.ArgumentParser(prog="ssce", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest-check", parents=[common], help="validate an image directory")
    p.add_argument("--data", help="dataset root (overrides the config)")
    p.set_defaults(func=cmd_ingest_check)

    p = sub.add_parser("train-cnn", parents=[common], help="train one baseline classifier")
    p.add_argument("--data")
    p.add_argument("--preset", help="backbone preset (default: first configured)")
    p.add_argument("--wd", choices=("on", "off"), default="off")
    p.add_argument("--epochs", type=int)
    p.set_defaults(func=cmd_train_cnn)

    p = sub.add_parser("train-gan", parents=[common], help="train per-class GANs")
    p.add_argument("--data")
    p.add_argument("--class", dest="class_name", help="train only this class")
    p.add_argument("--embedder", help="classifier checkpoint for FID/IS tracking")
    p.set_defaults(func=cmd_train_gan)

    p = sub.add_parser("synthesize", parents=[common], help="write pseudo-labeled images")
    p.add_argument("--gan-dir", required=True, help="directory holding <class>/generator.ssce")
    p.add_argument("--count", type=int, required=True, help="images per class")
    p.add_argument("--gamma", type=int, help="recorded in the dataset provenance")
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("eval-metrics", parents=[common], help="FID / IS of an image folder")
    p.add_argument("--embedder", required=True, help="classifier checkpoint")
    p.add_argument("--fake", required=True, help="class-per-directory folder of generated images")
    p.add_argument("--real", help="class-per-directory folder of real images (enables FID)")
    p.add_argument("--splits", type=int, default=1)
    p.set_defaults(func=cmd_eval_metrics)

    p = sub.add_parser("run-ssce", parents=[common], help="run the full pipeline")
    p.add_argument("--data")
    p.set_defaults(func=cmd_run_ssce)

    p = sub.add_parser("report", parents=[common], help="emit report files from a ledger")
    p.add_argument("--ledger", required=True)
    p.add_argument("--format", default="csv,json")
    p.add_argument("--plots", action="store_true")
    p.add_argument("--with-baseline", action="store_true", help="add gamma = 0 rows")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("make-toy-data", parents=[common], help="write the procedural shapes dataset")
    p.add_argument("--n-per-class", type=int, default=40)
    p.set_defaults(func=cmd_make_toy_data)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except Exception as exc:  # noqa: BLE001 - mapped to a documented exit code
        code = exit_code_for(exc)
        print(f"error [{args.command}]: {type(exc).__name__}: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
