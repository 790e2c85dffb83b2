"""End-to-end experiment: baselines, per-class GANs, quality gate, gamma search, report.

Every artifact lives under ``config.output_dir``. Finished stages leave
checkpoints and JSON records behind, so an interrupted run picks up where
it stopped when started again with the same configuration.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path

from ..data.augment import AugmentConfig
from ..data.dataset import (
    DatasetError, ExtensionPlan, LabeledDataset, SplitPair, merge, stratified_split, synthesize_pseudo_labeled,
)
from ..data.io import ingest_directory
from ..metrics.quality import two_sample_baseline
from ..models.checkpoint import (
    CheckpointError, TransferError, apply_checkpoint, load_checkpoint, save_checkpoint, transfer_init,
)
from ..models.classifier import build_classifier
from ..models.gan import build_gan
from ..nn.optim import NonFiniteGradientError
from .config import ConfigError, ExperimentConfig, load_config
from .gamma import RunLedger, Structure, TrainingRecord, gamma_search, structure_label
from .report import emit_report
from .training import Clock, GanConfig, TrainingDivergedError, train_classifier, train_gan

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_TRAINING, EXIT_IO = 0, 2, 3, 4, 5


class StageError(RuntimeError):
    """A pipeline stage failed; carries the stage name and the process exit code."""

    def __init__(self, stage: str, exit_code: int, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
        self.exit_code = exit_code


def stable_seed(master: int, *parts) -> int:
    """Seed derived from the master seed and a tuple of labels, independent of execution order."""
    text = "|".join([str(master)] + [str(p) for p in parts])
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "little") >> 1


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, StageError):
        return exc.exit_code
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, DatasetError):
        return EXIT_DATA
    if isinstance(exc, (TrainingDivergedError, NonFiniteGradientError, TransferError)):
        return EXIT_TRAINING
    if isinstance(exc, (OSError, CheckpointError)):
        return EXIT_IO
    return EXIT_TRAINING


class _stage:
    """Context manager that turns any failure inside a stage into a tagged StageError."""

    def __init__(self, name: str):
        self.name = name

    def __enter__(self):
        log.info("[%s] start", self.name)
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is None:
            log.info("[%s] done", self.name)
            return False
        if isinstance(exc, StageError):
            return False
        raise StageError(self.name, exit_code_for(exc), f"{type(exc).__name__}: {exc}") from exc


# -- model (de)serialization helpers ------------------------------------------


def save_classifier(model, path, extra: dict | None = None) -> Path:
    meta = {"kind": "classifier", "preset": model.preset, "resolution": model.resolution,
            "num_classes": model.num_classes, "channels": model.channels, **(extra or {})}
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(model, path, metadata=meta)
    return path


def load_classifier(path):
    ckpt = load_checkpoint(path)
    m = ckpt.metadata
    if m.get("kind") != "classifier":
        raise CheckpointError(f"{path} does not hold a classifier")
    model = build_classifier(m["preset"], m["resolution"], m["num_classes"], m["channels"])
    apply_checkpoint(model, ckpt)
    model.eval()
    return model, ckpt


def save_generator(pair, cfg: GanConfig, class_name: str, path, extra: dict | None = None) -> Path:
    meta = {"kind": "generator", "variant": pair.variant, "latent": pair.latent_len,
            "resolution": pair.resolution, "channels": pair.channels, "width": cfg.width,
            "class_name": class_name, **(extra or {})}
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(pair.generator, path, metadata=meta)
    return path


def load_generator(path):
    ckpt = load_checkpoint(path)
    m = ckpt.metadata
    if m.get("kind") != "generator":
        raise CheckpointError(f"{path} does not hold a generator")
    pair = build_gan(m["variant"], m["latent"], m["resolution"], m["channels"], 0, m["width"], m["width"])
    apply_checkpoint(pair.generator, ckpt)
    pair.generator.eval()
    return pair.generator, ckpt


def gan_config_from(cfg: ExperimentConfig) -> GanConfig:
    opt, lr, beta1 = cfg.gan_settings()
    return GanConfig(
        variant=cfg.gan_variant, iterations=cfg.gan_iterations, batch=cfg.gan_batch, optimizer=opt,
        lr=lr, beta1=beta1, beta2=cfg.gan_beta2, n_critic=cfg.gan_n_critic, gp_lambda=cfg.gan_gp_lambda,
        clip=cfg.gan_clip, latent=cfg.gan_latent, width=cfg.gan_width, eval_every=cfg.gan_eval_every,
        eval_samples=cfg.gan_eval_samples, is_splits=cfg.is_splits,
        snapshot_iters=tuple(int(i) for i in cfg.gan_snapshot_iters),
    )


def _read_json(path: Path):
    return json.loads(path.read_text(encoding="utf-8")) if path.exists() else None


def _write_json(path: Path, doc) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True), encoding="utf-8")


# -- the experiment -----------------------------------------------------------


@dataclass
class ExperimentResult:
    ledger: RunLedger
    out_dir: Path
    reports: dict


class Experiment:
    """Stateful runner; each stage method can also be called on its own."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.out = Path(cfg.output_dir)
        self.hash = cfg.config_hash()
        self.ledger = RunLedger(config_hash=self.hash, seed=cfg.seed)
        self.dataset: LabeledDataset | None = None
        self.split: SplitPair | None = None
        self.models: dict = {}
        self.generators: dict = {}
        self.embedder = None
        self._synth_cache: dict = {}

    # stage helpers

    def _clock(self) -> Clock:
        return Clock(self.cfg.clock, self.cfg.seconds_per_sample)

    def _fresh_classifier(self, preset: str, seed: int):
        cfg = self.cfg
        model = build_classifier(preset, cfg.resolution, self.dataset.num_classes, cfg.channels, seed)
        if cfg.transfer_cnn:
            report = transfer_init(model, load_checkpoint(cfg.transfer_cnn), cfg.allow_empty_transfer)
            log.info("[transfer] %s: copied %d entries, skipped %s", model.arch_id, len(report.copied),
                     report.skipped_names)
        return model

    def _fit(self, split: SplitPair, structure: Structure, epochs: int, seed: int):
        cfg = self.cfg
        preset, wd = structure
        model = self._fresh_classifier(preset, seed)
        return train_classifier(
            split, model, epochs, lr=cfg.cnn_lr, weight_decay=cfg.weight_decay if wd else 0.0,
            batch_size=cfg.cnn_batch, seed=seed,
            augment_config=AugmentConfig(cfg.augment_hflip, cfg.augment_rotate_deg),
            exempt_bias_and_norm=cfg.wd_exempt_bias_norm, clock=self._clock(),
        )

    def _resumable(self, record_path: Path):
        doc = _read_json(record_path) if self.cfg.resume else None
        return doc if doc is not None and doc.get("config_hash") == self.hash else None

    # stages

    def ingest(self) -> None:
        cfg = self.cfg
        with _stage("ingest"):
            if not cfg.dataset_root:
                raise DatasetError("dataset_root is not set")
            self.dataset = ingest_directory(cfg.dataset_root, cfg.resolution, cfg.channels, cfg.skip_undecodable)
            log.info("[ingest] %d images, classes %s, counts %s", len(self.dataset), self.dataset.class_names,
                     self.dataset.class_counts().tolist())
        with _stage("split"):
            self.split = stratified_split(self.dataset, cfg.split_ratio, stable_seed(cfg.seed, "split"))

    def baselines(self) -> None:
        cfg = self.cfg
        with _stage("baseline"):
            for s in cfg.structures():
                tag = f"{s[0]}-wd-{'on' if s[1] else 'off'}"
                rec_path = self.out / "baselines" / f"{tag}.json"
                ckpt_path = self.out / "baselines" / f"{tag}.ssce"
                seed = stable_seed(cfg.seed, s[0], s[1], 0)
                doc = self._resumable(rec_path)
                if doc is not None and ckpt_path.exists():
                    model, _ = load_classifier(ckpt_path)
                    rec = TrainingRecord(**doc["record"])
                    log.info("[baseline] resumed %s", structure_label(s))
                else:
                    res = self._fit(self.split, s, cfg.cnn_epochs_base, seed)
                    model = res.model
                    rec = TrainingRecord(s[0], s[1], 0, 100.0 * res.accuracy, res.seconds, seed)
                    save_classifier(model, ckpt_path)
                    _write_json(rec_path, {"config_hash": self.hash, "record": rec.__dict__, "trace": res.trace})
                    log.info("[baseline] %s acc=%.2f t=%.2fs", structure_label(s), rec.acc, rec.seconds)
                self.ledger.add_baseline(rec)
                self.models[s] = model
            first = cfg.structures()[0]
            self.embedder = self.models[first]
            self.ledger.embedder_id = f"{self.embedder.arch_id}@{structure_label(first)}#{self.hash}"

    def gans(self) -> None:
        cfg = self.cfg
        gcfg = gan_config_from(cfg)
        transfer = None
        if cfg.transfer_gan:
            transfer = (load_checkpoint(cfg.transfer_gan), None)
        with _stage("gan"):
            for c, name in enumerate(self.dataset.class_names):
                real = self.split.train.of_class(c).images
                gdir = self.out / "gan" / name
                rec_path, ckpt_path = gdir / "trace.json", gdir / "generator.ssce"
                doc = self._resumable(rec_path)
                if doc is not None and ckpt_path.exists():
                    gen, _ = load_generator(ckpt_path)
                    trace = doc["trace"]
                    log.info("[gan] resumed class '%s'", name)
                else:
                    res = train_gan(real, gcfg, stable_seed(cfg.seed, "gan", name), self.embedder, transfer,
                                    gdir / "snapshots", cfg.allow_empty_transfer)
                    gen, trace = res.pair.generator, res.trace
                    save_generator(res.pair, gcfg, name, ckpt_path)
                    _write_json(rec_path, {"config_hash": self.hash, "trace": trace, "losses": res.losses})
                    log.info("[gan] class '%s' final FID=%.4f IS=%.4f", name, trace[-1]["fid"], trace[-1]["is"])
                self.generators[c] = gen
                self.ledger.gan_traces[name] = trace

    def gate(self) -> None:
        cfg = self.cfg
        with _stage("gate"):
            rejected = []
            for c, name in enumerate(self.dataset.class_names):
                real = self.split.train.of_class(c).images
                floor = two_sample_baseline(self.embedder, real, stable_seed(cfg.seed, "gate", name))
                fid = self.ledger.gan_traces[name][-1]["fid"]
                passed = bool(fid <= cfg.gate_k * floor)
                self.ledger.gate[name] = {"fid": fid, "baseline": floor, "k": cfg.gate_k, "passed": passed}
                log.info("[gate] class '%s' FID=%.4f baseline=%.4f passed=%s", name, fid, floor, passed)
                if not passed:
                    rejected.append(name)
            if rejected:
                msg = f"generators for {rejected} exceed {cfg.gate_k} x the two-sample baseline FID"
                if cfg.gate_action == "fail":
                    raise StageError("gate", EXIT_TRAINING, msg)
                log.warning("[gate] %s; continuing because gate_action = warn", msg)

    def _synthesized(self, gamma: int) -> LabeledDataset:
        if gamma not in self._synth_cache:
            plan = ExtensionPlan.from_base(self.dataset.class_counts(), gamma)
            self._synth_cache = {gamma: synthesize_pseudo_labeled(
                self.generators, plan, self.dataset.class_names, stable_seed(self.cfg.seed, "synth", gamma))}
        return self._synth_cache[gamma]

    def train_cell(self, s: Structure, gamma: int) -> TrainingRecord:
        cfg = self.cfg
        tag = f"{s[0]}-wd-{'on' if s[1] else 'off'}-g{gamma}"
        rec_path = self.out / "cells" / f"{tag}.json"
        seed = stable_seed(cfg.seed, s[0], s[1], gamma)
        merged = SplitPair(merge(self.split.train, self._synthesized(gamma)), self.split.test, self.split.seed,
                           self.split.ratio)
        res = self._fit(merged, s, cfg.cnn_epochs_merged, seed)
        rec = TrainingRecord(s[0], s[1], gamma, 100.0 * res.accuracy, res.seconds, seed)
        save_classifier(res.model, self.out / "cells" / f"{tag}.ssce")
        _write_json(rec_path, {"config_hash": self.hash, "record": rec.__dict__, "trace": res.trace})
        log.info("[gamma] %s gamma=%d acc=%.2f t=%.2fs", structure_label(s), gamma, rec.acc, rec.seconds)
        return rec

    def _resume_cells(self) -> None:
        cells = self.out / "cells"
        if not cells.is_dir():
            return
        for p in sorted(cells.glob("*.json")):
            doc = self._resumable(p)
            if doc is not None:
                rec = TrainingRecord(**doc["record"])
                if (rec.structure, rec.wd) in self.ledger.baselines and rec.key not in self.ledger.cells:
                    self.ledger.add_cell(rec)

    def search(self) -> None:
        with _stage("gamma"):
            self._resume_cells()
            gamma_search(self.ledger, self.train_cell, self.cfg.gamma_max, self.cfg.structures())
            if not self.ledger.cells:
                raise StageError("gamma", EXIT_TRAINING, "every gamma-search cell failed")

    def report(self) -> dict:
        with _stage("report"):
            self.ledger.save(self.out / "ledger.json")
            return emit_report(self.ledger, self.out, self.cfg.report_formats, plots=self.cfg.plots)

    def run(self) -> ExperimentResult:
        with _stage("setup"):
            self.out.mkdir(parents=True, exist_ok=True)
            (self.out / "config.txt").write_text(self.cfg.to_text(), encoding="utf-8")
        self.ingest()
        self.baselines()
        self.gans()
        self.gate()
        self.search()
        reports = self.report()
        return ExperimentResult(self.ledger, self.out, reports)


def run_experiment(config, **overrides) -> ExperimentResult:
    """Run the whole pipeline from an ``ExperimentConfig`` or a config file path."""
    if isinstance(config, ExperimentConfig):
        cfg = config.replace(**{k: v for k, v in overrides.items() if v is not None}) if overrides else config
    else:
        try:
            cfg = load_config(config, **overrides)
        except ConfigError as exc:
            raise StageError("config", EXIT_CONFIG, str(exc)) from exc
    return Experiment(cfg).run()

