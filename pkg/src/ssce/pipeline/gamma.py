"""Incremental search over the extension factor gamma, and the run ledger it fills."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

from ..metrics.scores import TEIInputs, tei

log = logging.getLogger(__name__)

Structure = tuple[str, bool]  # (classifier preset, weight decay on)


def structure_label(structure: Structure) -> str:
    name, wd = structure
    return f"{name}/wd-{'on' if wd else 'off'}"


@dataclass(frozen=True)
class TrainingRecord:
    structure: str
    wd: bool
    gamma: int
    acc: float  # percentage points on the real-only test split
    seconds: float
    seed: int

    @property
    def key(self) -> tuple[str, bool, int]:
        return (self.structure, self.wd, self.gamma)


class LedgerError(RuntimeError):
    pass


@dataclass
class RunLedger:
    """Every trained cell of one experiment. Cells are write-once."""

    config_hash: str = ""
    seed: int = 0
    embedder_id: str = ""
    baselines: dict = field(default_factory=dict)  # (structure, wd) -> TrainingRecord with gamma 0
    cells: dict = field(default_factory=dict)  # (structure, wd, gamma) -> TrainingRecord
    failed: dict = field(default_factory=dict)  # (structure, wd, gamma) -> reason
    gan_traces: dict = field(default_factory=dict)  # class name -> list of {"iteration", "fid", "is"}
    gate: dict = field(default_factory=dict)  # class name -> {"fid", "baseline", "passed"}
    stop_gamma: int = 0

    # -- recording ------------------------------------------------------------

    def add_baseline(self, rec: TrainingRecord) -> None:
        key = (rec.structure, rec.wd)
        if rec.gamma != 0:
            raise LedgerError(f"baseline records must have gamma 0, got {rec.gamma}")
        if key in self.baselines:
            raise LedgerError(f"baseline for {key} already recorded")
        self.baselines[key] = rec

    def add_cell(self, rec: TrainingRecord) -> None:
        if rec.key in self.cells or rec.key in self.failed:
            raise LedgerError(f"cell {rec.key} already recorded")
        if (rec.structure, rec.wd) not in self.baselines:
            raise LedgerError(f"no baseline for {(rec.structure, rec.wd)}")
        self.cells[rec.key] = rec

    def add_failure(self, key: tuple[str, bool, int], reason: str) -> None:
        if key in self.cells or key in self.failed:
            raise LedgerError(f"cell {key} already recorded")
        self.failed[key] = reason

    # -- derived values -------------------------------------------------------

    def tei(self, key: tuple[str, bool, int]) -> float:
        rec = self.cells[key]
        base = self.baselines[(rec.structure, rec.wd)]
        return tei(TEIInputs(rec.acc, base.acc, rec.seconds, base.seconds))

    def tei_or_none(self, key: tuple[str, bool, int]) -> float | None:
        """TEI of a cell, or None where it is undefined (extra time of at most 1 s)."""
        try:
            return self.tei(key)
        except ValueError:
            return None

    def structures(self) -> list[Structure]:
        return list(self.baselines)

    def gammas(self, structure: Structure) -> list[int]:
        return sorted(g for (s, w, g) in self.cells if (s, w) == tuple(structure))

    def chosen_gamma(self, structure: Structure) -> int | None:
        """Gamma with the highest TEI; ties go to the smallest gamma. Undefined TEIs are skipped."""
        best, best_val = None, -math.inf
        for g in self.gammas(structure):
            v = self.tei_or_none((*structure, g))
            if v is not None and v > best_val:
                best, best_val = g, v
        return best

    def macc(self, structure: Structure) -> float | None:
        accs = [self.cells[(*structure, g)].acc for g in self.gammas(structure)]
        return max(accs) if accs else None

    def summary(self) -> list[dict]:
        rows = []
        for s in self.structures():
            g = self.chosen_gamma(s)
            rows.append({
                "structure": s[0],
                "wd": "on" if s[1] else "off",
                "chosen_gamma": g,
                "acc_at_chosen": None if g is None else self.cells[(*s, g)].acc,
                "tei_at_chosen": None if g is None else self.tei_or_none((*s, g)),
                "macc": self.macc(s),
                "acc_b": self.baselines[s].acc,
                "t_b": self.baselines[s].seconds,
            })
        return rows

    # -- persistence ----------------------------------------------------------

    def to_json(self) -> str:
        def key_str(k):
            return "|".join(str(x) for x in k)

        doc = {
            "config_hash": self.config_hash,
            "seed": self.seed,
            "embedder_id": self.embedder_id,
            "stop_gamma": self.stop_gamma,
            "baselines": [asdict(r) for r in self.baselines.values()],  # configured structure order
            "cells": [asdict(self.cells[k]) for k in sorted(self.cells)],
            "failed": {key_str(k): self.failed[k] for k in sorted(self.failed)},
            "gan_traces": self.gan_traces,
            "gate": self.gate,
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> RunLedger:
        doc = json.loads(text)
        led = cls(doc["config_hash"], doc["seed"], doc["embedder_id"], stop_gamma=doc["stop_gamma"])
        for r in doc["baselines"]:
            led.add_baseline(TrainingRecord(**r))
        for r in doc["cells"]:
            led.add_cell(TrainingRecord(**r))
        for k, v in doc["failed"].items():
            s, wd, g = k.split("|")
            led.failed[(s, wd == "True", int(g))] = v
        led.gan_traces = doc["gan_traces"]
        led.gate = doc["gate"]
        return led

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json(), encoding="utf-8")
        return path


def gamma_search(
    ledger: RunLedger,
    train_cell: Callable[[Structure, int], TrainingRecord],
    gamma_max: int,
    structures: list[Structure] | None = None,
) -> RunLedger:
    """Train every structure at gamma = 1, 2, ... while anything keeps improving.

    After finishing a gamma, the next one runs only if at least one
    structure's TEI there is strictly greater than its TEI at the previous
    gamma (every successful cell at gamma 1 counts as an improvement). The
    search never goes past ``gamma_max``. A cell whose training raises is
    logged as failed and takes no part in the stopping decision.
    """
    if gamma_max < 1:
        raise ValueError(f"gamma_max must be >= 1, got {gamma_max}")
    structures = list(structures if structures is not None else ledger.structures())
    previous: dict = {}
    gamma = 1
    while True:
        improved = False
        current: dict = {}
        for s in structures:
            key = (*s, gamma)
            if key in ledger.cells:  # resumed from disk
                rec = ledger.cells[key]
            elif key in ledger.failed:
                continue
            else:
                try:
                    rec = train_cell(s, gamma)
                    ledger.add_cell(rec)
                except Exception as exc:  # noqa: BLE001 - a failed cell must not end the search
                    log.warning("gamma-search: %s at gamma=%d failed: %s", structure_label(s), gamma, exc)
                    ledger.add_failure(key, f"{type(exc).__name__}: {exc}")
                    continue
            try:
                value = ledger.tei(key)
            except ValueError as exc:
                log.warning("gamma-search: TEI undefined for %s at gamma=%d: %s", structure_label(s), gamma, exc)
                continue
            current[s] = value
            prev = previous.get(s)
            if gamma == 1 or (prev is not None and value > prev):
                improved = True
            log.info("gamma-search: %s gamma=%d TEI=%.4f", structure_label(s), gamma, value)
        ledger.stop_gamma = gamma
        if not improved or gamma >= gamma_max:
            log.info("gamma-search: stopping after gamma=%d (improved=%s)", gamma, improved)
            return ledger
        previous = current
        gamma += 1
