"""Tabular results (CSV / JSON) and optional plots from a run ledger."""

from __future__ import annotations

import csv
import io
import json
import logging
from pathlib import Path

from .gamma import RunLedger

log = logging.getLogger(__name__)

COLUMNS = ("structure", "wd", "gamma", "acc", "macc", "t", "t_b", "acc_b", "tei",
           "embedder_id", "seed", "config_hash")


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def report_rows(ledger: RunLedger, include_baseline: bool = False) -> list[dict]:
    """One row per successfully trained (structure, weight decay, gamma) cell."""
    rows = []
    for s in ledger.structures():
        base = ledger.baselines[s]
        common = {
            "structure": s[0], "wd": "on" if s[1] else "off", "macc": ledger.macc(s),
            "t_b": base.seconds, "acc_b": base.acc,
            "embedder_id": ledger.embedder_id, "config_hash": ledger.config_hash,
        }
        if include_baseline:
            rows.append({**common, "gamma": 0, "acc": base.acc, "t": base.seconds, "tei": None, "seed": base.seed})
        for g in ledger.gammas(s):
            rec = ledger.cells[(*s, g)]
            rows.append({**common, "gamma": g, "acc": rec.acc, "t": rec.seconds, "tei": ledger.tei_or_none((*s, g)),
                         "seed": rec.seed})
    return [{c: r[c] for c in COLUMNS} for r in rows]


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for r in rows:
        writer.writerow([_cell(r[c]) for c in COLUMNS])
    return buf.getvalue()


def emit_report(ledger: RunLedger, out_dir, formats=("csv", "json"), include_baseline: bool = False,
                plots: bool = False) -> dict[str, Path]:
    """Write ``report.csv`` / ``report.json`` (and plots) into ``out_dir``; returns the paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = report_rows(ledger, include_baseline)
    written = {}
    if "csv" in formats:
        p = out_dir / "report.csv"
        p.write_text(rows_to_csv(rows), encoding="utf-8")
        written["csv"] = p
    if "json" in formats:
        failed = [{"structure": k[0], "wd": "on" if k[1] else "off", "gamma": k[2], "reason": v}
                  for k, v in ledger.failed.items()]
        doc = {"rows": rows, "summary": ledger.summary(), "failed": failed,
               "stop_gamma": ledger.stop_gamma, "gate": ledger.gate}
        p = out_dir / "report.json"
        p.write_text(json.dumps(doc, indent=2), encoding="utf-8")
        written["json"] = p
    if plots:
        written.update(plot_report(ledger, out_dir))
    return written


def plot_report(ledger: RunLedger, out_dir) -> dict[str, Path]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    written = {}
    fig, ax = plt.subplots(figsize=(6, 4))
    for s in ledger.structures():
        base = ledger.baselines[s]
        gs = ledger.gammas(s)
        ts = [base.seconds] + [ledger.cells[(*s, g)].seconds for g in gs]
        accs = [base.acc] + [ledger.cells[(*s, g)].acc for g in gs]
        ax.plot(ts, accs, marker="o", label=f"{s[0]} wd-{'on' if s[1] else 'off'}")
    ax.set_xscale("log")
    ax.set_xlabel("training time (s)")
    ax.set_ylabel("test accuracy (%)")
    ax.legend(fontsize=7)
    fig.tight_layout()
    written["accuracy_plot"] = out_dir / "accuracy_vs_time.png"
    fig.savefig(written["accuracy_plot"], dpi=100)
    plt.close(fig)

    if ledger.gan_traces:
        fig, (a1, a2) = plt.subplots(1, 2, figsize=(9, 3.5))
        for name, trace in ledger.gan_traces.items():
            its = [e["iteration"] for e in trace]
            a1.plot(its, [e["fid"] for e in trace], label=name)
            a2.plot(its, [e["is"] for e in trace], label=name)
        a1.set_title("FID")
        a2.set_title("IS")
        for a in (a1, a2):
            a.set_xlabel("iteration")
            a.legend(fontsize=7)
        fig.tight_layout()
        written["gan_plot"] = out_dir / "gan_quality.png"
        fig.savefig(written["gan_plot"], dpi=100)
        plt.close(fig)
    return written
