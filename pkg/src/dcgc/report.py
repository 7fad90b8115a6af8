"""Run reports: a stable JSON schema for single runs and repeat summaries.

Reports round-trip losslessly through JSON (Python floats serialize via
repr), so the eval command can re-score a saved report.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np


@dataclass
class ClusterReport:
    """Everything one training run produces.

    metrics is None when the input graph carries no labels. Traces hold
    one entry per executed epoch plus stage wall-clock seconds and an
    optional metric snapshot taken at stage end.
    """

    config: dict
    seed: int
    predicted: list
    argmax_q: list
    metrics: dict | None
    homophily: float | None
    pretrain_trace: dict
    finetune_trace: dict
    # The fused embedding, kept only when a run is asked for it; large
    # (N x embed_dim), so the CLI writes it to CSV instead of the JSON.
    embedding: list | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def save_report(report: ClusterReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_report(path) -> ClusterReport:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    return ClusterReport(**raw)


def summarize_repeats(reports: list) -> dict:
    """Mean and population standard deviation per metric across seeds."""
    if not reports:
        raise ValueError("no reports to summarize")
    seeds = [r.seed for r in reports]
    out = {"repeats": len(reports), "seeds": seeds, "mean": {}, "std": {}}
    if any(r.metrics is None for r in reports):
        out["mean"] = None
        out["std"] = None
        return out
    names = sorted(reports[0].metrics)
    for name in names:
        vals = np.array([r.metrics[name] for r in reports], dtype=np.float64)
        out["mean"][name] = float(vals.mean())
        out["std"][name] = float(vals.std())  # population std (ddof=0)
    return out
