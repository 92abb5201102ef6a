"""EvalReport <-> versioned JSON document (``wtw-kit/report/1``).

Scores are fractions in [0, 1]; every score also carries a ``*_pct`` twin
for presentation.
"""
from __future__ import annotations

import json
from pathlib import Path

from .metrics import EvalReport, ImageEval

REPORT_SCHEMA = "wtw-kit/report/1"


def _key(t: float) -> str:
    return f"{t:g}"


def _prf_dict(p, r, f) -> dict:
    return {"precision": p, "recall": r, "f1": f,
            "precision_pct": 100 * p, "recall_pct": 100 * r, "f1_pct": 100 * f}


def _pct(x):
    return None if x is None else 100 * x


def report_to_dict(rep: EvalReport) -> dict:
    return {
        "schema": REPORT_SCHEMA,
        "ious": list(rep.ious),
        "physical": {_key(t): _prf_dict(*v) for t, v in sorted(rep.physical.items())},
        "adjacency": {_key(t): _prf_dict(*v) for t, v in sorted(rep.adjacency.items())},
        "teds": rep.teds,
        "teds_pct": _pct(rep.teds),
        "weighted_avg_f1": rep.weighted_avg_f1,
        "weighted_avg_f1_pct": _pct(rep.weighted_avg_f1),
        "images": [
            {
                "name": im.name,
                "physical": {_key(t): dict(zip(("matches", "n_pred", "n_gt"), map(int, v)))
                             for t, v in sorted(im.physical.items())},
                "adjacency": {_key(t): dict(zip(("correct", "n_pred", "n_gt"), map(int, v)))
                              for t, v in sorted(im.adjacency.items())},
                "teds": im.teds,
            }
            for im in rep.images
        ],
    }


def report_from_dict(d: dict) -> EvalReport:
    if d.get("schema") != REPORT_SCHEMA:
        raise ValueError(f"not a {REPORT_SCHEMA} document")

    def prf(block):
        return {float(k): (v["precision"], v["recall"], v["f1"]) for k, v in block.items()}

    images = [ImageEval(im["name"],
                        {float(k): (v["matches"], v["n_pred"], v["n_gt"]) for k, v in im["physical"].items()},
                        {float(k): (v["correct"], v["n_pred"], v["n_gt"]) for k, v in im["adjacency"].items()},
                        im["teds"])
              for im in d.get("images", [])]
    return EvalReport(tuple(d["ious"]), prf(d["physical"]), prf(d["adjacency"]), d["teds"],
                      d["weighted_avg_f1"], images)


def save_report(rep: EvalReport, path) -> None:
    Path(path).write_text(json.dumps(report_to_dict(rep), indent=1) + "\n")


def load_report(path) -> EvalReport:
    return report_from_dict(json.loads(Path(path).read_text()))
