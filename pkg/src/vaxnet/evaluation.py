"""Accuracy, ROC/AUC, confusion matrices and results-table reports."""
from __future__ import annotations

import json
import statistics
from dataclasses import asdict, dataclass, field
from typing import IO, Iterable, Sequence

import numpy as np
from scipy.stats import rankdata

from .models import MODEL_NAMES, REPRESENTATION
from .features import BOW

DISPLAY_NAME = {
    "logreg": "Logistic Regression",
    "rf": "Random Forest",
    "hinge": "Linear SGD",
    "nb": "Multinomial NB",
    "dnn-bow": "DNN",
    "dnn-seq": "DNN",
    "gru": "GRU",
    "lstm": "LSTM",
}
DISPLAY_REPRESENTATION = {BOW: "Bag of Words", "seq": "Sequential"}
REPORT_FORMAT = "vaxnet-report"


def _check(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel()
    if len(s) != len(y):
        raise ValueError(f"{len(s)} scores but {len(y)} labels")
    if len(s) == 0:
        raise ValueError("empty input")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    return s, y.astype(np.int64)


def _both_classes(y):
    n_pos = int(y.sum())
    if n_pos == 0 or n_pos == len(y):
        raise ValueError("both classes must be present")
    return n_pos, len(y) - n_pos


def accuracy(scores, labels, threshold: float = 0.5) -> float:
    s, y = _check(scores, labels)
    return float(np.mean((s >= threshold).astype(np.int64) == y))


def roc_auc(scores, labels) -> float:
    """Mann-Whitney AUC: P(pos > neg) with ties counted as one half."""
    s, y = _check(scores, labels)
    n_pos, n_neg = _both_classes(y)
    ranks = rankdata(s)  # midranks give ties half credit
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def roc_curve(scores, labels) -> list[tuple[float, float]]:
    """(FPR, TPR) at every distinct threshold, from (0, 0) to (1, 1)."""
    s, y = _check(scores, labels)
    n_pos, n_neg = _both_classes(y)
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    # last index of each run of equal scores
    ends = np.r_[np.flatnonzero(np.diff(s) != 0), len(s) - 1]
    tp = np.cumsum(y)[ends]
    fp = (ends + 1) - tp
    pts = [(0.0, 0.0)]
    pts += [(float(f / n_neg), float(t / n_pos)) for f, t in zip(fp, tp)]
    return pts


def trapezoid_area(points: Sequence[tuple[float, float]]) -> float:
    area = 0.0
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        area += (x1 - x0) * (y0 + y1) / 2.0
    return area


def confusion_matrix(scores, labels, threshold: float = 0.5) -> dict[str, int]:
    s, y = _check(scores, labels)
    pred = s >= threshold
    return {
        "tp": int(np.sum(pred & (y == 1))),
        "fp": int(np.sum(pred & (y == 0))),
        "tn": int(np.sum(~pred & (y == 0))),
        "fn": int(np.sum(~pred & (y == 1))),
    }


@dataclass
class ReportRow:
    model: str
    name: str
    accuracy: float
    auc: float
    representation: str
    confusion: dict = field(default_factory=dict)
    roc: list = field(default_factory=list)
    n_test: int = 0
    # filled when several seeds were pooled
    accuracy_std: float | None = None
    auc_std: float | None = None
    n_runs: int = 1


@dataclass
class EvalReport:
    rows: list[ReportRow]
    seed: int | None = None
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        for r in self.rows:
            if not (0.0 <= r.accuracy <= 1.0 and 0.0 <= r.auc <= 1.0):
                raise ValueError(f"{r.model}: accuracy and auc must lie in [0, 1]")
            if r.confusion and sum(r.confusion.values()) != r.n_test:
                raise ValueError(f"{r.model}: confusion counts do not sum to the test size")

    def to_dict(self) -> dict:
        return {"format": REPORT_FORMAT, "seed": self.seed, "config": self.config,
                "rows": [asdict(r) for r in self.rows]}

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        if d.get("format") != REPORT_FORMAT:
            raise ValueError("not a vaxnet report")
        rows = []
        for r in d["rows"]:
            r = dict(r)
            r["roc"] = [tuple(p) for p in r.get("roc", [])]
            rows.append(ReportRow(**r))
        return cls(rows, d.get("seed"), d.get("config", {}))

    def write_json(self, fh: IO[str]) -> None:
        json.dump(self.to_dict(), fh, indent=1, sort_keys=True)
        fh.write("\n")

    @classmethod
    def read_json(cls, fh: IO[str]) -> "EvalReport":
        return cls.from_dict(json.load(fh))

    def to_markdown(self) -> str:
        lines = ["| Classifier | Accuracy | AUC | Data Representation |", "|---|---|---|---|"]
        for r in self.rows:
            if r.n_runs > 1:
                acc = f"{r.accuracy:.2f} ± {r.accuracy_std:.2f}"
                auc = f"{r.auc:.2f} ± {r.auc_std:.2f}"
            else:
                acc, auc = f"{r.accuracy:.2f}", f"{r.auc:.2f}"
            lines.append(f"| {r.name} | {acc} | {auc} | {r.representation} |")
        return "\n".join(lines) + "\n"


def evaluate_scores(model: str, scores, labels, threshold: float = 0.5) -> ReportRow:
    """One report row from a model's test scores."""
    if model not in MODEL_NAMES:
        raise ValueError(f"unknown model {model!r}")
    s, y = _check(scores, labels)
    return ReportRow(
        model=model,
        name=DISPLAY_NAME[model],
        accuracy=accuracy(s, y, threshold),
        auc=roc_auc(s, y),
        representation=DISPLAY_REPRESENTATION[REPRESENTATION[model]],
        confusion=confusion_matrix(s, y, threshold),
        roc=roc_curve(s, y),
        n_test=len(y),
    )


def _order(model: str) -> int:
    return MODEL_NAMES.index(model)


def build_report(rows: Iterable[ReportRow], seed: int | None = None, config: dict | None = None) -> EvalReport:
    """Rows sorted into the canonical classifier order."""
    rows = sorted(rows, key=lambda r: _order(r.model))
    seen = [r.model for r in rows]
    if len(set(seen)) != len(seen):
        raise ValueError("one row per model; pool repeated runs with merge_reports")
    return EvalReport(rows, seed, dict(config or {}))


def merge_reports(reports: Sequence[EvalReport]) -> EvalReport:
    """Pool reports: a single report is returned as is, several become mean ± stdev rows."""
    if not reports:
        raise ValueError("no reports to merge")
    by_model: dict[str, list[ReportRow]] = {}
    for rep in reports:
        for r in rep.rows:
            by_model.setdefault(r.model, []).append(r)
    if all(len(v) == 1 for v in by_model.values()):
        rows = [v[0] for v in by_model.values()]
        seeds = {rep.seed for rep in reports}
        return build_report(rows, seeds.pop() if len(seeds) == 1 else None, reports[0].config)
    rows = []
    for model, rs in by_model.items():
        accs = [r.accuracy for r in rs]
        aucs = [r.auc for r in rs]
        rows.append(ReportRow(
            model=model, name=rs[0].name,
            accuracy=statistics.fmean(accs), auc=statistics.fmean(aucs),
            representation=rs[0].representation, n_test=0,
            accuracy_std=statistics.stdev(accs) if len(rs) > 1 else 0.0,
            auc_std=statistics.stdev(aucs) if len(rs) > 1 else 0.0,
            n_runs=len(rs),
        ))
    return build_report(rows, None, {"seeds": [rep.seed for rep in reports]})
