"""Detection and calibration metrics.

Detection metrics take two score arrays, ``id_scores`` and ``ood_scores``,
with in-distribution as the positive class and larger scores meaning "more
in-distribution".
"""

import csv
import io
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .errors import ContractError


def _pair(id_scores, ood_scores):
    id_scores = np.asarray(id_scores, dtype=np.float64).ravel()
    ood_scores = np.asarray(ood_scores, dtype=np.float64).ravel()
    if id_scores.size == 0 or ood_scores.size == 0:
        raise ContractError("both ID and OOD score sets must be non-empty")
    if not (np.all(np.isfinite(id_scores)) and np.all(np.isfinite(ood_scores))):
        raise ContractError("scores must be finite")
    return id_scores, ood_scores


def auroc(id_scores, ood_scores):
    """Mann-Whitney AUROC; ties count one half."""
    id_scores, ood_scores = _pair(id_scores, ood_scores)
    n_in, n_out = id_scores.size, ood_scores.size
    ranks = rankdata(np.concatenate([id_scores, ood_scores]))
    u = ranks[:n_in].sum() - n_in * (n_in + 1) / 2.0
    return float(u / (n_in * n_out))


def aupr(id_scores, ood_scores):
    """Average precision with ID as positives: ``sum_k (R_k - R_{k-1}) P_k``.

    Thresholds run over the unique scores in descending order; each step
    admits every example tied at that score.
    """
    id_scores, ood_scores = _pair(id_scores, ood_scores)
    scores = np.concatenate([id_scores, ood_scores])
    positive = np.concatenate([np.ones(id_scores.size), np.zeros(ood_scores.size)])
    order = np.argsort(-scores, kind="stable")
    scores, positive = scores[order], positive[order]
    tp = np.cumsum(positive)
    fp = np.cumsum(1.0 - positive)
    # last index of each run of tied scores
    ends = np.r_[np.nonzero(np.diff(scores))[0], scores.size - 1]
    tp, fp = tp[ends], fp[ends]
    precision = tp / (tp + fp)
    recall = tp / id_scores.size
    return math.fsum(np.diff(np.r_[0.0, recall]) * precision)


def tpr95_threshold(id_scores):
    """Largest threshold ``tau`` with at least 95% of ID scores ``>= tau``."""
    ranked = np.sort(np.asarray(id_scores, dtype=np.float64))[::-1]
    k = (95 * ranked.size + 99) // 100
    return ranked[k - 1]


def tnr_at_tpr95(id_scores, ood_scores):
    """Fraction of OOD scores strictly below the 95%-TPR threshold."""
    id_scores, ood_scores = _pair(id_scores, ood_scores)
    if id_scores.size < 20:
        warnings.warn("fewer than 20 ID scores: TPR95 threshold is coarsely quantised", stacklevel=2)
    tau = tpr95_threshold(id_scores)
    return float(np.mean(ood_scores < tau))


def dtacc(id_scores, ood_scores):
    """Best balanced detection accuracy over all thresholds.

    ``1 - min_d 0.5 * (P_in(s <= d) + P_out(s > d))`` with ``d`` ranging over
    midpoints of adjacent distinct scores and +-inf.
    """
    id_scores, ood_scores = _pair(id_scores, ood_scores)
    uniq = np.unique(np.concatenate([id_scores, ood_scores]))
    deltas = np.r_[-np.inf, (uniq[:-1] + uniq[1:]) / 2.0, np.inf]
    sorted_in = np.sort(id_scores)
    sorted_out = np.sort(ood_scores)
    miss_in = np.searchsorted(sorted_in, deltas, side="right") / id_scores.size
    pass_out = 1.0 - np.searchsorted(sorted_out, deltas, side="right") / ood_scores.size
    return float(1.0 - np.min(0.5 * (miss_in + pass_out)))


def accuracy(probs, labels):
    """Top-1 accuracy; ``argmax`` ties go to the lowest class index."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    return float(np.mean(np.argmax(probs, axis=1) == labels))


def reliability_bins(probs, labels, bins=15):
    """Per-bin ``(count, accuracy, confidence)`` over equal-width bins on (0, 1]."""
    if bins < 1:
        raise ContractError("bins must be >= 1")
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    conf = probs.max(axis=1)
    correct = (np.argmax(probs, axis=1) == labels).astype(np.float64)
    edges = np.linspace(0.0, 1.0, bins + 1)
    idx = np.clip(np.searchsorted(edges, conf, side="left") - 1, 0, bins - 1)
    counts = np.bincount(idx, minlength=bins)
    safe = np.maximum(counts, 1)
    acc = np.bincount(idx, weights=correct, minlength=bins) / safe
    mean_conf = np.bincount(idx, weights=conf, minlength=bins) / safe
    return counts, acc, mean_conf


def ece(probs, labels, bins=15):
    """Expected calibration error: ``sum_b n_b / B * |acc_b - conf_b|``."""
    counts, acc, conf = reliability_bins(probs, labels, bins)
    return float(np.sum(counts / counts.sum() * np.abs(acc - conf)))


DETECTION_METRICS = {
    "auroc": auroc,
    "aupr": aupr,
    "tnr_at_tpr95": tnr_at_tpr95,
    "dtacc": dtacc,
}


def detection_metrics(id_scores, ood_scores):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return {name: fn(id_scores, ood_scores) for name, fn in DETECTION_METRICS.items()}


REPORT_COLUMNS = (
    "head",
    "score",
    "ood_set",
    "status",
    "accuracy",
    "ece",
    "ece_uncalibrated",
    "temperature",
    "auroc",
    "aupr",
    "tnr_at_tpr95",
    "dtacc",
)


@dataclass
class EvalReport:
    """Rows of ``head x score x ood_set`` results.

    ``accuracy``/``ece`` describe the ID test split and repeat on every row of
    a head. Unsupported head/score pairs keep empty metric cells.
    """

    rows: list = field(default_factory=list)

    def add(self, **row):
        unknown = set(row) - set(REPORT_COLUMNS)
        if unknown:
            raise ValueError(f"unknown report columns: {sorted(unknown)}")
        self.rows.append({c: row.get(c) for c in REPORT_COLUMNS})

    def select(self, **match):
        return [r for r in self.rows if all(r[k] == v for k, v in match.items())]

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in self.rows:
            w.writerow([_fmt_csv(r[c]) for c in REPORT_COLUMNS])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text):
        report = cls()
        for rec in csv.DictReader(io.StringIO(text)):
            row = {}
            for c in REPORT_COLUMNS:
                v = rec[c]
                row[c] = v if c in ("head", "score", "ood_set", "status") else (None if v == "" else float(v))
            report.rows.append(row)
        return report

    def to_text(self):
        header = ["head", "score", "ood_set", "acc%", "ece%", "T", "auroc%", "aupr%", "tnr@tpr95%", "dtacc%"]
        lines = []
        for r in self.rows:
            if r["status"] != "ok":
                lines.append([r["head"], r["score"], r["ood_set"], "unsupported"] + [""] * 6)
                continue
            lines.append([
                r["head"], r["score"], r["ood_set"],
                _pct(r["accuracy"]), _pct(r["ece"]), f"{r['temperature']:.4g}",
                _pct(r["auroc"]), _pct(r["aupr"]), _pct(r["tnr_at_tpr95"]), _pct(r["dtacc"]),
            ])
        widths = [max(len(str(x)) for x in col) for col in zip(header, *lines)]
        out = ["  ".join(str(x).ljust(w) for x, w in zip(header, widths)).rstrip()]
        out.append("  ".join("-" * w for w in widths))
        out += ["  ".join(str(x).ljust(w) for x, w in zip(line, widths)).rstrip() for line in lines]
        return "\n".join(out) + "\n"


def _fmt_csv(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return format(v, ".17g") if math.isfinite(v) else ""
    return str(v)


def _pct(v):
    return f"{100.0 * v:.2f}"
