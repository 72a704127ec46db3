"""Turn a trained model plus ID/OOD sets into an :class:`EvalReport`."""

import numpy as np

from .errors import UnsupportedError
from .metrics import EvalReport, accuracy, detection_metrics, ece
from .scores import SCORE_KINDS, compute_score


def score_sets(model, dataset):
    """Features, raw logits and inference probabilities for ``dataset``."""
    feats = model.features(dataset.features)
    logits = model.logits(None, feats)
    probs = model.predict_proba(None, feats)
    return feats, logits, probs


def model_scores(model, dataset, kind, cache=None):
    """Score array of ``kind`` for every row; raises UnsupportedError if undefined."""
    feats, logits, probs = cache if cache is not None else score_sets(model, dataset)
    return compute_score(kind, model.kind, model.head, feats, logits, probs)


def evaluate(model, test_set, ood_sets, scores=None, bins=15, head_name=None, report=None):
    """Append ``head x score x ood_set`` rows for ``model`` to ``report``."""
    report = report if report is not None else EvalReport()
    head_name = head_name or model.kind
    scores = list(scores or SCORE_KINDS)
    id_cache = score_sets(model, test_set)
    probs = id_cache[2]
    base = {
        "head": head_name,
        "accuracy": accuracy(probs, test_set.labels),
        "ece": ece(probs, test_set.labels, bins),
        "ece_uncalibrated": None if model.calibration is None else model.calibration.ece_before,
        "temperature": model.loss_config.inference_temperature,
    }
    ood_caches = {name: score_sets(model, ds) for name, ds in ood_sets.items()}
    for kind in scores:
        try:
            id_scores = model_scores(model, test_set, kind, id_cache)
        except UnsupportedError:
            for name in ood_sets:
                report.add(**base, score=kind, ood_set=name, status="unsupported")
            continue
        for name, ds in ood_sets.items():
            ood_scores = model_scores(model, ds, kind, ood_caches[name])
            report.add(**base, score=kind, ood_set=name, status="ok", **detection_metrics(id_scores, ood_scores))
    return report


def mean_entropy(model, dataset):
    probs = model.predict_proba(dataset.features)
    p = np.where(probs > 0, probs, 1.0)
    return float(np.mean(-(probs * np.log(p)).sum(axis=1)))
