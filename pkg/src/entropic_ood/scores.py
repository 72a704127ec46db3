"""OOD detection scores. Higher always means more in-distribution."""

import numpy as np

from . import numeric
from .errors import ShapeError, UnsupportedError
from .heads import DISTANCE_KINDS

SCORE_KINDS = ("mps", "es", "mds", "max_logit", "mmles")
DEFAULT_SCORE = {"softmax": "es", "isomax": "es", "isomax_plus": "mds", "dismax": "mmles"}


def mps(probs):
    """Maximum probability."""
    return numeric.as_matrix(probs, "probs").max(axis=1)


def entropic_score(probs):
    """Negative Shannon entropy of each row."""
    return -numeric.shannon_entropy(probs)[:, 0]


def mds(features, head):
    """Negative minimum distance between normalised features and prototypes.

    The distance scale is left out; it rescales every distance equally.
    """
    if getattr(head, "prototypes", None) is None:
        raise UnsupportedError("MDS needs a prototype head")
    d = numeric.pairwise_euclidean(numeric.normalize_rows(features), numeric.normalize_rows(head.prototypes))
    return -d.min(axis=1)


def max_logit(logits):
    return numeric.as_matrix(logits, "logits").max(axis=1)


def mmles(logits_plus, probs):
    """Max logit + mean logit - entropy, per row."""
    logits_plus = numeric.as_matrix(logits_plus, "logits")
    probs = numeric.as_matrix(probs, "probs")
    if logits_plus.shape != probs.shape:
        raise ShapeError(f"logits {logits_plus.shape} vs probs {probs.shape}")
    return logits_plus.max(axis=1) + logits_plus.mean(axis=1) + entropic_score(probs)


def compute_score(kind, head_kind, head, features, logits, probs):
    """Dispatch one score by name. ``logits`` are the head's raw logits."""
    if kind == "mps":
        return mps(probs)
    if kind == "es":
        return entropic_score(probs)
    if kind == "mds":
        if head_kind not in DISTANCE_KINDS:
            raise UnsupportedError(f"MDS is undefined for the {head_kind} head")
        return mds(features, head)
    if kind == "max_logit":
        return max_logit(logits)
    if kind == "mmles":
        return mmles(logits, probs)
    raise UnsupportedError(f"unknown score {kind!r}")
