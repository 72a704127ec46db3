"""Classification heads and their entropic training losses.

Four heads share one training loop:

* ``softmax``     -- affine logits ``W f + b`` (baseline)
* ``isomax``      -- ``-|f - p_j|`` with zero-initialised prototypes
* ``isomax_plus`` -- ``-|d_s| |f^ - p^_j|`` on unit-normalised vectors
* ``dismax``      -- all-distances-aware logits ``-(D_j + mean_n D_n)``

The distance heads multiply logits by the entropic scale during training
only. Inference probabilities drop it (optionally dividing by a calibrated
temperature), which keeps predictions identical while raising entropy.
"""

from dataclasses import dataclass, fields

import numpy as np

from . import autodiff as ad
from . import numeric
from .errors import ContractError, ShapeError

KINDS = ("softmax", "isomax", "isomax_plus", "dismax")
DISTANCE_KINDS = ("isomax", "isomax_plus", "dismax")
PROB_FLOOR = 1e-300
T_MIN, T_MAX = 0.001, 100.0


@dataclass
class LossConfig:
    kind: str = "isomax_plus"
    entropic_scale: float = 10.0
    alpha: float = 1.0
    inference_temperature: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ContractError(f"unknown loss kind {self.kind!r}; choose from {KINDS}")
        if not self.entropic_scale > 0:
            raise ContractError("entropic_scale must be > 0")
        if not self.alpha >= 0:
            raise ContractError("alpha must be >= 0")
        if not T_MIN <= self.inference_temperature <= T_MAX:
            raise ContractError(f"inference_temperature must lie in [{T_MIN}, {T_MAX}]")

    @property
    def training_scale(self):
        return 1.0 if self.kind == "softmax" else self.entropic_scale

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d):
        return cls(**{f.name: d[f.name] for f in fields(cls) if f.name in d})


@dataclass
class HeadParams:
    """Head parameters; fields hold arrays or, during a forward pass, Vars."""

    prototypes: object = None
    distance_scale: object = None
    weight: object = None
    bias: object = None

    @property
    def num_classes(self):
        src = self.prototypes if self.prototypes is not None else self.weight
        return src.shape[0]

    def as_dict(self):
        return {f"head.{f.name}": getattr(self, f.name) for f in fields(self) if getattr(self, f.name) is not None}

    @classmethod
    def from_dict(cls, params):
        return cls(**{k[len("head."):]: v for k, v in params.items() if k.startswith("head.")})


def init_head(kind, num_classes, feature_dim, rng):
    if num_classes < 2 or feature_dim < 1:
        raise ContractError("need at least 2 classes and 1 feature")
    if kind == "isomax":
        return HeadParams(prototypes=np.zeros((num_classes, feature_dim)))
    if kind in ("isomax_plus", "dismax"):
        return HeadParams(
            prototypes=rng.normal(0.0, 1.0, size=(num_classes, feature_dim)),
            distance_scale=np.ones((1, 1)),
        )
    if kind == "softmax":
        bound = 1.0 / np.sqrt(feature_dim)
        return HeadParams(
            weight=rng.uniform(-bound, bound, size=(num_classes, feature_dim)),
            bias=np.zeros((1, num_classes)),
        )
    raise ContractError(f"unknown head kind {kind!r}")


def _tape_for(tape, *xs):
    if tape is not None:
        return tape
    return next((x.tape for x in xs if isinstance(x, ad.Var)), None) or ad.Tape()


def _check_width(head, width):
    ref = head.prototypes if head.prototypes is not None else head.weight
    if ref.shape[1] != width:
        raise ShapeError(f"head expects {ref.shape[1]} features, got {width}")


def isometric_distances(head, features):
    """``|d_s| * |f^ - p^_j|`` as a Var. Both arguments live on one tape."""
    tape = ad._tape_of(features, head.prototypes, head.distance_scale)
    f = ad.normalize_rows(tape.lift(features))
    p = ad.normalize_rows(tape.lift(head.prototypes))
    return ad.pairwise_euclidean(f, p) * ad.absolute(tape.lift(head.distance_scale))


def head_logits(kind, head, features, tape=None):
    """Logits for ``features``.

    Without ``tape`` everything is evaluated on a throwaway tape and a plain
    array is returned; with ``tape`` the result is a Var on it.
    """
    own_tape = tape is None
    if own_tape:
        tape = ad.Tape()
        head = HeadParams(**{f.name: (None if getattr(head, f.name) is None else tape.constant(getattr(head, f.name)))
                             for f in fields(head)})
    features = tape.lift(features)
    _check_width(head, features.shape[1])
    if kind == "softmax":
        out = features @ ad.transpose(tape.lift(head.weight)) + tape.lift(head.bias)
    elif kind == "isomax":
        out = -ad.pairwise_euclidean(features, tape.lift(head.prototypes))
    elif kind == "isomax_plus":
        out = -isometric_distances(head, features)
    elif kind == "dismax":
        d = isometric_distances(head, features)
        out = -(d + ad.row_mean(d))
    else:
        raise ContractError(f"unknown head kind {kind!r}")
    return out.value if own_tape else out


def training_loss(kind, config, logits, targets, tape=None):
    """Mean ``-log(softmax(E_s * logits)[target])``.

    The softmax is one node and the log a separate node after it, never a
    fused log-softmax. Probabilities are floored at 1e-300 before the log;
    hits are counted in ``tape.diagnostics``.
    """
    tape = _tape_for(tape, logits)
    logits = tape.lift(logits)
    targets = np.asarray(targets, dtype=np.int64)
    n = logits.shape[1]
    if targets.shape != (logits.shape[0],) or np.any(targets < 0) or np.any(targets >= n):
        raise ContractError(f"targets must be {logits.shape[0]} labels in [0, {n})")
    scale = 1.0 if kind == "softmax" else config.entropic_scale
    probs = ad.softmax(logits * scale)
    picked = ad.clamp_min(ad.pick(probs, targets), PROB_FLOOR)
    return -ad.mean_all(ad.log(picked))


def fpr_target(labels4, num_classes):
    """Quarter-probability target for a four-patch compound input."""
    labels4 = np.asarray(labels4, dtype=np.int64)
    if labels4.shape != (4,) or np.any(labels4 < 0) or np.any(labels4 >= num_classes):
        raise ContractError(f"need four labels in [0, {num_classes})")
    return np.bincount(labels4, minlength=num_classes) / 4.0


def fpr_penalty(probs, targets_q, tape=None):
    """Mean over rows of ``KL(Q || P) = sum_i Q_i (log Q_i - log P_i)``.

    Accepts arrays (returns a float) or a Var ``probs`` (returns a 1x1 Var).
    """
    q = numeric.as_matrix(targets_q, "targets_q")
    q_log_q = np.where(q > 0, q * np.log(np.where(q > 0, q, 1.0)), 0.0).sum()
    if isinstance(probs, ad.Var) or tape is not None:
        tape = tape or probs.tape
        probs = tape.lift(probs)
        if probs.shape != q.shape:
            raise ShapeError(f"probs {probs.shape} vs targets {q.shape}")
        cross = ad.sum_all(ad.log(ad.clamp_min(probs, PROB_FLOOR)) * q)
        return (cross * -1.0 + q_log_q) * (1.0 / q.shape[0])
    p = numeric.as_matrix(probs, "probs")
    if p.shape != q.shape:
        raise ShapeError(f"probs {p.shape} vs targets {q.shape}")
    cross = (q * np.log(np.maximum(p, PROB_FLOOR))).sum()
    # rounding can leave -1e-17 when P == Q
    return max(float((q_log_q - cross) / q.shape[0]), 0.0)


def dismax_loss(config, logits_std, targets_std, probs_compound, targets_q, tape=None):
    """Standard-half cross-entropy plus ``alpha`` times the FPR penalty.

    ``probs_compound`` must be the training probabilities of the mosaic half,
    i.e. :func:`compound_probabilities` (entropic scale applied, ``T = 1``).
    """
    tape = _tape_for(tape, logits_std, probs_compound)
    loss = training_loss("dismax", config, logits_std, targets_std, tape)
    if config.alpha == 0:
        return loss
    if probs_compound is None or np.shape(targets_q)[0] == 0:
        raise ContractError("alpha > 0 needs a non-empty compound half")
    return loss + fpr_penalty(probs_compound, targets_q, tape) * config.alpha


def compound_probabilities(config, logits_compound):
    """Differentiable ``softmax(E_s * logits)`` for the FPR half."""
    return ad.softmax(logits_compound * config.entropic_scale)


def inference_logits(kind, config, logits):
    """Logits with the entropic scale removed, divided by the temperature."""
    return np.asarray(logits, dtype=np.float64) / config.inference_temperature


def inference_probabilities(kind, config, head, features):
    """``softmax(logits / T)``; the entropic scale is not applied."""
    return numeric.stable_softmax(inference_logits(kind, config, head_logits(kind, head, features)))


def training_probabilities(kind, config, head, features):
    """Probabilities as seen by the loss (entropic scale applied, T = 1)."""
    scale = 1.0 if kind == "softmax" else config.entropic_scale
    return numeric.stable_softmax(scale * head_logits(kind, head, features))
