"""Mini-batch training loop shared by every head."""

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import numeric
from .data import build_mosaic
from .encoder import OptimizerState, encoder_forward, lr_at_epoch, sgd_step
from .errors import NumericalError
from .heads import HeadParams, compound_probabilities, dismax_loss, head_logits, training_loss

log = logging.getLogger(__name__)


class NumericalAbort(NumericalError):
    """Training produced a non-finite loss; carries diagnostics."""

    def __init__(self, message, diagnostics):
        super().__init__(f"{message} ({diagnostics})")
        self.diagnostics = diagnostics


@dataclass
class TrainRecipe:
    learning_rate: float = 0.1
    momentum: float = 0.9
    nesterov: bool = True
    weight_decay: float = 1e-4
    batch_size: int = 64
    epochs: int = 60
    milestones: tuple = (30, 45)

    @classmethod
    def from_dict(cls, d):
        return cls(
            learning_rate=d.get("lr", cls.learning_rate),
            momentum=d.get("momentum", cls.momentum),
            nesterov=d.get("nesterov", cls.nesterov),
            weight_decay=d.get("weight_decay", cls.weight_decay),
            batch_size=d.get("batch_size", cls.batch_size),
            epochs=d.get("epochs", cls.epochs),
            milestones=tuple(d.get("milestones", cls.milestones)),
        )

    def optimizer(self):
        return OptimizerState(
            learning_rate=self.learning_rate,
            momentum=self.momentum,
            nesterov=self.nesterov,
            weight_decay=self.weight_decay,
            milestones=self.milestones,
        )


def mean_normalized_entropy(probs):
    return float(np.mean(numeric.shannon_entropy(probs)) / math.log(probs.shape[1]))


def fpr_active(model, dataset):
    return model.kind == "dismax" and model.loss_config.alpha > 0 and dataset.grid_shape is not None


def epoch_stats(model, dataset):
    with np.errstate(over="ignore", invalid="ignore"):
        probs = model.predict_proba(dataset.features)
    return {
        "train_accuracy": float(np.mean(np.argmax(probs, axis=1) == dataset.labels)),
        "mean_normalized_entropy": mean_normalized_entropy(probs),
    }


def train_step(model, optimizer, xb, yb, lr, mosaic=None):
    """One forward/backward/update. Returns ``(loss, floor_hits, grad_norm)``."""
    tape = ad.Tape()
    cfg = model.loss_config
    try:
        # overflow surfaces as inf/nan values, which the tape turns into errors
        with np.errstate(over="ignore", invalid="ignore"):
            pv, _, logits = model.forward(tape, xb)
            if mosaic is not None:
                # same parameter leaves, so gradients from both halves accumulate
                feats_c = encoder_forward(model.spec, pv, mosaic.compound_features, tape)
                logits_c = head_logits(model.kind, HeadParams.from_dict(pv), feats_c, tape)
                loss = dismax_loss(cfg, logits, yb, compound_probabilities(cfg, logits_c), mosaic.target_q, tape)
            else:
                loss = training_loss(model.kind, cfg, logits, yb, tape)
            tape.backward(loss)
    except NumericalError as exc:
        raise NumericalAbort(str(exc), {"floor_hits": tape.diagnostics["floor_hits"]}) from exc
    grads = {k: (np.zeros_like(v.value) if v.grad is None else v.grad) for k, v in pv.items()}
    value = float(loss.value[0, 0])
    with np.errstate(over="ignore", invalid="ignore"):
        grad_norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if not (math.isfinite(value) and math.isfinite(grad_norm)):
        raise NumericalAbort("non-finite loss", {"floor_hits": tape.diagnostics["floor_hits"], "grad_norm": grad_norm})
    sgd_step(optimizer, model.params, grads, lr)
    return value, tape.diagnostics["floor_hits"], grad_norm


def train(model, train_set, recipe, seed, on_epoch=None):
    """Train ``model`` in place; returns the per-epoch history.

    Row 0 of the history describes the untrained model. When FPR is active
    each step takes ``batch_size // 2`` real rows and as many mosaics.
    """
    optimizer = model.optimizer_state or recipe.optimizer()
    model.optimizer_state = optimizer
    use_fpr = fpr_active(model, train_set)
    if model.kind == "dismax" and model.loss_config.alpha > 0 and not use_fpr:
        log.info("FPR disabled: training inputs are not grid-structured")
    step_rows = max(recipe.batch_size // 2, 1) if use_fpr else recipe.batch_size
    n = len(train_set)

    history = [{"epoch": 0, "lr": lr_at_epoch(optimizer, 0), "loss": float("nan"), "floor_hits": 0,
                "grad_norm": float("nan"), **epoch_stats(model, train_set)}]
    for epoch in range(model.epoch, recipe.epochs):
        lr = lr_at_epoch(optimizer, epoch)
        # per-epoch stream, so a resumed run matches an uninterrupted one
        rng = np.random.default_rng([seed, 7919, epoch])
        order = rng.permutation(n)
        losses, hits, norms = [], 0, []
        for start in range(0, n, step_rows):
            idx = order[start:start + step_rows]
            mosaic = build_mosaic(train_set, idx.size, model.num_classes, rng) if use_fpr else None
            try:
                loss, h, gn = train_step(model, optimizer, train_set.features[idx], train_set.labels[idx], lr, mosaic)
            except NumericalAbort as exc:
                exc.diagnostics.update(epoch=epoch + 1, step=len(losses) + 1, epoch_floor_hits=hits,
                                       last_grad_norm=norms[-1] if norms else history[-1]["grad_norm"],
                                       max_grad_norm=max(norms) if norms else float("nan"))
                exc.args = (f"{exc.__cause__ or 'non-finite loss'} ({exc.diagnostics})",)
                raise
            losses.append(loss)
            hits += h
            norms.append(gn)
        model.epoch = epoch + 1
        row = {"epoch": epoch + 1, "lr": lr, "loss": float(np.mean(losses)), "floor_hits": hits,
               "grad_norm": float(np.mean(norms)), **epoch_stats(model, train_set)}
        history.append(row)
        log.debug("epoch %d loss %.5f acc %.4f ent %.4f", row["epoch"], row["loss"],
                  row["train_accuracy"], row["mean_normalized_entropy"])
        if on_epoch is not None:
            on_epoch(row)
    return history
