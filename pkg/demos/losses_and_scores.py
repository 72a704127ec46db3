"""Logits, losses and OOD scores for each head on a handful of features."""

import numpy as np

from entropic_ood import (
    LossConfig,
    entropic_score,
    head_logits,
    inference_probabilities,
    init_head,
    max_logit,
    mds,
    mmles,
    mps,
    training_loss,
)

rng = np.random.default_rng(0)
features = rng.normal(size=(5, 8))
targets = np.array([0, 1, 2, 0, 1])

for kind in ("softmax", "isomax", "isomax_plus", "dismax"):
    head = init_head(kind, 3, 8, rng)
    config = LossConfig(kind=kind, entropic_scale=10.0)
    logits = head_logits(kind, head, features)
    loss = training_loss(kind, config, logits, targets).value.item()
    probs = inference_probabilities(kind, config, head, features)
    print(f"{kind:12s} loss={loss:.4f}")
    print("  mps  ", np.round(mps(probs), 3))
    print("  es   ", np.round(entropic_score(probs), 3))
    print("  maxlg", np.round(max_logit(logits), 3))
    if kind != "softmax":
        print("  mds  ", np.round(mds(features, head), 3))
    if kind == "dismax":
        print("  mmles", np.round(mmles(logits, probs), 3))

# zero-initialised IsoMax prototypes put every class at the same distance,
# so the first forward pass is maximally uncertain
head = init_head("isomax", 3, 8, rng)
probs = inference_probabilities("isomax", LossConfig(kind="isomax"), head, features)
print(probs[0])  # [1/3 1/3 1/3]
