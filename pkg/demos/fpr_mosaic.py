"""Four-patch compound inputs and their quarter-probability targets."""

import numpy as np

from entropic_ood import LabeledDataset, build_mosaic, fpr_penalty, fpr_target
from entropic_ood.data import quadrant_map

# a 4x4 single-channel grid, flattened row-major
print(quadrant_map((4, 4, 1)).reshape(4, 4))

# each image is filled with its own label so the patches are easy to see
labels = np.array([0, 1, 2, 3, 1])
images = np.repeat(labels[:, None], 16, axis=1).astype(float)
ds = LabeledDataset(images, labels, grid_shape=(4, 4, 1))

batch = build_mosaic(ds, 3, num_classes=4, seed=0)
for compound, sources, q in zip(batch.compound_features, batch.sources, batch.target_q):
    print(compound.reshape(4, 4).astype(int))
    print("sources", sources, "labels", labels[sources], "Q", q)

print(fpr_target([2, 2, 2, 2], 4))  # one class everywhere
print(fpr_target([0, 1, 2, 3], 4))  # uniform

# the penalty is zero when the prediction equals the target
q = batch.target_q
print(fpr_penalty(q, q))
print(fpr_penalty(np.full_like(q, 0.25), q))

# FPR needs a grid; flat rows are rejected
try:
    build_mosaic(LabeledDataset(images, labels), 1, 4, 0)
except Exception as exc:
    print(type(exc).__name__, exc)
