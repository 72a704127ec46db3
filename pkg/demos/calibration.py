"""Temperature scaling on overconfident validation logits."""

import numpy as np

from entropic_ood import accuracy, apply_temperature, calibrate_temperature, ece

rng = np.random.default_rng(2)
n, k = 400, 4
labels = rng.integers(0, k, size=n)
logits = rng.normal(size=(n, k))
logits[np.arange(n), labels] += 1.5
logits *= 6.0   # sharpen: confident but often wrong

probs = apply_temperature(logits, 1.0)
print("accuracy", accuracy(probs, labels))
print("ECE at T=1", ece(probs, labels))

result = calibrate_temperature(logits, labels)
print("T*", result.temperature)
print("ECE", result.ece_before, "->", result.ece_after)
print("evaluations", result.evaluations)

# dividing logits by a positive constant never changes the argmax
calibrated = apply_temperature(logits, result.temperature)
print(accuracy(calibrated, labels) == accuracy(probs, labels))
