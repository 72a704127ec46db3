"""Post-hoc temperature scaling that minimises ECE."""

import math
from dataclasses import asdict, dataclass

import numpy as np

from . import numeric
from .errors import ContractError
from .heads import T_MAX, T_MIN
from .metrics import ece

GRID_POINTS = 64
GOLDEN_ITERS = 40
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class CalibrationResult:
    temperature: float
    ece_before: float
    ece_after: float
    evaluations: int

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def _clamp_t(t):
    return min(max(t, T_MIN), T_MAX)


def apply_temperature(logits, temperature):
    if not T_MIN <= temperature <= T_MAX:
        raise ContractError(f"temperature {temperature} outside [{T_MIN}, {T_MAX}]")
    return numeric.stable_softmax(np.asarray(logits, dtype=np.float64) / temperature)


def calibrate_temperature(val_logits, labels, bins=15):
    """Pick ``T`` in [0.001, 100] minimising validation ECE.

    ECE is piecewise constant in ``T``, so the search is a 64-point log grid
    followed by 40 golden-section steps (in log T) inside the best grid cell.
    ``T = 1`` is always a candidate; ties keep the earliest candidate, with
    ``T = 1`` first, so the result never has higher ECE than the input.
    """
    val_logits = np.asarray(val_logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if val_logits.ndim != 2 or val_logits.shape[0] < 2:
        raise ContractError("need at least two validation rows")
    if not np.all(np.isfinite(val_logits)):
        raise ContractError("validation logits must be finite")

    evaluations = 0

    def objective(log_t):
        nonlocal evaluations
        evaluations += 1
        return ece(apply_temperature(val_logits, _clamp_t(math.exp(log_t))), labels, bins)

    ece_before = objective(0.0)
    best_log_t, best = 0.0, ece_before

    grid = np.linspace(math.log(T_MIN), math.log(T_MAX), GRID_POINTS)
    values = [objective(g) for g in grid]
    i = int(np.argmin(values))
    if values[i] < best:
        best_log_t, best = float(grid[i]), values[i]

    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, GRID_POINTS - 1)]
    c = hi - _INV_PHI * (hi - lo)
    d = lo + _INV_PHI * (hi - lo)
    fc, fd = objective(c), objective(d)
    for _ in range(GOLDEN_ITERS):
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - _INV_PHI * (hi - lo)
            fc = objective(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + _INV_PHI * (hi - lo)
            fd = objective(d)
    for log_t, value in ((c, fc), (d, fd)):
        if value < best:
            best_log_t, best = float(log_t), value

    temperature = _clamp_t(math.exp(best_log_t))
    ece_after = ece(apply_temperature(val_logits, temperature), labels, bins)
    if ece_after > ece_before:
        temperature, ece_after = 1.0, ece_before
    return CalibrationResult(temperature, ece_before, ece_after, evaluations)
