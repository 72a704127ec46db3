"""Dense float64 matrix primitives.

Matrices are plain 2-D ``numpy.ndarray`` objects of dtype float64. Every
function here is pure; the differentiable counterparts live in
:mod:`entropic_ood.autodiff` and reuse these forward passes.
"""

import numpy as np

from .errors import ContractError, NumericalError, ShapeError

DIST_EPS = 1e-12
NORM_EPS = 1e-12


def as_matrix(x, name="matrix"):
    """Coerce ``x`` to a finite 2-D float64 array."""
    m = np.asarray(x, dtype=np.float64)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    elif m.ndim == 1:
        m = m.reshape(1, -1)
    if m.ndim != 2:
        raise ShapeError(f"{name}: expected a 2-D matrix, got ndim={m.ndim}")
    check_finite(m, name)
    return m


def check_finite(m, name="matrix"):
    if not np.all(np.isfinite(m)):
        raise NumericalError(f"{name}: contains NaN or Inf")
    return m


def pairwise_differences(features, prototypes):
    """Return the ``B x N x F`` tensor ``features[b] - prototypes[n]``."""
    if features.shape[1] != prototypes.shape[1]:
        raise ShapeError(
            f"feature width {features.shape[1]} != prototype width {prototypes.shape[1]}"
        )
    return features[:, None, :] - prototypes[None, :, :]


def pairwise_euclidean(features, prototypes):
    """Nonsquared Euclidean distance between every feature row and prototype row.

    Each entry is ``sqrt(sum_f (x_bf - p_nf)^2 + 1e-12)``. The differences are
    formed explicitly rather than through ``|x|^2 + |p|^2 - 2 x.p``, which
    cancels catastrophically when a feature sits on top of a prototype.
    """
    features = as_matrix(features, "features")
    prototypes = as_matrix(prototypes, "prototypes")
    if features.shape[1] < 1:
        raise ShapeError("feature width must be >= 1")
    diff = pairwise_differences(features, prototypes)
    return np.sqrt(np.einsum("bnf,bnf->bn", diff, diff) + DIST_EPS)


def normalize_rows(m):
    """Divide each row by its 2-norm plus 1e-12; zero rows stay zero."""
    m = as_matrix(m)
    return m / (np.linalg.norm(m, axis=1, keepdims=True) + NORM_EPS)


def stable_softmax(logits):
    """Row-wise softmax with max subtraction."""
    logits = as_matrix(logits, "logits")
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def shannon_entropy(probs):
    """Per-row Shannon entropy in nats, shape ``B x 1``; ``0 log 0 = 0``."""
    probs = as_matrix(probs, "probs")
    if np.any(probs < 0) or np.any(np.abs(probs.sum(axis=1) - 1.0) > 1e-6):
        raise ContractError("shannon_entropy: rows must be probability vectors")
    safe = np.where(probs > 0, probs, 1.0)
    return -(probs * np.log(safe)).sum(axis=1, keepdims=True)
