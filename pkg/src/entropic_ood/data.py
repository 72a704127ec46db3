"""Datasets: synthetic generators, CSV/IDX ingestion, splitting, mosaics."""

import csv
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ContractError, DataFormatError, UnsupportedError
from .heads import fpr_target

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass
class LabeledDataset:
    """Feature rows with optional integer labels and optional ``(H, W, C)`` grid.

    Grid rows are flattened row-major, so pixel ``(h, w, c)`` lives in column
    ``(h * W + w) * C + c``.
    """

    features: np.ndarray
    labels: np.ndarray = None
    grid_shape: tuple = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2 or self.features.shape[0] < 1:
            raise ContractError("features must be a non-empty 2-D matrix")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (self.features.shape[0],):
                raise ContractError("one label per row required")
            if np.any(self.labels < 0):
                raise ContractError("labels must be non-negative")
        if self.grid_shape is not None:
            self.grid_shape = tuple(int(g) for g in self.grid_shape)
            h, w, c = self.grid_shape
            if h * w * c != self.features.shape[1]:
                raise ContractError(f"grid {self.grid_shape} does not match {self.features.shape[1]} columns")
            if h % 2 or w % 2:
                raise ContractError("grid height and width must be even")

    def __len__(self):
        return self.features.shape[0]

    @property
    def num_classes(self):
        return int(self.labels.max()) + 1 if self.labels is not None else 0

    def subset(self, index):
        return LabeledDataset(
            self.features[index],
            None if self.labels is None else self.labels[index],
            self.grid_shape,
            dict(self.meta),
        )


def blob_centers(num_classes, dim, radius, rng):
    """Class centres at distance ``radius`` from the origin.

    In 2-D (or whenever ``dim < num_classes``) they sit evenly on a circle in
    the first two coordinates; otherwise they are ``radius`` times a random
    orthonormal frame, i.e. a scaled simplex spread over every coordinate.
    """
    if dim >= num_classes and dim > 2:
        q, _ = np.linalg.qr(rng.normal(size=(dim, num_classes)))
        return radius * q.T
    angles = 2.0 * np.pi * np.arange(num_classes) / num_classes
    centers = np.zeros((num_classes, dim))
    centers[:, 0] = radius * np.cos(angles)
    centers[:, 1] = radius * np.sin(angles)
    return centers


def gen_blobs(num_classes, per_class, dim, spread, seed, center_radius=4.0, grid_shape=None):
    if num_classes < 2 or dim < 2:
        raise ContractError("need at least 2 classes and 2 dimensions")
    rng = np.random.default_rng(seed)
    centers = blob_centers(num_classes, dim, center_radius, rng)
    labels = np.repeat(np.arange(num_classes), per_class)
    features = centers[labels] + spread * rng.normal(size=(labels.size, dim))
    return LabeledDataset(features, labels, grid_shape, {"centers": centers, "spread": spread})


def gen_ood_ring(count, dim, radius, seed, jitter=0.02):
    """Points uniform on the sphere of ``radius`` with relative radial jitter."""
    rng = np.random.default_rng(seed)
    directions = rng.normal(size=(count, dim))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    radii = radius * (1.0 + jitter * rng.uniform(-1.0, 1.0, size=(count, 1)))
    return LabeledDataset(directions * radii, meta={"kind": "ring", "radius": radius})


def gen_ood_uniform(count, dim, half_width, seed):
    rng = np.random.default_rng(seed)
    return LabeledDataset(rng.uniform(-half_width, half_width, size=(count, dim)), meta={"kind": "uniform"})


def gen_ood_center(count, dim, spread, seed):
    """A tight cloud at the origin, equidistant from every class centre."""
    rng = np.random.default_rng(seed)
    return LabeledDataset(spread * rng.normal(size=(count, dim)), meta={"kind": "center"})


@dataclass
class MosaicBatch:
    compound_features: np.ndarray
    target_q: np.ndarray
    sources: np.ndarray


def quadrant_map(grid_shape):
    """Column -> quadrant index (0 TL, 1 TR, 2 BL, 3 BR) for a flattened grid."""
    h, w, c = grid_shape
    rows = np.arange(h)[:, None, None] >= h // 2
    cols = np.arange(w)[None, :, None] >= w // 2
    return np.broadcast_to(2 * rows + cols, (h, w, c)).reshape(-1)


def build_mosaic(dataset, count, num_classes, seed):
    """Compound examples whose quadrant ``q`` is copied from source ``q``.

    Sources are drawn uniformly with replacement. Returns a :class:`MosaicBatch`
    whose ``sources`` is the ``count x 4`` index array used.
    """
    if dataset.grid_shape is None:
        raise UnsupportedError("FPR requires grid-structured inputs")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    sources = rng.integers(0, len(dataset), size=(count, 4))
    quad = quadrant_map(dataset.grid_shape)
    cols = np.arange(dataset.features.shape[1])
    compound = dataset.features[sources[:, quad], cols]
    target = np.stack([fpr_target(dataset.labels[s], num_classes) for s in sources]) if count else np.zeros((0, num_classes))
    return MosaicBatch(compound, target, sources)


def split(dataset, fractions, seed):
    """Stratified train/val/test split with exact global sizes.

    Rows of each class are shuffled and given fractional positions
    ``(i + 0.5) / n_class``; sorting every row by that position interleaves the
    classes proportionally, and the sorted sequence is cut at the global sizes.
    """
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3 or any(f <= 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise ContractError("fractions must be three positive numbers summing to 1")
    if dataset.labels is None:
        raise ContractError("split needs labels")
    n = len(dataset)
    counts = np.bincount(dataset.labels)
    if np.any(counts[counts > 0] < 3):
        raise ContractError("every class needs at least 3 rows to stratify")
    n_train = int(round(n * fractions[0]))
    n_val = int(round(n * fractions[1]))
    n_test = n - n_train - n_val
    if min(n_train, n_val, n_test) < 1:
        raise ContractError(f"split sizes {n_train}/{n_val}/{n_test} leave an empty part")
    rng = np.random.default_rng(seed)
    position = np.empty(n)
    for c in np.nonzero(counts)[0]:
        idx = np.nonzero(dataset.labels == c)[0]
        position[rng.permutation(idx)] = (np.arange(idx.size) + 0.5) / idx.size
    order = np.lexsort((rng.permutation(n), position))
    cuts = np.split(order, [n_train, n_train + n_val])
    return tuple(dataset.subset(np.sort(part)) for part in cuts)


def write_csv(dataset, path):
    path = Path(path)
    d = dataset.features.shape[1]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = [f"x{i}" for i in range(d)]
        if dataset.labels is not None:
            header.append("label")
        w.writerow(header)
        for i, row in enumerate(dataset.features):
            cells = [format(v, ".17g") for v in row]
            if dataset.labels is not None:
                cells.append(str(int(dataset.labels[i])))
            w.writerow(cells)
    return path


def load_csv(path, grid_shape=None):
    """Read a numeric CSV with a header; a ``label`` column is optional."""
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataFormatError(f"{path}: {exc}") from exc
    if not rows:
        raise DataFormatError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    label_col = header.index("label") if "label" in header else None
    feat_cols = [i for i in range(len(header)) if i != label_col]
    features, labels = [], []
    for r, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise DataFormatError(f"{path}: row {r} has {len(row)} cells, header has {len(header)}")
        try:
            features.append([float(row[i]) for i in feat_cols])
        except ValueError:
            bad = next(i for i in feat_cols if not _is_float(row[i]))
            raise DataFormatError(f"{path}: row {r}, column {header[bad]!r}: non-numeric {row[bad]!r}") from None
        if label_col is not None:
            try:
                labels.append(int(row[label_col]))
            except ValueError:
                raise DataFormatError(f"{path}: row {r}, column 'label': not an integer {row[label_col]!r}") from None
    if not features:
        raise DataFormatError(f"{path}: no data rows")
    feats = np.array(features, dtype=np.float64)
    if not np.all(np.isfinite(feats)):
        raise DataFormatError(f"{path}: non-finite feature value")
    return LabeledDataset(feats, np.array(labels) if label_col is not None else None, grid_shape, {"source": str(path)})


def _is_float(s):
    try:
        float(s)
        return True
    except ValueError:
        return False


def load_idx(images_path, labels_path=None):
    """Read IDX (MNIST-style) images, and optionally labels, scaled to [0, 1]."""
    raw = Path(images_path).read_bytes()
    if len(raw) < 16:
        raise DataFormatError(f"{images_path}: truncated IDX header")
    magic, count, h, w = struct.unpack(">IIII", raw[:16])
    if magic != IDX_IMAGES_MAGIC:
        raise DataFormatError(f"{images_path}: bad magic 0x{magic:08x}")
    if count == 0:
        raise DataFormatError(f"{images_path}: no images")
    if len(raw) != 16 + count * h * w:
        raise DataFormatError(f"{images_path}: expected {count * h * w} pixel bytes, found {len(raw) - 16}")
    pixels = np.frombuffer(raw, dtype=np.uint8, offset=16).reshape(count, h * w) / 255.0
    labels = None
    if labels_path is not None:
        lraw = Path(labels_path).read_bytes()
        if len(lraw) < 8:
            raise DataFormatError(f"{labels_path}: truncated IDX header")
        lmagic, lcount = struct.unpack(">II", lraw[:8])
        if lmagic != IDX_LABELS_MAGIC:
            raise DataFormatError(f"{labels_path}: bad magic 0x{lmagic:08x}")
        if lcount != count or len(lraw) != 8 + lcount:
            raise DataFormatError(f"{labels_path}: label count {lcount} does not match {count} images")
        labels = np.frombuffer(lraw, dtype=np.uint8, offset=8).astype(np.int64)
    return LabeledDataset(pixels, labels, (h, w, 1), {"source": str(images_path)})
