import struct
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from entropic_ood.data import (
    LabeledDataset,
    build_mosaic,
    gen_blobs,
    gen_ood_center,
    gen_ood_ring,
    gen_ood_uniform,
    load_csv,
    load_idx,
    quadrant_map,
    split,
    write_csv,
)
from entropic_ood.errors import ContractError, DataFormatError, UnsupportedError


def idx_images(count, h, w, pixels, magic=0x803):
    return struct.pack(">IIII", magic, count, h, w) + bytes(pixels)


def idx_labels(labels, magic=0x801):
    return struct.pack(">II", magic, len(labels)) + bytes(labels)


def test_blob_counts():
    ds = gen_blobs(4, 50, 2, 0.5, seed=1)
    assert len(ds) == 200
    assert Counter(ds.labels.tolist()) == {0: 50, 1: 50, 2: 50, 3: 50}


def test_zero_spread_collapses_classes():
    ds = gen_blobs(3, 10, 5, 0.0, seed=2)
    for c in range(3):
        rows = ds.features[ds.labels == c]
        assert np.all(rows == rows[0])


@pytest.mark.parametrize("dim", [2, 3, 8])
def test_blob_means_near_centers(dim):
    per_class, spread = 400, 0.7
    ds = gen_blobs(4, per_class, dim, spread, seed=3)
    for c, center in enumerate(ds.meta["centers"]):
        err = np.abs(ds.features[ds.labels == c].mean(axis=0) - center)
        assert np.all(err < 4 * spread / np.sqrt(per_class))
    np.testing.assert_allclose(np.linalg.norm(ds.meta["centers"], axis=1), 4.0)


def test_generators_are_seeded():
    for gen in (lambda s: gen_blobs(3, 5, 4, 1.0, s), lambda s: gen_ood_ring(20, 3, 9.0, s),
                lambda s: gen_ood_uniform(20, 3, 5.0, s), lambda s: gen_ood_center(20, 3, 0.5, s)):
        assert np.array_equal(gen(7).features, gen(7).features)
        assert not np.array_equal(gen(7).features, gen(8).features)


def test_ring_geometry():
    ring = gen_ood_ring(500, 2, 9.0, seed=4)
    assert len(ring) == 500 and ring.labels is None
    norms = np.linalg.norm(ring.features, axis=1)
    assert np.all(np.abs(norms - 9.0) <= 0.05 * 9.0)


def test_ring_is_farther_than_every_id_point():
    ds = gen_blobs(4, 150, 2, 0.5, seed=0)
    centers = ds.meta["centers"]
    id_reach = np.linalg.norm(ds.features - centers[ds.labels], axis=1).max()
    ring = gen_ood_ring(300, 2, 9.0, seed=5)
    nearest = np.linalg.norm(ring.features[:, None] - centers[None], axis=2).min(axis=1)
    assert np.mean(nearest > id_reach) >= 0.99


def test_dataset_validation():
    with pytest.raises(ContractError):
        LabeledDataset(np.zeros((0, 2)))
    with pytest.raises(ContractError):
        LabeledDataset(np.zeros((2, 2)), [0])
    with pytest.raises(ContractError):
        LabeledDataset(np.zeros((1, 9)), grid_shape=(3, 3, 1))


def test_quadrant_map_2x2():
    assert quadrant_map((2, 2, 1)).tolist() == [0, 1, 2, 3]
    q = quadrant_map((4, 2, 3)).reshape(4, 2, 3)
    assert q[0, 0, 2] == 0 and q[1, 1, 0] == 1 and q[2, 0, 1] == 2 and q[3, 1, 2] == 3


def test_identical_sources_reproduce_the_example():
    ds = LabeledDataset(np.arange(16.0).reshape(1, 16), [2], (4, 4, 1))
    m = build_mosaic(ds, 3, 4, seed=0)
    assert np.array_equal(m.compound_features, np.repeat(ds.features, 3, axis=0))
    assert np.array_equal(m.target_q, np.tile([0, 0, 1.0, 0], (3, 1)))


def test_minimal_grid_takes_one_pixel_per_source():
    ds = LabeledDataset(np.array([[1.0, 2, 3, 4], [10, 20, 30, 40], [100, 200, 300, 400], [-1, -2, -3, -4]]),
                        [0, 1, 2, 3], (2, 2, 1))
    m = build_mosaic(ds, 50, 4, seed=1)
    for row, src in zip(m.compound_features, m.sources):
        assert row.tolist() == [ds.features[src[q], q] for q in range(4)]


def test_mosaic_pixel_provenance(rng):
    h, w, c = 6, 4, 2
    ds = gen_blobs(5, 8, h * w * c, 1.0, seed=6, grid_shape=(h, w, c))
    m = build_mosaic(ds, 50, 5, seed=rng)
    imgs = m.compound_features.reshape(50, h, w, c)
    for k in range(50):
        src = ds.features[m.sources[k]].reshape(4, h, w, c)
        for y in range(h):
            for x in range(w):
                q = 2 * (y >= h // 2) + (x >= w // 2)
                assert np.array_equal(imgs[k, y, x], src[q, y, x])
        np.testing.assert_array_equal(m.target_q[k], np.bincount(ds.labels[m.sources[k]], minlength=5) / 4)


def test_mosaic_needs_a_grid():
    with pytest.raises(UnsupportedError, match="grid-structured"):
        build_mosaic(gen_blobs(3, 5, 4, 1.0, 0), 2, 3, seed=0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 30))
def test_mosaic_targets_are_quarter_distributions(seed, count):
    ds = gen_blobs(6, 4, 16, 1.0, seed=seed % 1000, grid_shape=(2, 4, 2))
    m = build_mosaic(ds, count, 6, seed=seed)
    np.testing.assert_allclose(m.target_q.sum(axis=1), 1.0, atol=0)
    assert np.all(np.isin(m.target_q, [0, 0.25, 0.5, 0.75, 1.0]))
    assert np.all((m.target_q > 0).sum(axis=1) <= 4)
    # every compound value is copied from some source, never interpolated
    assert np.all(np.isin(m.compound_features, ds.features))


def test_split_sizes_and_multiset():
    ds = gen_blobs(4, 25, 3, 1.0, seed=9)
    parts = split(ds, (0.8, 0.1, 0.1), seed=0)
    assert [len(p) for p in parts] == [80, 10, 10]
    merged = np.concatenate([np.c_[p.features, p.labels] for p in parts])
    original = np.c_[ds.features, ds.labels]
    assert sorted(map(tuple, merged)) == sorted(map(tuple, original))
    for p in parts:
        assert set(p.labels.tolist()) <= set(range(4))
    # label-stratified
    assert Counter(parts[0].labels.tolist()) == {0: 20, 1: 20, 2: 20, 3: 20}


def test_split_is_seeded():
    ds = gen_blobs(3, 30, 2, 1.0, seed=1)
    a = split(ds, (0.6, 0.2, 0.2), seed=4)
    b = split(ds, (0.6, 0.2, 0.2), seed=4)
    c = split(ds, (0.6, 0.2, 0.2), seed=5)
    assert all(np.array_equal(x.features, y.features) for x, y in zip(a, b))
    assert not np.array_equal(a[0].features, c[0].features)


def test_split_preconditions():
    ds = gen_blobs(3, 10, 2, 1.0, seed=1)
    with pytest.raises(ContractError):
        split(ds, (1.0, 0.0, 0.0), seed=0)
    with pytest.raises(ContractError):
        split(gen_blobs(3, 2, 2, 1.0, seed=1), (0.6, 0.2, 0.2), seed=0)


def test_csv_examples(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("x0,x1,label\n1.0,2.0,0\n")
    ds = load_csv(p)
    assert ds.features.tolist() == [[1.0, 2.0]] and ds.labels.tolist() == [0]
    p.write_text("x0,x1\n1.0,2.0\n3,4\n")
    assert load_csv(p).labels is None


def test_csv_round_trip_is_exact(tmp_path, rng):
    ds = LabeledDataset(rng.normal(size=(20, 3)) * 10.0 ** rng.integers(-8, 8, (20, 3)), rng.integers(0, 3, 20))
    back = load_csv(write_csv(ds, tmp_path / "b.csv"))
    assert np.array_equal(back.features, ds.features)
    assert np.array_equal(back.labels, ds.labels)


@pytest.mark.parametrize("body,where", [
    ("x0,x1\n1.0,abc\n", "row 2, column 'x1'"),
    ("x0,x1\n1.0,2.0\n3.0\n", "row 3"),
    ("x0,label\n1.0,zero\n", "row 2, column 'label'"),
])
def test_csv_errors_locate_the_cell(tmp_path, body, where):
    p = tmp_path / "bad.csv"
    p.write_text(body)
    with pytest.raises(DataFormatError, match=where):
        load_csv(p)


def test_idx_fixture(tmp_path):
    pixels = list(range(0, 256, 8))
    img = tmp_path / "img.idx"
    lab = tmp_path / "lab.idx"
    img.write_bytes(idx_images(2, 4, 4, pixels))
    lab.write_bytes(idx_labels([7, 3]))
    ds = load_idx(img, lab)
    assert ds.grid_shape == (4, 4, 1)
    assert ds.labels.tolist() == [7, 3]
    np.testing.assert_array_equal(ds.features, np.array(pixels).reshape(2, 16) / 255.0)
    assert ds.features.min() == 0.0 and ds.features.max() <= 1.0


def test_idx_format_errors(tmp_path):
    img = tmp_path / "img.idx"
    lab = tmp_path / "lab.idx"
    img.write_bytes(idx_images(2, 2, 2, range(8)))
    lab.write_bytes(idx_labels([1, 2], magic=0x803))
    with pytest.raises(DataFormatError, match="magic"):
        load_idx(img, lab)
    lab.write_bytes(idx_labels([1, 2, 3]))
    with pytest.raises(DataFormatError, match="count"):
        load_idx(img, lab)
    img.write_bytes(idx_images(0, 2, 2, []))
    with pytest.raises(DataFormatError, match="no images"):
        load_idx(img)
    img.write_bytes(idx_images(1, 2, 2, range(4), magic=0x801))
    with pytest.raises(DataFormatError, match="magic"):
        load_idx(img)
