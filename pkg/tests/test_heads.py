import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from entropic_ood import autodiff as ad
from entropic_ood import numeric
from entropic_ood.errors import ContractError, ShapeError
from entropic_ood.heads import (
    HeadParams,
    LossConfig,
    compound_probabilities,
    dismax_loss,
    fpr_penalty,
    fpr_target,
    head_logits,
    inference_probabilities,
    init_head,
    training_loss,
    training_probabilities,
)

KINDS = ("softmax", "isomax", "isomax_plus", "dismax")


def test_init_values(rng):
    h = init_head("isomax", 3, 2, rng)
    assert np.array_equal(h.prototypes, np.zeros((3, 2)))
    assert h.distance_scale is None
    h = init_head("isomax_plus", 5, 64, rng)
    assert h.distance_scale[0, 0] == 1.0
    # N(0,1) entries: mean within 3 sigma of 0
    assert abs(h.prototypes.mean()) < 3 / math.sqrt(5 * 64)
    h = init_head("softmax", 4, 9, rng)
    assert np.abs(h.weight).max() <= 1 / 3
    assert not h.bias.any()


def test_zero_init_isomax_is_uniform(rng):
    h = init_head("isomax", 6, 4, rng)
    logits = head_logits("isomax", h, rng.normal(size=(5, 4)))
    assert np.all(logits == logits[:, :1])
    p = inference_probabilities("isomax", LossConfig("isomax"), h, rng.normal(size=(5, 4)))
    assert np.array_equal(p, np.full((5, 6), 1 / 6))


def test_zero_init_loss_is_log_n(rng):
    h = init_head("isomax", 7, 3, rng)
    logits = head_logits("isomax", h, rng.normal(size=(8, 3)))
    loss = training_loss("isomax", LossConfig("isomax"), logits, rng.integers(0, 7, 8))
    assert loss.value[0, 0] == pytest.approx(math.log(7), abs=1e-12)


def test_saturated_prediction_has_tiny_loss():
    loss = training_loss("isomax", LossConfig("isomax"), [[0.0, -3.0, -4.0]], [0])
    assert loss.value[0, 0] < 1e-3


def test_probability_floor_keeps_loss_finite():
    tape = ad.Tape()
    logits = tape.leaf([[0.0, -400.0]])
    loss = training_loss("isomax", LossConfig("isomax"), logits, [1], tape)
    assert loss.value[0, 0] == pytest.approx(-math.log(1e-300))
    assert tape.diagnostics["floor_hits"] == 1


def test_bad_targets(rng):
    with pytest.raises(ContractError):
        training_loss("isomax", LossConfig("isomax"), np.zeros((2, 3)), [0, 3])


def test_isomax_plus_alignment_gives_row_max(rng):
    h = init_head("isomax_plus", 4, 3, rng)
    f = 2.5 * h.prototypes[2:3]
    logits = head_logits("isomax_plus", h, f)
    assert np.argmax(logits) == 2
    assert logits[0, 2] == pytest.approx(-1e-6, abs=1e-9)


def test_width_mismatch(rng):
    h = init_head("isomax_plus", 4, 3, rng)
    with pytest.raises(ShapeError):
        head_logits("isomax_plus", h, np.zeros((2, 5)))


def test_dismax_logits_are_mean_shifted_isomax_plus(rng):
    for _ in range(20):
        n, f = rng.integers(2, 7), rng.integers(1, 9)
        h = init_head("dismax", n, f, rng)
        h.distance_scale = rng.normal(size=(1, 1))
        x = rng.normal(size=(5, f))
        d = -head_logits("isomax_plus", h, x)
        want = -(d + d.mean(axis=1, keepdims=True))
        assert np.abs(head_logits("dismax", h, x) - want).max() < 1e-12


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-5, 5))
def test_isomax_plus_logits_bounded(seed, ds):
    r = np.random.default_rng(seed)
    h = init_head("isomax_plus", 4, 3, r)
    h.distance_scale = np.array([[ds]])
    logits = head_logits("isomax_plus", h, 10 * r.normal(size=(6, 3)))
    assert np.all(np.abs(logits) <= 2 * abs(ds) + 1e-9)


@pytest.mark.parametrize("kind", KINDS)
def test_argmax_invariance(kind, rng):
    h = init_head(kind, 5, 4, rng)
    if kind == "isomax":
        h.prototypes = rng.normal(size=(5, 4))
    x = rng.normal(size=(30, 4))
    base = np.argmax(training_probabilities(kind, LossConfig(kind), h, x), axis=1)
    for t in (0.01, 1.0, 100.0):
        cfg = LossConfig(kind, inference_temperature=t)
        assert np.array_equal(np.argmax(inference_probabilities(kind, cfg, h, x), axis=1), base)
    if kind == "dismax":
        assert np.array_equal(np.argmax(head_logits("isomax_plus", h, x), axis=1), base)


@pytest.mark.parametrize("kind", ("isomax", "isomax_plus", "dismax"))
def test_removing_entropic_scale_raises_entropy(kind, rng):
    h = init_head(kind, 5, 4, rng)
    if kind == "isomax":
        h.prototypes = rng.normal(size=(5, 4))
    x = rng.normal(size=(40, 4))
    cfg = LossConfig(kind)
    h_inf = numeric.shannon_entropy(inference_probabilities(kind, cfg, h, x))
    h_train = numeric.shannon_entropy(training_probabilities(kind, cfg, h, x))
    assert np.all(h_inf > h_train)


@pytest.mark.parametrize("labels,n,want", [
    ((0, 1, 2, 3), 5, [0.25, 0.25, 0.25, 0.25, 0]),
    ((2, 2, 2, 2), 4, [0, 0, 1, 0]),
    ((0, 0, 1, 3), 4, [0.5, 0.25, 0, 0.25]),
])
def test_fpr_target(labels, n, want):
    np.testing.assert_array_equal(fpr_target(labels, n), want)


def test_fpr_target_needs_four_labels():
    with pytest.raises(ContractError):
        fpr_target((0, 1, 2), 4)


def test_kl_examples(rng):
    q = np.array([[0.5, 0.25, 0.0, 0.25]])
    assert fpr_penalty(q, q) == 0.0
    assert fpr_penalty(np.full((1, 4), 0.25), [[0, 1.0, 0, 0]]) == pytest.approx(math.log(4), abs=1e-15)
    for _ in range(20):
        q = np.stack([fpr_target(rng.integers(0, 5, 4), 5) for _ in range(3)])
        p = numeric.stable_softmax(rng.normal(size=(3, 5)))
        direct = 0.0
        for i in range(3):
            for j in range(5):
                if q[i, j] > 0:
                    direct += q[i, j] * (math.log(q[i, j]) - math.log(p[i, j]))
        assert abs(fpr_penalty(p, q) - direct / 3) < 1e-12
        tape = ad.Tape()
        assert abs(fpr_penalty(tape.leaf(p), q).value[0, 0] - direct / 3) < 1e-12


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_kl_non_negative(seed):
    r = np.random.default_rng(seed)
    q = np.stack([fpr_target(r.integers(0, 4, 4), 4) for _ in range(2)])
    p = numeric.stable_softmax(5 * r.normal(size=(2, 4)))
    assert fpr_penalty(p, q) >= 0.0


def test_dismax_loss_alpha_zero_is_plain_cross_entropy(rng):
    logits = rng.normal(size=(4, 3))
    y = rng.integers(0, 3, 4)
    plain = training_loss("dismax", LossConfig("dismax"), logits, y).value
    tape = ad.Tape()
    comp = compound_probabilities(LossConfig("dismax"), tape.leaf(rng.normal(size=(2, 3))))
    q = np.stack([fpr_target((0, 1, 2, 2), 3)] * 2)
    got = dismax_loss(LossConfig("dismax", alpha=0.0), logits, y, comp, q, tape).value
    assert np.array_equal(got, plain)


def test_dismax_loss_zero_kl_when_compound_matches(rng):
    logits = rng.normal(size=(4, 3))
    y = rng.integers(0, 3, 4)
    cfg = LossConfig("dismax", alpha=2.0)
    plain = training_loss("dismax", cfg, logits, y).value[0, 0]
    q = np.array([[0.5, 0.25, 0.25]])
    got = dismax_loss(cfg, logits, y, q, q).value[0, 0]
    assert got == pytest.approx(plain, abs=1e-12)


def test_dismax_loss_needs_compound_half(rng):
    with pytest.raises(ContractError):
        dismax_loss(LossConfig("dismax"), np.zeros((2, 3)), [0, 1], None, np.zeros((0, 3)))


def test_loss_config_validation():
    with pytest.raises(ContractError):
        LossConfig("cosine")
    with pytest.raises(ContractError):
        LossConfig("isomax", entropic_scale=0)
    with pytest.raises(ContractError):
        LossConfig("dismax", alpha=-1)
    with pytest.raises(ContractError):
        LossConfig("isomax", inference_temperature=1000)


def test_head_param_names_round_trip(rng):
    h = init_head("dismax", 3, 2, rng)
    d = h.as_dict()
    assert sorted(d) == ["head.distance_scale", "head.prototypes"]
    back = HeadParams.from_dict(d)
    assert np.array_equal(back.prototypes, h.prototypes)
