import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ross.models import (
    ModelSpec,
    accuracy,
    finite_diff_grad,
    init_params,
    loss_and_grad,
)
from ross.rng import substream

LOGISTIC = ModelSpec("logistic", input_dim=10, num_classes=3)
MLP = ModelSpec("mlp", input_dim=10, num_classes=3, hidden=(8,))


def rel_err(a, b):
    scale = np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))
    return float((np.abs(a - b) / scale).max())


def random_batch(rng, spec, size=20):
    feats = rng.standard_normal((size, spec.input_dim))
    labels = rng.integers(0, spec.num_classes, size=size)
    return feats, labels


def test_param_count_is_pure_function_of_spec():
    assert LOGISTIC.dim == 10 * 3 + 3 == 33
    assert MLP.dim == 10 * 8 + 8 + 8 * 3 + 3


def test_init_is_deterministic():
    a = init_params(LOGISTIC, seed=7)
    b = init_params(LOGISTIC, seed=7)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, init_params(LOGISTIC, seed=8))


def test_init_biases_are_zero():
    params = init_params(MLP, seed=3)
    # bias blocks sit after each weight block
    at = 0
    for fan_in, fan_out in MLP.layer_dims():
        at += fan_in * fan_out
        assert np.all(params[at : at + fan_out] == 0.0)
        at += fan_out


def test_init_weights_within_xavier_bound():
    # range check over ~10^4 sampled weight entries
    spec = ModelSpec("mlp", input_dim=50, num_classes=10, hidden=(100, 50))
    params = init_params(spec, seed=11)
    at = 0
    for fan_in, fan_out in spec.layer_dims():
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        w = params[at : at + fan_in * fan_out]
        assert np.abs(w).max() <= bound
        at += fan_in * fan_out + fan_out
    assert spec.dim >= 10_000


def test_zero_params_loss_is_log_num_classes():
    rng = substream(1, "zero-loss")
    feats, labels = random_batch(rng, LOGISTIC)
    loss, _ = loss_and_grad(LOGISTIC, np.zeros(LOGISTIC.dim), feats, labels)
    assert loss == pytest.approx(np.log(3), abs=1e-12)


@pytest.mark.parametrize("spec", [LOGISTIC, MLP], ids=["logistic", "mlp"])
def test_analytic_gradient_matches_finite_differences(spec):
    # central-difference oracle, 50 random draws, step 1e-5
    rng = substream(2, "gradcheck", spec.kind)
    for _ in range(50):
        params = init_params(spec, int(rng.integers(1 << 30)))
        params = params + 0.3 * rng.standard_normal(spec.dim)
        feats, labels = random_batch(rng, spec)
        _, grad = loss_and_grad(spec, params, feats, labels)
        fd = finite_diff_grad(spec, params, feats, labels, eps=1e-5)
        assert rel_err(grad, fd) <= 1e-4


def test_finite_diff_step_sizes_agree():
    rng = substream(3, "fd-sweep")
    params = init_params(MLP, 5) + 0.3 * rng.standard_normal(MLP.dim)
    feats, labels = random_batch(rng, MLP)
    a = finite_diff_grad(MLP, params, feats, labels, eps=1e-5)
    b = finite_diff_grad(MLP, params, feats, labels, eps=1e-6)
    assert rel_err(a, b) <= 1e-3


def test_zero_feature_rows_give_zero_weight_gradient():
    rng = substream(4, "zero-rows")
    feats = np.zeros((6, LOGISTIC.input_dim))
    labels = rng.integers(0, 3, size=6)
    params = init_params(LOGISTIC, 9)
    _, grad = loss_and_grad(LOGISTIC, params, feats, labels)
    assert np.all(grad[: 10 * 3] == 0.0)  # weight block; bias gradient may be nonzero


def test_duplicating_batch_leaves_loss_and_grad_identical():
    rng = substream(5, "dup")
    feats, labels = random_batch(rng, LOGISTIC)
    params = init_params(LOGISTIC, 1)
    base = loss_and_grad(LOGISTIC, params, feats, labels)
    doubled = loss_and_grad(
        LOGISTIC, params, np.concatenate([feats, feats]), np.concatenate([labels, labels])
    )
    assert base[0] == doubled[0]
    assert np.array_equal(base[1], doubled[1])


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_shuffling_batch_is_bit_identical(case_seed):
    rng = np.random.default_rng(case_seed)
    feats, labels = random_batch(rng, LOGISTIC, size=15)
    params = init_params(LOGISTIC, 2)
    perm = rng.permutation(15)
    a = loss_and_grad(LOGISTIC, params, feats, labels)
    b = loss_and_grad(LOGISTIC, params, feats[perm], labels[perm])
    assert a[0] == b[0]
    assert np.array_equal(a[1], b[1])


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_cross_entropy_is_nonnegative(case_seed):
    rng = np.random.default_rng(case_seed)
    feats, labels = random_batch(rng, MLP, size=8)
    params = init_params(MLP, 4) + rng.standard_normal(MLP.dim)
    loss, _ = loss_and_grad(MLP, params, feats, labels)
    assert loss >= 0.0


def test_accuracy_tie_breaks_to_lowest_class():
    rng = substream(6, "ties")
    feats, labels = random_batch(rng, LOGISTIC, size=200)
    acc = accuracy(LOGISTIC, np.zeros(LOGISTIC.dim), feats, labels)
    assert acc == pytest.approx(np.mean(labels == 0))


def test_accuracy_single_correct_sample():
    params = np.zeros(LOGISTIC.dim)
    feats = np.zeros((1, 10))
    assert accuracy(LOGISTIC, params, feats, np.array([0])) == 1.0


def test_empty_batch_rejected():
    with pytest.raises(ValueError):
        loss_and_grad(LOGISTIC, np.zeros(33), np.zeros((0, 10)), np.zeros(0, dtype=int))
    with pytest.raises(ValueError):
        accuracy(LOGISTIC, np.zeros(33), np.zeros((0, 10)), np.zeros(0, dtype=int))


def train_full_batch(spec, feats, labels, lr, steps, seed=0):
    """Plain gradient-descent oracle used by convergence tests."""
    params = init_params(spec, seed)
    for _ in range(steps):
        _, grad = loss_and_grad(spec, params, feats, labels)
        params = params - lr * grad
    return params


def test_converged_model_separates_blobs():
    from ross.data import gen_blobs

    ds = gen_blobs(seed=99, n_samples=300, input_dim=10, num_classes=3, spread=10.0)
    spec = ModelSpec("logistic", input_dim=10, num_classes=3)
    params = train_full_batch(spec, ds.features, ds.labels, lr=0.05, steps=400)
    assert accuracy(spec, params, ds.features, ds.labels) == 1.0
