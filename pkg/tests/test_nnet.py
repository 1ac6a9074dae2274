import numpy as np
import pytest

from drme.nnet import (
    Batch,
    EmptyBatchError,
    LabelError,
    Mlp,
    ShapeError,
    forward,
    init_mlp,
    input_grads,
    loss_grads,
    mixed_grad_fd,
    sgd_step,
)


def random_model_and_batch(rng, max_layers=3, max_units=32, max_n=8, max_d=16):
    d = int(rng.integers(2, max_d + 1))
    C = int(rng.integers(2, 6))
    sizes = [d] + [int(rng.integers(2, max_units + 1))
                   for _ in range(int(rng.integers(0, max_layers)))] + [C]
    model = init_mlp(sizes, seed=int(rng.integers(1 << 30)))
    n = int(rng.integers(1, max_n + 1))
    X = rng.normal(size=(n, d))
    y = rng.integers(0, C, size=n)
    return model, Batch(X, y)


def fd_param_grad(model, batch, eps=1e-6):
    theta = model.flat_params()
    out = np.empty_like(theta)
    for i in range(len(theta)):
        tp, tm = theta.copy(), theta.copy()
        tp[i] += eps
        tm[i] -= eps
        out[i] = (loss_grads(model.with_params(tp), batch).loss
                  - loss_grads(model.with_params(tm), batch).loss) / (2 * eps)
    return out


def fd_input_grads(model, batch, eps=1e-6):
    out = np.empty_like(batch.inputs)
    for i in range(batch.inputs.shape[0]):
        for j in range(batch.inputs.shape[1]):
            xp, xm = batch.inputs.copy(), batch.inputs.copy()
            xp[i, j] += eps
            xm[i, j] -= eps
            out[i, j] = (loss_grads(model, Batch(xp, batch.labels)).loss
                         - loss_grads(model, Batch(xm, batch.labels)).loss) / (2 * eps)
    return out


class TestForward:
    def test_zero_model_gives_zero_logits(self):
        model = Mlp([np.zeros((4, 3)), np.zeros((2, 4))], [np.zeros(4), np.zeros(2)])
        X = np.random.default_rng(0).normal(size=(5, 3))
        assert np.all(forward(model, X) == 0.0)

    def test_identity_single_layer(self):
        model = Mlp([np.eye(2)], [np.zeros(2)])
        out = forward(model, np.array([[1.0, 0.0]]))
        np.testing.assert_array_equal(out, [[1.0, 0.0]])

    def test_hand_computed_2_2_2(self):
        # h = relu(W1 x + b1) = relu((0, 0.5)) ; logits = W2 h + b2
        model = Mlp(
            [np.array([[1.0, -1.0], [0.5, 0.5]]), np.array([[2.0, 1.0], [-1.0, 1.0]])],
            [np.array([0.0, -0.5]), np.array([0.1, -0.1])],
        )
        out = forward(model, np.array([[1.0, 1.0]]))
        np.testing.assert_allclose(out, [[0.6, 0.4]], rtol=1e-15)

    def test_dimension_mismatch(self):
        model = init_mlp([4, 3], seed=0)
        with pytest.raises(ShapeError):
            forward(model, np.zeros((2, 5)))

    def test_pure_and_bit_identical(self):
        model = init_mlp([6, 8, 3], seed=3)
        X = np.random.default_rng(1).normal(size=(4, 6))
        a = forward(model, X)
        b = forward(model, X)
        assert np.array_equal(a, b)


class TestLossGrads:
    def test_uniform_logits_loss_is_ln_c(self):
        for C in (2, 5, 10):
            model = Mlp([np.zeros((C, 3))], [np.zeros(C)])
            batch = Batch(np.random.default_rng(0).normal(size=(4, 3)),
                          np.zeros(4, dtype=int))
            assert loss_grads(model, batch).loss == pytest.approx(np.log(C), rel=1e-12)

    def test_duplicated_example_same_loss(self):
        model = init_mlp([5, 7, 3], seed=2)
        x = np.random.default_rng(4).normal(size=(1, 5))
        single = loss_grads(model, Batch(x, [1])).loss
        stacked = loss_grads(model, Batch(np.repeat(x, 6, axis=0), [1] * 6)).loss
        assert stacked == pytest.approx(single, rel=1e-12)

    def test_empty_batch(self):
        model = init_mlp([3, 2], seed=0)
        with pytest.raises(EmptyBatchError):
            loss_grads(model, Batch(np.zeros((0, 3)), np.zeros(0, dtype=int)))

    def test_label_out_of_range(self):
        model = init_mlp([3, 2], seed=0)
        with pytest.raises(LabelError):
            loss_grads(model, Batch(np.zeros((1, 3)), [2]))

    @pytest.mark.parametrize("seed", range(8))
    def test_gradients_match_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        model, batch = random_model_and_batch(rng)
        bundle = loss_grads(model, batch)
        fd_p = fd_param_grad(model, batch)
        fd_x = fd_input_grads(model, batch)
        scale = max(1.0, np.abs(fd_p).max())
        assert np.abs(bundle.param_grad - fd_p).max() / scale < 1e-5
        scale = max(1.0, np.abs(fd_x).max())
        assert np.abs(bundle.input_grads - fd_x).max() / scale < 1e-5


class TestInputGrads:
    @pytest.mark.parametrize("seed", range(4))
    def test_bit_identical_to_full_backprop(self, seed):
        rng = np.random.default_rng(40 + seed)
        model, batch = random_model_and_batch(rng)
        assert np.array_equal(input_grads(model, batch),
                              loss_grads(model, batch).input_grads)

    def test_validation_mirrors_loss_grads(self):
        model = init_mlp([3, 2], seed=0)
        with pytest.raises(EmptyBatchError):
            input_grads(model, Batch(np.zeros((0, 3)), np.zeros(0, dtype=int)))
        with pytest.raises(LabelError):
            input_grads(model, Batch(np.zeros((1, 3)), [5]))


class TestMixedGradFd:
    def test_zero_direction_is_exactly_zero(self):
        model = init_mlp([4, 3], seed=1)
        batch = Batch(np.random.default_rng(0).normal(size=(3, 4)), [0, 1, 2])
        out = mixed_grad_fd(model, batch, np.zeros(model.num_params))
        assert np.all(out == 0.0)

    def test_linear_in_direction(self):
        rng = np.random.default_rng(5)
        model, batch = random_model_and_batch(rng)
        v = rng.normal(size=model.num_params)
        a = mixed_grad_fd(model, batch, v)
        b = mixed_grad_fd(model, batch, 2 * v)
        np.testing.assert_allclose(b, 2 * a, rtol=1e-12)

    def test_matches_closed_form_on_linear_model(self):
        # Single linear layer, softmax cross-entropy: with V the W-block of
        # the direction, the mixed derivative for one example is
        # V^T (p - e_y) + W^T (diag(p) - p p^T) (V x + v_b), divided by n.
        rng = np.random.default_rng(7)
        d, C, n = 5, 4, 3
        model = init_mlp([d, C], seed=11)
        X = rng.normal(size=(n, d))
        y = rng.integers(0, C, size=n)
        batch = Batch(X, y)
        v = rng.normal(size=model.num_params)
        V = v[:d * C].reshape(C, d)
        vb = v[d * C:]
        W = model.weights[0]
        b = model.biases[0]
        expected = np.empty((n, d))
        for i in range(n):
            z = W @ X[i] + b
            p = np.exp(z - z.max())
            p /= p.sum()
            e = np.zeros(C)
            e[y[i]] = 1.0
            jac = np.diag(p) - np.outer(p, p)
            expected[i] = (V.T @ (p - e) + W.T @ jac @ (V @ X[i] + vb)) / n
        got = mixed_grad_fd(model, batch, v, fd_eps=1e-4)
        assert np.abs(got - expected).max() / np.abs(expected).max() < 1e-3

    def test_fd_eps_consistency(self):
        rng = np.random.default_rng(9)
        model, batch = random_model_and_batch(rng)
        v = rng.normal(size=model.num_params)
        a = mixed_grad_fd(model, batch, v, fd_eps=1e-3)
        b = mixed_grad_fd(model, batch, v, fd_eps=1e-4)
        scale = max(1.0, np.abs(a).max())
        assert np.abs(a - b).max() / scale < 1e-3


class TestSgdStep:
    def test_zero_grad_and_zero_lr_keep_params(self):
        model = init_mlp([4, 6, 2], seed=0)
        theta = model.flat_params()
        assert np.array_equal(
            sgd_step(model, np.zeros(model.num_params), 0.1).flat_params(), theta)
        grad = np.random.default_rng(0).normal(size=model.num_params)
        assert np.array_equal(sgd_step(model, grad, 0.0).flat_params(), theta)

    def test_step_decreases_loss(self):
        model = init_mlp([4, 8, 3], seed=1)
        rng = np.random.default_rng(2)
        batch = Batch(rng.normal(size=(6, 4)), rng.integers(0, 3, size=6))
        before = loss_grads(model, batch)
        after = loss_grads(sgd_step(model, before.param_grad, 0.01), batch)
        assert after.loss < before.loss

    def test_length_mismatch(self):
        model = init_mlp([4, 2], seed=0)
        with pytest.raises(ShapeError):
            sgd_step(model, np.zeros(3), 0.1)

    def test_does_not_mutate_input_model(self):
        model = init_mlp([4, 2], seed=0)
        theta = model.flat_params()
        sgd_step(model, np.ones(model.num_params), 0.5)
        assert np.array_equal(model.flat_params(), theta)


class TestMlpInvariants:
    def test_dimension_chaining_enforced(self):
        with pytest.raises(ShapeError):
            Mlp([np.zeros((3, 4)), np.zeros((2, 5))], [np.zeros(3), np.zeros(2)])

    def test_nonfinite_rejected(self):
        W = np.zeros((2, 2))
        W[0, 0] = np.nan
        with pytest.raises(ValueError):
            Mlp([W], [np.zeros(2)])

    def test_param_roundtrip(self):
        model = init_mlp([5, 7, 4], seed=3)
        flat = model.flat_params()
        again = model.with_params(flat)
        assert np.array_equal(again.flat_params(), flat)
