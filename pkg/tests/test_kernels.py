"""Parity between the compiled core and the pure-python fallback."""

import numpy as np
import pytest

from drme import _core, _core_py

cy = pytest.importorskip("drme._core_cy")


def random_mlp_arrays(rng, sizes):
    weights = [np.ascontiguousarray(rng.normal(0, 0.5, size=(b, a)))
               for a, b in zip(sizes, sizes[1:])]
    biases = [np.ascontiguousarray(rng.normal(0, 0.1, size=b)) for b in sizes[1:]]
    return weights, biases


class TestBackendSelection:
    def test_backend_constant(self):
        assert _core.BACKEND in ("cython", "python")

    def test_dispatched_functions_exist(self):
        for name in ("mlp_forward", "mlp_loss_grads", "svgd_direction",
                     "median_sqdist"):
            assert callable(getattr(_core, name))


class TestForwardParity:
    @pytest.mark.parametrize("seed", range(5))
    def test_forward_matches(self, seed):
        rng = np.random.default_rng(seed)
        sizes = [int(rng.integers(2, 12)) for _ in range(int(rng.integers(2, 5)))]
        weights, biases = random_mlp_arrays(rng, sizes)
        X = np.ascontiguousarray(rng.normal(size=(int(rng.integers(1, 9)), sizes[0])))
        a = _core_py.mlp_forward(weights, biases, X)
        b = cy.mlp_forward(weights, biases, X)
        np.testing.assert_allclose(np.asarray(b), a, rtol=1e-13, atol=1e-13)


class TestLossGradsParity:
    @pytest.mark.parametrize("seed", range(5))
    def test_loss_and_all_gradients_match(self, seed):
        rng = np.random.default_rng(100 + seed)
        sizes = [int(rng.integers(2, 12)) for _ in range(int(rng.integers(2, 5)))]
        weights, biases = random_mlp_arrays(rng, sizes)
        n = int(rng.integers(1, 9))
        X = np.ascontiguousarray(rng.normal(size=(n, sizes[0])))
        y = np.ascontiguousarray(rng.integers(0, sizes[-1], size=n), dtype=np.int64)
        loss_a, dW_a, db_a, dX_a = _core_py.mlp_loss_grads(weights, biases, X, y)
        loss_b, dW_b, db_b, dX_b = cy.mlp_loss_grads(weights, biases, X, y)
        assert loss_b == pytest.approx(loss_a, rel=1e-13)
        for ga, gb in zip(dW_a, dW_b):
            np.testing.assert_allclose(np.asarray(gb), ga, rtol=1e-12, atol=1e-14)
        for ga, gb in zip(db_a, db_b):
            np.testing.assert_allclose(np.asarray(gb), ga, rtol=1e-12, atol=1e-14)
        np.testing.assert_allclose(np.asarray(dX_b), dX_a, rtol=1e-12, atol=1e-14)


class TestInputGradsParity:
    @pytest.mark.parametrize("seed", range(5))
    def test_input_grads_bit_identical_to_loss_grads(self, seed):
        rng = np.random.default_rng(400 + seed)
        sizes = [int(rng.integers(2, 12)) for _ in range(int(rng.integers(2, 5)))]
        weights, biases = random_mlp_arrays(rng, sizes)
        n = int(rng.integers(1, 9))
        X = np.ascontiguousarray(rng.normal(size=(n, sizes[0])))
        y = np.ascontiguousarray(rng.integers(0, sizes[-1], size=n), dtype=np.int64)
        for mod in (_core_py, cy):
            dX_full = np.asarray(mod.mlp_loss_grads(weights, biases, X, y)[3])
            dX_only = np.asarray(mod.mlp_input_grads(weights, biases, X, y))
            assert np.array_equal(dX_only, dX_full)


class TestSvgdParity:
    @pytest.mark.parametrize("seed", range(5))
    def test_direction_matches(self, seed):
        rng = np.random.default_rng(200 + seed)
        n, d = int(rng.integers(1, 20)), int(rng.integers(1, 8))
        X = np.ascontiguousarray(rng.normal(size=(n, d)))
        G = np.ascontiguousarray(rng.normal(size=(n, d)))
        sigma = float(rng.uniform(0.2, 3.0))
        a = _core_py.svgd_direction(X, G, sigma)
        b = cy.svgd_direction(X, G, sigma)
        np.testing.assert_allclose(np.asarray(b), a, rtol=1e-12, atol=1e-14)

    @pytest.mark.parametrize("seed", range(5))
    def test_median_sqdist_matches(self, seed):
        rng = np.random.default_rng(300 + seed)
        X = np.ascontiguousarray(rng.normal(size=(int(rng.integers(2, 25)), 3)))
        assert cy.median_sqdist(X) == pytest.approx(_core_py.median_sqdist(X),
                                                    rel=1e-13)
