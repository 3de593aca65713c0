import zlib

import numpy as np
import pytest

from hqc.gates import GateKind
from hqc.gradients import (
    EmptyBatchError,
    LabelOutOfRangeError,
    cost_and_grad,
    cost_and_grad_arrays,
    finite_diff_grad,
)
from hqc.sim import Statevector
from hqc.topology import build_mera, build_ttn, predict_expectation

ALL_KINDS = list(GateKind)


def random_params(model, rng):
    scale = np.pi if model.kind.is_simple else 0.6
    return rng.uniform(-scale, scale, size=model.n_params)


def random_batch(n_qubits, size, rng):
    return [(Statevector.random(n_qubits, rng), int(rng.integers(2))) for _ in range(size)]


def assert_grad_close(grad, fd):
    """Max-abs within 1e-6 and relative within 1e-4 above the FD noise floor.

    Central differences at step 1e-6 on an O(1) cost carry ~1e-10 roundoff,
    so below coordinate magnitude 1e-5 the oracle cannot certify a 1e-4
    relative error and the absolute bound governs instead.
    """
    assert np.max(np.abs(grad - fd)) < 1e-6
    denom = np.maximum(np.maximum(np.abs(fd), np.abs(grad)), 1e-5)
    assert np.max(np.abs(grad - fd) / denom) < 1e-4


class TestCost:
    def test_zero_residual_gives_zero_cost(self):
        model = build_ttn(4, GateKind.SIMPLE_REAL)
        params = np.zeros(model.n_params)
        batch = [(Statevector.zero(4), 1)]  # expectation exactly 1
        result = cost_and_grad(model, params, batch)
        assert result.cost == pytest.approx(0.0, abs=1e-15)

    def test_single_sample_cost_is_squared_residual(self):
        rng = np.random.default_rng(1)
        model = build_ttn(4, GateKind.GENERAL_REAL)
        params = random_params(model, rng)
        state = Statevector.random(4, rng)
        p = predict_expectation(model, params, state)
        for y in (0, 1):
            result = cost_and_grad(model, params, [(state, y)])
            assert result.cost == pytest.approx((p - y) ** 2, abs=1e-12)

    def test_cost_invariant_under_batch_permutation(self):
        rng = np.random.default_rng(2)
        model = build_ttn(4, GateKind.GENERAL_COMPLEX)
        params = random_params(model, rng)
        batch = random_batch(4, 7, rng)
        perm = [batch[i] for i in rng.permutation(7)]
        a = cost_and_grad(model, params, batch).cost
        b = cost_and_grad(model, params, perm).cost
        assert a == pytest.approx(b, abs=1e-12)

    def test_measurement_angle_has_closed_form(self):
        # Zero-angle simple blocks leave |0000> alone, so the cost is
        # cos(theta/2)^4 in the readout angle alone (label 0).
        model = build_ttn(4, GateKind.SIMPLE_REAL)
        theta = 0.813
        params = np.zeros(model.n_params)
        params[-1] = theta
        result = cost_and_grad(model, params, [(Statevector.zero(4), 0)])
        p = np.cos(theta / 2) ** 2
        assert result.cost == pytest.approx(p**2, abs=1e-12)
        assert result.grad[-1] == pytest.approx(-p * np.sin(theta), abs=1e-12)


class TestGradientOracle:
    def test_general_complex_batch_of_five(self):
        rng = np.random.default_rng(3)
        model = build_ttn(4, GateKind.GENERAL_COMPLEX)
        params = random_params(model, rng)
        batch = random_batch(4, 5, rng)
        grad = cost_and_grad(model, params, batch).grad
        fd = finite_diff_grad(model, params, batch, step=1e-6)
        assert_grad_close(grad, fd)

    @pytest.mark.parametrize("kind", ALL_KINDS)
    @pytest.mark.parametrize("layout", ["ttn", "mera"])
    def test_agreement_across_kinds_and_layouts(self, kind, layout):
        # 5 draws x 6 kinds x 2 layouts = 60 random configurations.
        rng = np.random.default_rng(zlib.crc32(str((kind.value, layout, "grad")).encode()))
        builder = build_ttn if layout == "ttn" else build_mera
        model = builder(4, kind)
        for _ in range(5):
            params = random_params(model, rng)
            batch = random_batch(4, 3, rng)
            grad = cost_and_grad(model, params, batch).grad
            fd = finite_diff_grad(model, params, batch, step=1e-6)
            assert_grad_close(grad, fd)

    def test_batch_gradient_is_mean_of_per_sample_gradients(self):
        rng = np.random.default_rng(4)
        model = build_ttn(4, GateKind.GENERAL_REAL)
        params = random_params(model, rng)
        batch = random_batch(4, 6, rng)
        whole = cost_and_grad(model, params, batch).grad
        per_sample = np.mean(
            [cost_and_grad(model, params, [pair]).grad for pair in batch], axis=0
        )
        np.testing.assert_allclose(whole, per_sample, atol=1e-10)

    def test_finite_diff_richardson_consistency(self):
        # Central differences are second order: halving the step should
        # shrink the truncation error about fourfold.
        rng = np.random.default_rng(5)
        model = build_ttn(4, GateKind.GENERAL_REAL)
        params = random_params(model, rng)
        batch = random_batch(4, 2, rng)
        exact = cost_and_grad(model, params, batch).grad
        err_h = np.max(np.abs(finite_diff_grad(model, params, batch, step=2e-3) - exact))
        err_h2 = np.max(np.abs(finite_diff_grad(model, params, batch, step=1e-3) - exact))
        assert err_h / err_h2 > 2.5

    def test_gradient_result_shape_and_finiteness(self):
        rng = np.random.default_rng(6)
        model = build_mera(4, GateKind.ANCILLA_REAL)
        params = random_params(model, rng)
        batch = random_batch(4, 2, rng)
        result = cost_and_grad(model, params, batch)
        assert result.grad.shape == (model.n_params,)
        assert np.all(np.isfinite(result.grad))
        assert result.cost >= 0.0


class TestValidation:
    def test_empty_batch_rejected(self):
        model = build_ttn(4, GateKind.SIMPLE_REAL)
        with pytest.raises(EmptyBatchError):
            cost_and_grad(model, np.zeros(model.n_params), [])

    def test_bad_labels_rejected(self):
        model = build_ttn(4, GateKind.SIMPLE_REAL)
        state = Statevector.zero(4)
        with pytest.raises(LabelOutOfRangeError):
            cost_and_grad(model, np.zeros(model.n_params), [(state, 2)])
        with pytest.raises(LabelOutOfRangeError):
            cost_and_grad_arrays(
                model, np.zeros(model.n_params), state.amps[None, :], np.array([0.5])
            )
