import numpy as np
import pytest

from qfm_noise.circuits import build_circuit, evaluate_grid
from qfm_noise.fourier import analytic_spectrum
from qfm_noise.noise import NoiseModel, sample_cge
from qfm_noise.training import (Adam, TargetSeries, TrainingConfig, TrainingDiverged,
                                coefficient_gap, generate_target, gradient, grid_coefficients,
                                model_jacobian, mse, target_grid, train)


def numeric_loss_gradient(layout, theta, target, noise, cge=None, h=1e-6):
    """Central differences of the grid MSE, evaluated point by point."""
    def loss(t):
        return np.mean((evaluate_grid(layout, target.grid, t, noise, cge=cge) - target.values) ** 2)

    grad = np.zeros_like(theta)
    for j in range(theta.size):
        e = np.zeros_like(theta)
        e[j] = h
        grad[j] = (loss(theta + e) - loss(theta - e)) / (2 * h)
    return grad


@pytest.fixture(scope="module")
def spectrum3():
    return analytic_spectrum(build_circuit("sea", 3, 1))


class TestTarget:
    def test_normalisation_and_symmetry(self, spectrum3):
        for seed in range(100):
            t = generate_target(spectrum3, 0.5, seed)
            assert abs(np.max(np.abs(t.values)) - 0.5) < 1e-9
            np.testing.assert_allclose(t.coefficients, np.conj(t.coefficients[::-1]), atol=1e-15)
            assert t.coefficients[3].imag == 0
            complex_vals = np.exp(1j * np.outer(t.grid, t.frequencies)) @ t.coefficients
            assert np.max(np.abs(complex_vals.imag)) < 1e-10

    def test_grid(self, spectrum3):
        t = generate_target(spectrum3, 0.5, 0)
        assert len(t.grid) == 7 and t.grid[0] == -np.pi and t.grid[-1] < np.pi
        np.testing.assert_allclose(np.diff(t.grid), 2 * np.pi / 7)
        np.testing.assert_allclose(target_grid(4), [-np.pi, -np.pi / 2, 0, np.pi / 2])

    def test_deterministic(self, spectrum3):
        a = generate_target(spectrum3, 0.5, 42)
        b = generate_target(spectrum3, 0.5, 42)
        np.testing.assert_array_equal(a.coefficients, b.coefficients)
        assert not np.array_equal(a.coefficients, generate_target(spectrum3, 0.5, 43).coefficients)

    def test_scale(self, spectrum3):
        a = generate_target(spectrum3, 0.5, 7)
        b = generate_target(spectrum3, 2.0, 7)
        np.testing.assert_allclose(b.coefficients, 4 * a.coefficients, atol=1e-15)

    def test_grid_coefficients_recover_target(self, spectrum3):
        t = generate_target(spectrum3, 0.5, 3)
        c = grid_coefficients(t.values, t.grid, t.frequencies)
        np.testing.assert_allclose(c, t.coefficients, atol=1e-14)

    def test_bad_inputs(self, spectrum3):
        with pytest.raises(ValueError):
            generate_target(spectrum3, 0.0, 1)
        with pytest.raises(ValueError):
            generate_target(analytic_spectrum(build_circuit("sea", 2, 1, "xy")), 0.5, 1)


class TestLossAndGap:
    def test_mse_examples(self):
        assert mse([1.0, 2.0], [1.0, 2.0]) == 0
        assert abs(mse(np.zeros(5), np.full(5, 0.3)) - 0.09) < 1e-15
        assert mse([0.5, -0.5], [0.0, 0.0]) == 0.25

    def test_mse_mismatch(self):
        with pytest.raises(ValueError):
            mse([0.0, 1.0], [0.0])

    def _target(self, coeffs):
        return TargetSeries(np.array([-1, 0, 1]), np.asarray(coeffs, dtype=complex), 0.5, None,
                            target_grid(3))

    def test_gap_examples(self):
        t = self._target([0.5, 0.1, 0.5])
        np.testing.assert_array_equal(coefficient_gap(t, t.coefficients), 0)
        np.testing.assert_allclose(coefficient_gap(t, [0.3, 0.1, 0.3]), [0.2, 0, 0.2], atol=1e-15)
        np.testing.assert_allclose(coefficient_gap(t, -t.coefficients), 0, atol=1e-15)
        np.testing.assert_allclose(coefficient_gap(t, [0.5j, 0.1, -0.5j]), 0, atol=1e-15)

    def test_gap_spectrum_mismatch(self):
        t = self._target([0.5, 0.1, 0.5])
        with pytest.raises(ValueError):
            coefficient_gap(t, [0.1, 0.2])
        with pytest.raises(ValueError):
            coefficient_gap(t, [0.1, 0.2, 0.3], frequencies=[0, 1, 2])


class TestGradient:
    layout = build_circuit("ry", 1, 1)

    @pytest.mark.parametrize("theta1,expected", [(0.0, 0.0), (np.pi / 2, -1.0)])
    def test_closed_form(self, theta1, expected):
        for method in ("parameter-shift", "finite-difference"):
            _, jac = model_jacobian(self.layout, [0.0], [theta1, 0.0], method=method)
            assert abs(jac[0, 0] - expected) < 1e-9

    def test_jacobian_values(self):
        grid = target_grid(3)
        values, jac = model_jacobian(self.layout, grid, [0.2, 0.3])
        np.testing.assert_allclose(values, np.cos(grid + 0.5), atol=1e-14)
        np.testing.assert_allclose(jac, -np.sin(grid + 0.5)[:, None] * np.ones(2), atol=1e-14)

    @pytest.mark.parametrize("ansatz", ["sea", "hea", "c15", "c19"])
    @pytest.mark.parametrize("noise", [NoiseModel(), NoiseModel(p_dp=0.03), NoiseModel(p_ad=0.02)],
                             ids=["none", "dp", "ad"])
    def test_matches_numeric_loss_gradient(self, ansatz, noise, spectrum3, rng):
        layout = build_circuit(ansatz, 3, 1)
        target = generate_target(spectrum3, 0.5, 1)
        theta = rng.uniform(0, 2 * np.pi, layout.n_params)
        ps = gradient(layout, theta, target, noise)
        fd = gradient(layout, theta, target, noise, method="fd")
        oracle = numeric_loss_gradient(layout, theta, target, noise)
        assert np.max(np.abs(ps - oracle)) < 1e-7
        assert np.max(np.abs(ps - fd)) < 1e-6

    def test_frozen_cge_draw(self, spectrum3, rng):
        layout = build_circuit("c19", 3, 1)
        noise = NoiseModel(p_cge=0.03)
        target = generate_target(spectrum3, 0.5, 2)
        theta = rng.uniform(0, 2 * np.pi, layout.n_params)
        draw = sample_cge(layout, noise, rng)
        ps = gradient(layout, theta, target, noise, cge=draw)
        fd = gradient(layout, theta, target, noise, method="fd", cge=draw)
        assert np.max(np.abs(ps - fd)) < 1e-6
        # the rng path draws exactly one offset set per gradient
        a = gradient(layout, theta, target, noise, rng=np.random.default_rng(5))
        b = gradient(layout, theta, target, noise, cge=sample_cge(layout, noise,
                                                                  np.random.default_rng(5)))
        np.testing.assert_array_equal(a, b)

    def test_unknown_method(self, spectrum3):
        target = generate_target(spectrum3, 0.5, 0)
        layout = build_circuit("sea", 3, 1)
        with pytest.raises(ValueError):
            gradient(layout, np.zeros(layout.n_params), target, method="spsa")


class TestAdam:
    def test_zero_gradient(self):
        opt = Adam()
        theta = np.array([0.3, -1.2])
        for _ in range(5):
            out = opt.step(theta, np.zeros(2))
            np.testing.assert_array_equal(out, theta)

    def test_first_step_size(self):
        # bias correction makes the first step lr * sign(g)
        out = Adam(lr=0.01).step(np.zeros(3), np.array([2.0, -0.5, 1e-3]))
        np.testing.assert_allclose(out, [-0.01, 0.01, -0.01], rtol=1e-4)

    def test_bad_lr(self):
        with pytest.raises(ValueError):
            Adam(lr=0)
        with pytest.raises(ValueError):
            TrainingConfig(lr=-1.0)


class TestTrain:
    layout = build_circuit("sea", 2, 1)

    @pytest.fixture
    def target(self):
        return generate_target(analytic_spectrum(self.layout), 0.5, 4)

    def test_zero_steps(self, target):
        trace = train(self.layout, target, TrainingConfig(steps=0), seed=1)
        assert trace.steps == [0] and len(trace.mse) == 1 and trace.q_steps == [0]

    def test_records(self, target):
        trace = train(self.layout, target, TrainingConfig(steps=25), seed=1)
        assert trace.steps == list(range(26))
        assert trace.q_steps == [0, 10, 20]
        assert all(m >= 0 for m in trace.mse)
        assert all(np.all(d >= 0) for d in trace.delta_c)
        assert trace.final_mse < trace.initial_mse
        assert all(0 <= q <= 1 + 1e-9 for q in trace.q)

    def test_record_cadence(self, target):
        trace = train(self.layout, target, TrainingConfig(steps=12, record_every=5), seed=1)
        assert trace.steps == [0, 5, 10, 12]

    def test_reproducible(self, target):
        cfg = TrainingConfig(steps=15, noise=NoiseModel(p_cge=0.03, p_dp=0.01))
        a = train(self.layout, target, cfg, seed=np.random.SeedSequence(9))
        b = train(self.layout, target, cfg, seed=np.random.SeedSequence(9))
        assert a.mse == b.mse and a.q == b.q
        np.testing.assert_array_equal(a.theta, b.theta)

    def test_initial_parameters_independent_of_noise(self, target):
        clean = train(self.layout, target, TrainingConfig(steps=0), seed=3)
        noisy = train(self.layout, target, TrainingConfig(steps=0, noise=NoiseModel(p_cge=0.1)),
                      seed=3)
        np.testing.assert_array_equal(clean.theta, noisy.theta)

    def test_matches_manual_loop(self, target):
        steps = 5
        trace = train(self.layout, target, TrainingConfig(steps=steps), seed=11)
        theta = np.random.default_rng(np.random.SeedSequence(11).spawn(2)[0]).uniform(
            0, 2 * np.pi, self.layout.n_params)
        opt = Adam()
        losses = []
        for step in range(steps + 1):
            losses.append(mse(target.values, evaluate_grid(self.layout, target.grid, theta)))
            if step < steps:
                theta = opt.step(theta, numeric_loss_gradient(self.layout, theta, target,
                                                              NoiseModel()))
        # Adam normalises by sqrt(v), so near-zero gradient components amplify tiny
        # differences between estimators; the loss path is the well-conditioned check
        np.testing.assert_allclose(trace.mse, losses, rtol=1e-6)
        np.testing.assert_allclose(trace.theta, theta, atol=1e-3)

    def test_learns_simple_target(self, target):
        trace = train(self.layout, target, TrainingConfig(steps=300, lr=0.05), seed=0)
        assert trace.final_mse < trace.initial_mse / 2
        assert np.mean(trace.delta_c[-1]) < np.mean(trace.delta_c[0])

    def test_divergence(self):
        bad = TargetSeries(np.array([-1, 0, 1]), np.array([np.nan, 0, np.nan], dtype=complex),
                           0.5, None, target_grid(3))
        with pytest.raises(TrainingDiverged) as info:
            train(build_circuit("ry", 1, 1), bad, TrainingConfig(steps=10), seed=0)
        assert info.value.trace.steps == [0]

    def test_rejects_two_features(self, target):
        with pytest.raises(ValueError):
            train(build_circuit("sea", 2, 1, "xy"), target, TrainingConfig(steps=1))
