import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qfm_noise import quantum as qc
from qfm_noise.circuits import (CircuitError, EncodingSpec, build_circuit, evaluate, evaluate_grid,
                                expectation_values, gate_matrices, simulate, strip_for_metrics)
from qfm_noise.noise import CgeDraw, NoiseModel, kraus_for

from conftest import full_gate

ANSATZE = ["sea", "hea", "c15", "c19"]


def dense_expectation(layout, x, theta, noise):
    """Reference density-matrix simulation with full 2^n operators."""
    n = layout.n
    dim = 2**n
    rho = np.zeros((dim, dim), dtype=complex)
    rho[0, 0] = 1

    def channel(rho, kind, p, wire):
        ops = [full_gate(k, [wire], n) for k in kraus_for(kind, p).operators]
        return sum(k @ rho @ k.conj().T for k in ops)

    if noise.p_sp:
        for w in range(n):
            rho = channel(rho, "BF", noise.p_sp, w)
    for g in layout.gates:
        if g.role == "trainable":
            angle = theta[g.param]
        elif g.role == "encoding":
            angle = x[g.feature]
        else:
            angle = None
        u = full_gate(gate_matrices(g.kind, angle), list(g.wires), n)
        rho = u @ rho @ u.conj().T
        for w in g.wires:
            for kind in ("BF", "PF", "DP"):
                p = getattr(noise, f"p_{kind.lower()}")
                if p:
                    rho = channel(rho, kind, p, w)
    for kind in ("AD", "PD"):
        p = getattr(noise, f"p_{kind.lower()}")
        if p:
            for w in range(n):
                rho = channel(rho, kind, p, w)
    if noise.p_me:
        for w in range(n):
            rho = channel(rho, "BF", noise.p_me, w)
    return float(np.trace(qc.mean_z(n).matrix @ rho).real)


class TestLayouts:
    @pytest.mark.parametrize("ansatz,n,expected", [
        ("sea", 4, 24), ("c19", 4, 24), ("hea", 3, 12), ("c15", 4, 16),
    ])
    def test_parameter_counts(self, ansatz, n, expected):
        assert build_circuit(ansatz, n, 1).n_params == expected

    @pytest.mark.parametrize("ansatz,per_qubit", [("sea", 3), ("hea", 2), ("c15", 2), ("c19", 3)])
    def test_count_formula(self, ansatz, per_qubit):
        for n in range(2, 9):
            for layers in (1, 2, 3):
                assert build_circuit(ansatz, n, layers).n_params == per_qubit * n * (layers + 1)

    def test_unknown_ansatz(self):
        with pytest.raises(CircuitError):
            build_circuit("qaoa", 3)

    def test_slots_contiguous_and_ordered(self):
        layout = build_circuit("sea", 3, 2)
        slots = [g.param for g in layout.gates if g.role == "trainable"]
        assert slots == list(range(layout.n_params))
        blocks = [g.block for g in layout.gates if g.role == "encoding"]
        assert blocks == [0] * 3 + [1] * 3

    def test_layer_structure(self):
        # W S W: trainable, then encoding, then trainable again
        roles = [g.role for g in build_circuit("hea", 2, 1).gates if g.role]
        first_enc = roles.index("encoding")
        assert set(roles[:first_enc]) == {"trainable"}
        assert roles[first_enc:first_enc + 2] == ["encoding"] * 2
        assert set(roles[first_enc + 2:]) == {"trainable"}

    def test_sea_ring(self):
        cnots = [g.wires for g in build_circuit("sea", 4, 1).gates if g.kind == "CNOT"][:4]
        assert cnots == [(0, 1), (1, 2), (2, 3), (3, 0)]

    def test_c15_rings(self):
        cnots = [g.wires for g in build_circuit("c15", 3, 1).gates if g.kind == "CNOT"][:6]
        assert cnots == [(2, 1), (1, 0), (0, 2), (0, 1), (1, 2), (2, 0)]
        kinds = {g.kind for g in build_circuit("c15", 3, 1).gates if g.role == "trainable"}
        assert kinds == {"RY"}

    def test_c19_controlled_rotations(self):
        layout = build_circuit("c19", 3, 1)
        crx = [g for g in layout.gates if g.kind == "CRX"]
        assert len(crx) == 6 and all(g.role == "trainable" for g in crx)

    def test_two_feature_encoding(self):
        layout = build_circuit("hea", 2, 1, "xy")
        enc = [(g.kind, g.feature) for g in layout.gates if g.role == "encoding"]
        assert enc == [("RX", 0), ("RX", 0), ("RY", 1), ("RY", 1)]

    def test_encoding_wires(self):
        layout = build_circuit("sea", 3, 1, EncodingSpec(("Z",), wires=((1,),)))
        assert [g.wires for g in layout.gates if g.role == "encoding"] == [(1,)]

    def test_bad_encoding(self):
        with pytest.raises(CircuitError):
            EncodingSpec(("W",))

    def test_strip(self):
        stripped = strip_for_metrics(build_circuit("sea", 4, 1))
        assert stripped.n_params == 12 and stripped.n_encoding == 0
        assert strip_for_metrics(build_circuit("hea", 3, 1)).n_params == 6


class TestEvaluate:
    layout = build_circuit("ry", 1, 1)

    @settings(max_examples=40, deadline=None)
    @given(t1=st.floats(-7, 7), t2=st.floats(-7, 7), x=st.floats(-7, 7))
    def test_closed_form(self, t1, t2, x):
        assert abs(evaluate(self.layout, [x], [t1, t2]) - np.cos(t1 + x + t2)) < 1e-12

    def test_all_zero(self):
        assert abs(evaluate(self.layout, [0.0], [0.0, 0.0]) - 1) < 1e-15

    @pytest.mark.parametrize("p", [0.01, 0.03, 0.2])
    def test_depolarizing_closed_form(self, p):
        val = evaluate(self.layout, [0.4], [0.3, -1.1], NoiseModel(p_dp=p))
        assert abs(val - (1 - 4 * p / 3) ** 3 * np.cos(0.3 + 0.4 - 1.1)) < 1e-12

    def test_grid_matches_pointwise(self):
        grid = np.array([0.0, 2 * np.pi / 3, 4 * np.pi / 3])
        vals = evaluate_grid(self.layout, grid, [0.2, 0.5])
        np.testing.assert_allclose(vals, np.cos(0.7 + grid), atol=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(CircuitError):
            evaluate(self.layout, [0.0], [0.1])
        with pytest.raises(CircuitError):
            evaluate(self.layout, [0.0, 1.0], [0.1, 0.2])

    def test_empty_grid(self):
        with pytest.raises(CircuitError):
            evaluate_grid(self.layout, np.zeros((0, 1)), [0.1, 0.2])

    def test_invalid_probability(self):
        with pytest.raises(ValueError):
            evaluate(self.layout, [0.0], [0.1, 0.2], NoiseModel(p_bf=1.2))

    def test_cge_needs_rng(self):
        with pytest.raises(CircuitError):
            evaluate(self.layout, [0.0], [0.1, 0.2], NoiseModel(p_cge=0.1))


class TestAgainstDenseOracle:
    @pytest.mark.parametrize("ansatz", ANSATZE)
    @pytest.mark.parametrize("noise", [
        NoiseModel(),
        NoiseModel(p_dp=0.03),
        NoiseModel(p_bf=0.02, p_pf=0.01),
        NoiseModel(p_ad=0.03, p_pd=0.02),
        NoiseModel(p_sp=0.03, p_me=0.02),
    ], ids=["none", "dp", "bf+pf", "ad+pd", "spam"])
    def test_matches(self, ansatz, noise, rng):
        layout = build_circuit(ansatz, 3, 1)
        theta = rng.uniform(0, 2 * np.pi, layout.n_params)
        x = rng.uniform(-np.pi, np.pi, 1)
        got = evaluate(layout, x, theta, noise)
        assert abs(got - dense_expectation(layout, x, theta, noise)) < 1e-12


class TestConsistency:
    @pytest.mark.parametrize("ansatz", ANSATZE)
    def test_pure_equals_density(self, ansatz, rng):
        layout = build_circuit(ansatz, 3, 2)
        theta = rng.uniform(0, 2 * np.pi, (5, layout.n_params))
        x = rng.uniform(0, 2 * np.pi, (5, 1))
        pure = expectation_values(layout, x, theta)
        state, is_pure = simulate(layout, x, theta, force_density=True)
        assert not is_pure
        mixed = qc.expectation_batch(state, qc.mean_z(3), pure=False)
        np.testing.assert_allclose(pure, mixed, atol=1e-10)

    @pytest.mark.parametrize("ansatz", ANSATZE)
    def test_periodic(self, ansatz, rng):
        layout = build_circuit(ansatz, 3, 1)
        theta = rng.uniform(0, 2 * np.pi, layout.n_params)
        x = rng.uniform(0, 2 * np.pi, (8, 1))
        np.testing.assert_allclose(expectation_values(layout, x, theta),
                                   expectation_values(layout, x + 2 * np.pi, theta), atol=1e-10)

    def test_zero_cge_equals_noiseless(self, rng):
        layout = build_circuit("sea", 3, 1)
        theta = rng.uniform(0, 2 * np.pi, layout.n_params)
        grid = np.linspace(0, 2 * np.pi, 7)
        a = evaluate_grid(layout, grid, theta)
        b = evaluate_grid(layout, grid, theta, NoiseModel(p_cge=0.0), rng=rng)
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_cge_frozen_over_grid(self, rng):
        layout = build_circuit("hea", 2, 1)
        theta = rng.uniform(0, 2 * np.pi, layout.n_params)
        noise = NoiseModel(p_cge=0.05)
        grid = np.linspace(0, 2 * np.pi, 5)
        vals = evaluate_grid(layout, grid, theta, noise, rng=np.random.default_rng(3))
        draw = __import__("qfm_noise.noise", fromlist=["sample_cge"]).sample_cge(
            layout, noise, np.random.default_rng(3))
        pointwise = [evaluate_grid(layout, [x], theta, noise, cge=draw)[0] for x in grid]
        np.testing.assert_allclose(vals, pointwise, atol=1e-14)

    def test_trainable_offset_equals_shifted_parameters(self, rng):
        layout = build_circuit("c19", 3, 1)
        theta = rng.uniform(0, 2 * np.pi, layout.n_params)
        eps = rng.normal(0, 0.1, layout.n_params)
        draw = CgeDraw(np.zeros(layout.n_encoding), eps)
        a = evaluate_grid(layout, [0.3], theta, NoiseModel(p_cge=0.1), cge=draw)
        b = evaluate_grid(layout, [0.3], theta + eps)
        np.testing.assert_allclose(a, b, atol=1e-13)

    def test_encoding_offset_modes(self):
        layout = build_circuit("ry", 1, 1)
        draw = CgeDraw(np.array([0.1]), np.zeros(2))
        freq = evaluate_grid(layout, [2.0], [0, 0], NoiseModel(p_cge=0.1), cge=draw)[0]
        off = evaluate_grid(layout, [2.0], [0, 0], NoiseModel(p_cge=0.1, cge_encoding="offset"),
                            cge=draw)[0]
        assert abs(freq - np.cos(2.0 * 1.1)) < 1e-14
        assert abs(off - np.cos(2.1)) < 1e-14

    def test_parity_observable(self):
        layout = build_circuit("ry", 2, 1)
        val = evaluate(layout, [0.5], [0.1, 0.2, 0.3, 0.4], obs=qc.z_parity(2))
        assert abs(val - np.cos(0.1 + 0.5 + 0.3) * np.cos(0.2 + 0.5 + 0.4)) < 1e-12

    def test_output_bounded(self, rng):
        layout = build_circuit("sea", 4, 1)
        theta = rng.uniform(0, 2 * np.pi, (20, layout.n_params))
        vals = expectation_values(layout, rng.uniform(0, 6, (20, 1)), theta, NoiseModel(p_ad=0.1))
        assert np.all(np.abs(vals) <= 1 + 1e-12)
