import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from digcl import (
    ComplexFeatures,
    Digraph,
    build_propagation,
    encode_paths,
    fuse_project,
    gradient_check,
    gru_step,
    init_model_params,
    load_checkpoint,
    node_readout,
    personalized_charge,
    propagate,
    save_checkpoint,
    symmetrize,
)
from digcl.magnetic import build_phase, is_hermitian
from digcl.neural import (
    ModelParams,
    _encode_paths_backward,
    _encode_paths_forward,
    _mlp_backward,
    _mlp_forward,
    param_shapes,
    zero_gradients,
)
from conftest import random_digraph


def zero_params(d_in=3, d_emb=4, hidden=6) -> ModelParams:
    return ModelParams(**{k: np.zeros(s) for k, s in param_shapes(d_in, d_emb, hidden).items()})


def cycle_operator(q0=0.25):
    g = Digraph(3, [(0, 1), (1, 2), (2, 0)])
    cf = personalized_charge(g, q0)
    a_s, d_s = symmetrize(g)
    return g, build_propagation(a_s, d_s, build_phase(g, dict(cf.q_star)))


class TestBuildPropagation:
    def test_single_isolated_node(self):
        p = build_propagation(np.zeros((1, 1)), np.zeros((1, 1)), np.zeros((1, 1)))
        assert np.array_equal(p, np.array([[1.0 + 0.0j]]))

    def test_bidirected_pair(self):
        g = Digraph(2, [(0, 1), (1, 0)])
        a_s, d_s = symmetrize(g)
        p = build_propagation(a_s, d_s, np.zeros((2, 2)))
        assert np.allclose(p, 0.5)
        assert np.abs(p.imag).max() == 0.0

    def test_hermitian_and_spectral_radius(self, rng):
        for _ in range(15):
            g = random_digraph(rng, 9, 0.3, min_edges=2)
            cf = personalized_charge(g, 0.25)
            a_s, d_s = symmetrize(g)
            p = build_propagation(a_s, d_s, build_phase(g, dict(cf.q_star)))
            assert is_hermitian(p)
            assert np.abs(np.linalg.eigvalsh(p)).max() <= 1.0 + 1e-9


class TestPropagate:
    def test_identity_operator(self):
        x = ComplexFeatures.from_real(np.arange(6.0).reshape(3, 2))
        out = propagate(np.eye(3, dtype=complex), x, n_layers=4)
        assert np.array_equal(out.real, x.real) and np.array_equal(out.imag, x.imag)

    def test_matches_complex_matmul_oracle(self):
        _, p = cycle_operator()
        x0 = np.eye(3)
        out = propagate(p, ComplexFeatures.from_real(x0), n_layers=2)
        oracle = np.linalg.matrix_power(p, 2) @ (x0 + 1j * x0)
        assert np.abs(out.real - oracle.real).max() <= 1e-12
        assert np.abs(out.imag - oracle.imag).max() <= 1e-12

    def test_linearity(self, rng):
        _, p = cycle_operator()
        x = rng.normal(size=(3, 4))
        y = rng.normal(size=(3, 4))
        a, b = 0.7, -1.3
        left = propagate(p, ComplexFeatures(real=a * x + b * y, imag=np.zeros((3, 4))), 3)
        rx = propagate(p, ComplexFeatures(real=x, imag=np.zeros((3, 4))), 3)
        ry = propagate(p, ComplexFeatures(real=y, imag=np.zeros((3, 4))), 3)
        assert np.abs(left.real - (a * rx.real + b * ry.real)).max() <= 1e-12
        assert np.abs(left.imag - (a * rx.imag + b * ry.imag)).max() <= 1e-12

    def test_zero_phase_keeps_channels_equal(self, rng):
        g = random_digraph(rng, 6, 0.4, min_edges=2)
        a_s, d_s = symmetrize(g)
        p = build_propagation(a_s, d_s, np.zeros((g.n, g.n)))
        x = ComplexFeatures.from_real(rng.normal(size=(g.n, 3)))
        out = propagate(p, x, n_layers=3)
        assert np.array_equal(out.real, out.imag)

    def test_cross_term_free_variant(self, rng):
        _, p = cycle_operator()
        x = ComplexFeatures.from_real(rng.normal(size=(3, 2)))
        out = propagate(p, x, n_layers=1, cross_terms=False)
        assert np.allclose(out.real, p.real @ x.real)
        assert np.allclose(out.imag, p.imag @ x.imag)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="rows"):
            propagate(np.eye(3, dtype=complex), ComplexFeatures.from_real(np.zeros((2, 2))), 1)
        with pytest.raises(ValueError, match="n_layers"):
            propagate(np.eye(2, dtype=complex), ComplexFeatures.from_real(np.zeros((2, 2))), 0)


class TestNodeReadout:
    def test_zero_params_give_zero(self):
        params = zero_params()
        x = ComplexFeatures.from_real(np.ones((5, 3)))
        assert not node_readout(params, x).any()

    def test_identity_passthrough(self):
        # first layer wired as identity, second as identity, no nonlinearity
        d = 2
        params = zero_params(d_in=d, d_emb=2 * d, hidden=2 * d)
        params.readout_w1[:] = np.eye(2 * d)
        params.readout_w2[:] = np.eye(2 * d)
        real = np.arange(6.0).reshape(3, 2)
        imag = -real
        out = node_readout(params, ComplexFeatures(real=real, imag=imag), activation="identity")
        assert np.array_equal(out, np.hstack([real, imag]))

    def test_width_mismatch(self):
        params = zero_params(d_in=3)
        with pytest.raises(ValueError, match="width"):
            node_readout(params, ComplexFeatures.from_real(np.zeros((4, 5))))

    def test_parameter_gradients_match_fd(self, rng):
        params = init_model_params(3, d_emb=4, hidden=5, seed=1)
        x = ComplexFeatures.from_real(rng.normal(size=(6, 3)))
        probe = rng.normal(size=(6, 4))
        z = np.hstack([x.real, x.imag])

        def loss_fn(p):
            out, _ = _mlp_forward(p.readout_w1, p.readout_b1, p.readout_w2, p.readout_b2, z)
            return float((out * probe).sum())

        out, cache = _mlp_forward(
            params.readout_w1, params.readout_b1, params.readout_w2, params.readout_b2, z
        )
        grads = zero_gradients(params)
        d_w1, d_b1, d_w2, d_b2, _ = _mlp_backward(
            params.readout_w1, params.readout_w2, cache, probe
        )
        grads["readout_w1"] += d_w1
        grads["readout_b1"] += d_b1
        grads["readout_w2"] += d_w2
        grads["readout_b2"] += d_b2
        assert gradient_check(params, loss_fn, grads, eps=1e-6) < 1e-5


class TestGruStep:
    def test_zero_weights_halve_hidden_state(self):
        params = zero_params(d_in=2, d_emb=2)
        h = np.array([1.0, 1.0])
        x = np.array([3.0, -2.0])
        h1 = gru_step(params, h, x)
        assert np.allclose(h1, [0.5, 0.5])
        h2 = gru_step(params, h1, x)
        assert np.allclose(h2, [0.25, 0.25])

    def test_zero_hidden_and_candidate_stay_zero(self, rng):
        params = init_model_params(3, d_emb=4, hidden=5, seed=0)
        params.gru_wh[:] = 0.0
        out = gru_step(params, np.zeros(4), rng.normal(size=3))
        assert not out.any()

    def test_gradients_match_fd(self, rng):
        params = init_model_params(3, d_emb=4, hidden=5, seed=2)
        h0 = rng.normal(size=(1, 4))
        x = rng.normal(size=(1, 3))
        probe = rng.normal(size=(1, 4))

        from digcl.neural import _gru_cell_backward, _gru_cell_forward

        def loss_fn(p):
            h, _ = _gru_cell_forward(p, h0, x)
            return float((h * probe).sum())

        _, cache = _gru_cell_forward(params, h0, x)
        grads = zero_gradients(params)
        _gru_cell_backward(params, cache, probe, grads)
        assert gradient_check(params, loss_fn, grads, eps=1e-6) < 1e-5

    @settings(max_examples=30, deadline=None)
    @given(st.integers(min_value=0, max_value=2**31), st.integers(min_value=1, max_value=6))
    def test_bounded_state(self, seed, steps):
        rng = np.random.default_rng(seed)
        params = init_model_params(3, d_emb=4, hidden=5, seed=seed % 1000)
        h = rng.uniform(-1, 1, size=4)
        for _ in range(steps):
            h = gru_step(params, h, rng.uniform(-1, 1, size=3))
            assert np.all(np.abs(h) < 1.0)


class TestEncodePaths:
    def test_zero_weights_give_zero(self):
        params = zero_params(d_in=2, d_emb=2)
        pe = encode_paths(params, [[0, 1], [1]], np.ones((2, 2)))
        assert not pe.any()

    def test_identical_paths_identical_rows(self, rng):
        params = init_model_params(3, d_emb=4, hidden=5, seed=3)
        x = rng.normal(size=(4, 3))
        pe = encode_paths(params, [[0, 1, 2], [0, 1, 2]], x)
        assert np.array_equal(pe[0], pe[1])

    def test_order_sensitivity(self, rng):
        params = init_model_params(3, d_emb=4, hidden=5, seed=4)
        x = rng.normal(size=(3, 3))
        pe = encode_paths(params, [[0, 1, 2], [0, 2, 1]], x)
        assert np.linalg.norm(pe[0] - pe[1]) > 1e-8

    def test_batched_matches_stepwise(self, rng):
        params = init_model_params(2, d_emb=3, hidden=4, seed=5)
        x = rng.normal(size=(6, 2))
        paths = [[0, 1, 2, 3], [4], [5, 0], [2, 2, 2, 2]]
        pe = encode_paths(params, paths, x)
        for i, path in enumerate(paths):
            h = np.zeros(3)
            for node in path:
                h = gru_step(params, h, x[node])
            assert np.allclose(pe[i], h, atol=1e-12)

    def test_length_one_path_runs_one_step(self, rng):
        params = init_model_params(2, d_emb=3, hidden=4, seed=6)
        x = rng.normal(size=(2, 2))
        pe = encode_paths(params, [[1]], x)
        assert np.allclose(pe[0], gru_step(params, np.zeros(3), x[1]))

    def test_bad_node_id(self):
        params = zero_params(d_in=2, d_emb=2)
        with pytest.raises(ValueError, match="node id"):
            encode_paths(params, [[0, 5]], np.ones((2, 2)))

    def test_gradients_match_fd(self, rng):
        params = init_model_params(2, d_emb=3, hidden=4, seed=7)
        x = rng.normal(size=(5, 2))
        paths = [[0, 1, 2], [3], [4, 0, 1, 2]]
        probe = rng.normal(size=(3, 3))

        def loss_fn(p):
            pe, _ = _encode_paths_forward(p, paths, x)
            return float((pe * probe).sum())

        _, caches = _encode_paths_forward(params, paths, x)
        grads = zero_gradients(params)
        _encode_paths_backward(params, caches, probe, grads)
        assert gradient_check(params, loss_fn, grads, eps=1e-6) < 1e-5


class TestFuseProject:
    def test_zero_params_give_zero(self):
        params = zero_params(d_in=3, d_emb=4)
        assert not fuse_project(params, np.ones((5, 4)), np.ones((5, 4))).any()

    def test_identity_passthrough_halves(self):
        params = zero_params(d_in=3, d_emb=2)
        params.proj_w1[:] = np.hstack([np.eye(2), np.zeros((2, 2))])
        params.proj_w2[:] = np.eye(2)
        ne = np.arange(4.0).reshape(2, 2)
        pe = -ne
        out = fuse_project(params, ne, pe, activation="identity")
        assert np.array_equal(out, ne)

    def test_width_mismatch(self):
        params = zero_params(d_in=3, d_emb=4)
        with pytest.raises(ValueError, match="width"):
            fuse_project(params, np.ones((5, 4)), np.ones((5, 3)))


class TestGradientCheck:
    def test_linear_loss_is_exact(self):
        params = init_model_params(2, d_emb=3, hidden=4, seed=8)
        coeffs = {k: np.full_like(v, 0.37) for k, v in params.tensors().items()}

        def loss_fn(p):
            return sum(float((c * t).sum()) for c, t in zip(coeffs.values(), p.tensors().values()))

        assert gradient_check(params, loss_fn, coeffs, eps=1e-6) < 1e-9

    def test_large_eps_degrades(self, rng):
        params = init_model_params(2, d_emb=2, hidden=3, seed=9)
        target = {k: rng.normal(size=v.shape) for k, v in params.tensors().items()}

        def loss_fn(p):
            return sum(
                float(((t - target[k]) ** 4).sum()) for k, t in p.tensors().items()
            )

        grads = {k: 4 * (t - target[k]) ** 3 for k, t in params.tensors().items()}
        tight = gradient_check(params, loss_fn, grads, eps=1e-6)
        loose = gradient_check(params, loss_fn, grads, eps=1e-2)
        assert tight < 1e-6 and loose > tight


class TestCheckpoint:
    def test_roundtrip(self, tmp_path):
        params = init_model_params(3, d_emb=4, hidden=5, seed=10)
        config = {"d_in": 3, "d_emb": 4, "mlp_hidden": 5, "seed": 10}
        save_checkpoint(tmp_path / "ckpt.json", params, config)
        loaded, loaded_config = load_checkpoint(tmp_path / "ckpt.json")
        assert loaded_config == config
        for name, tensor in params.tensors().items():
            assert np.array_equal(loaded.tensors()[name], tensor)

    def test_shape_validation(self, tmp_path):
        params = init_model_params(3, d_emb=4, hidden=5, seed=11)
        save_checkpoint(tmp_path / "ckpt.json", params, {"d_in": 3, "d_emb": 8, "mlp_hidden": 5})
        with pytest.raises(ValueError, match="shape"):
            load_checkpoint(tmp_path / "ckpt.json")

    def test_version_check(self, tmp_path):
        (tmp_path / "ckpt.json").write_text('{"format_version": 99}')
        with pytest.raises(ValueError, match="version"):
            load_checkpoint(tmp_path / "ckpt.json")
