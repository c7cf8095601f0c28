import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import (LinearPooledModel, ConstantModel, exact_shapley,
                      indicator_embeddings, masked_prob, planted_token_model,
                      finite_diff_embedding_grad, random_tiny_model)
from explaudit import attribution as attrib
from explaudit import textmodel as tm
from explaudit.errors import ConfigError


class TestConfig:
    def test_defaults_valid(self):
        attrib.AttributionConfig()

    @pytest.mark.parametrize("kwargs", [
        {"ig_steps": 0}, {"lime_samples": 0}, {"shap_samples": 0},
        {"lime_kernel_width": -1.0},
    ])
    def test_invalid_rejected(self, kwargs):
        with pytest.raises(ConfigError):
            attrib.AttributionConfig(**kwargs)


class _DeadInputModel:
    """Duck model whose output depends only on token position 1."""

    def pooled_forward(self, pooled):
        pooled = np.asarray(pooled, dtype=float)
        p1 = np.clip(0.5 + 0.1 * pooled[..., 1], 0.01, 0.99)
        probs = np.stack([1 - p1, p1], axis=-1)
        return probs, np.log(probs)

    def embedding_grad(self, X, target):
        g = np.zeros_like(X)
        g[1, :] = 0.1 / X.shape[0] if target == 1 else -0.1 / X.shape[0]
        return g


class TestGradSaliency:
    def test_zero_output_weights(self, rng):
        model = random_tiny_model(rng)
        model.w2 = np.zeros_like(model.w2)
        X = rng.uniform(-1, 1, (4, 3))
        a = attrib.grad_saliency(model, X, 1)
        assert np.all(a.scores == 0)

    def test_dead_input_positions(self):
        X = np.eye(3)
        a = attrib.grad_saliency(_DeadInputModel(), X, 1)
        assert a.scores[0] == 0 and a.scores[2] == 0
        assert a.scores[1] > 0

    def test_matches_finite_difference_norms(self, rng):
        model = random_tiny_model(rng)
        X = rng.uniform(-1, 1, (3, 3))
        fd = finite_diff_embedding_grad(model, X, 1)
        a = attrib.grad_saliency(model, X, 1)
        assert np.allclose(a.scores, np.linalg.norm(fd, axis=1),
                           rtol=1e-4, atol=1e-7)

    def test_scores_nonnegative(self, rng):
        model = random_tiny_model(rng)
        a = attrib.grad_saliency(model, rng.uniform(-1, 1, (5, 3)), 0)
        assert np.all(a.scores >= 0)


class TestGradXInput:
    def test_zero_embedding_row(self):
        model = LinearPooledModel([0.2, 0.1], base=0.4)
        X = np.array([[0.0, 0.0], [1.0, 2.0]])
        a = attrib.grad_x_input(model, X, 1)
        assert a.scores[0] == 0.0

    def test_linear_model_closed_form_d1(self):
        # p1 = 0.5 + 0.2 * mean(x); grad row = 0.2/n, s_i = 0.2 * x_i / n
        model = LinearPooledModel([0.2])
        X = np.array([[1.0], [-0.5], [0.25]])
        a = attrib.grad_x_input(model, X, 1)
        assert a.scores == pytest.approx(0.2 * X[:, 0] / 3, abs=1e-12)

    def test_product_against_finite_differences(self, rng):
        model = random_tiny_model(rng)
        X = rng.uniform(-1, 1, (4, 3))
        fd = finite_diff_embedding_grad(model, X, 0)
        a = attrib.grad_x_input(model, X, 0)
        assert np.allclose(a.scores, (fd * X).sum(axis=1),
                           rtol=1e-4, atol=1e-7)


class TestIntegratedGradients:
    def test_baseline_input_is_zero(self, rng):
        model = random_tiny_model(rng)
        a = attrib.integrated_gradients(model, np.zeros((3, 3)), 1)
        assert np.all(a.scores == 0)

    def test_completeness(self, rng):
        cfg = attrib.AttributionConfig(ig_steps=256)
        for _ in range(5):
            model = random_tiny_model(rng)
            X = rng.uniform(-1, 1, (4, 3))
            a = attrib.integrated_gradients(model, X, 1, cfg)
            f_x = tm.forward(model, X).probs[1]
            f_base = tm.forward(model, np.zeros_like(X)).probs[1]
            assert a.scores.sum() == pytest.approx(f_x - f_base, abs=1e-2)

    def test_linear_model_exact_path_integral(self):
        # Constant gradient => IG is exact for any step count.
        w = np.array([0.3, -0.1])
        model = LinearPooledModel(w, base=0.5)
        X = np.array([[0.5, 1.0], [-0.25, 0.5]])
        cfg = attrib.AttributionConfig(ig_steps=1)
        a = attrib.integrated_gradients(model, X, 1, cfg)
        assert a.scores == pytest.approx(X @ w / 2, abs=1e-12)


class TestIGxInput:
    def test_zero_row_and_baseline(self, rng):
        model = random_tiny_model(rng)
        X = rng.uniform(-1, 1, (3, 3))
        X[0] = 0.0
        a = attrib.ig_x_input(model, X, 1)
        assert a.scores[0] == 0.0
        b = attrib.ig_x_input(model, np.zeros((2, 3)), 1)
        assert np.all(b.scores == 0)

    def test_d1_equals_ig_times_input(self, rng):
        model = random_tiny_model(rng, d=1, h=3)
        X = rng.uniform(-1, 1, (4, 1))
        cfg = attrib.AttributionConfig(ig_steps=64)
        ig = attrib.integrated_gradients(model, X, 1, cfg)
        igxi = attrib.ig_x_input(model, X, 1, cfg)
        assert igxi.scores == pytest.approx(ig.scores * X[:, 0], abs=1e-12)


class TestLime:
    def test_constant_model_zero_coefficients(self):
        X = indicator_embeddings(4)
        a = attrib.lime(ConstantModel(0.7), X, 1)
        assert np.all(np.abs(a.scores) < 1e-6)

    def test_planted_single_feature(self):
        model = planted_token_model([0.0, 0.0, 0.3, 0.0])
        X = indicator_embeddings(4)
        a = attrib.lime(model, X, 1)
        assert a.scores[2] == pytest.approx(0.3, abs=0.05)
        for i in (0, 1, 3):
            assert abs(a.scores[i]) < 0.05

    def test_deterministic_under_seed(self, rng):
        model = random_tiny_model(rng)
        X = rng.uniform(-1, 1, (5, 3))
        cfg = attrib.AttributionConfig(seed=11)
        a = attrib.lime(model, X, 1, cfg)
        b = attrib.lime(model, X, 1, cfg)
        assert np.array_equal(a.scores, b.scores)

    def test_seed_changes_samples(self, rng):
        model = random_tiny_model(rng)
        X = rng.uniform(-1, 1, (5, 3))
        a = attrib.lime(model, X, 1, attrib.AttributionConfig(seed=1))
        b = attrib.lime(model, X, 1, attrib.AttributionConfig(seed=2))
        assert not np.array_equal(a.scores, b.scores)


class TestKernelShap:
    def test_local_accuracy(self, rng):
        model = random_tiny_model(rng)
        X = rng.uniform(-1, 1, (6, 3))
        a = attrib.kernel_shap(model, X, 1)
        delta = masked_prob(model, X, range(6)) - masked_prob(model, X, [])
        assert a.scores.sum() == pytest.approx(delta, abs=1e-6)

    def test_local_accuracy_sampled_branch(self, rng):
        model = random_tiny_model(rng)
        X = rng.uniform(-1, 1, (15, 3))
        cfg = attrib.AttributionConfig(shap_samples=256)
        a = attrib.kernel_shap(model, X, 1, cfg)
        delta = masked_prob(model, X, range(15)) - masked_prob(model, X, [])
        assert a.scores.sum() == pytest.approx(delta, abs=1e-6)

    def test_additive_planted_model(self):
        c = [0.1, -0.05, 0.2, 0.0, 0.08]
        model = planted_token_model(c)
        X = indicator_embeddings(5)
        a = attrib.kernel_shap(model, X, 1)
        assert np.allclose(a.scores, c, atol=0.02)

    def test_matches_exact_shapley_enumeration(self, rng):
        model = random_tiny_model(rng)
        X = rng.uniform(-1, 1, (5, 3))
        a = attrib.kernel_shap(model, X, 1)
        oracle = exact_shapley(lambda s: masked_prob(model, X, s), 5)
        assert np.allclose(a.scores, oracle, atol=0.01)

    def test_single_token(self):
        model = planted_token_model([0.25])
        X = indicator_embeddings(1)
        a = attrib.kernel_shap(model, X, 1)
        assert a.scores == pytest.approx([0.25], abs=1e-9)

    def test_deterministic_sampled(self, rng):
        model = random_tiny_model(rng)
        X = rng.uniform(-1, 1, (14, 3))
        cfg = attrib.AttributionConfig(shap_samples=200, seed=5)
        a = attrib.kernel_shap(model, X, 1, cfg)
        b = attrib.kernel_shap(model, X, 1, cfg)
        assert np.array_equal(a.scores, b.scores)


class TestNormalize:
    def test_example(self):
        a = attrib.Attribution("GXI", ["a", "b", "c"],
                               np.array([2.0, -1.0, 0.0]), 1)
        assert attrib.normalize_scores(a) == pytest.approx([1.0, 0.5, 0.0])

    def test_all_zero(self):
        a = attrib.Attribution("GXI", ["a"], np.array([0.0, 0.0]), 1)
        assert np.all(attrib.normalize_scores(a) == 0)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-10, 10), min_size=1, max_size=10))
    def test_max_is_one_unless_all_zero(self, values):
        a = attrib.Attribution("IG", ["t"] * len(values),
                               np.array(values), 0)
        norm = attrib.normalize_scores(a)
        if np.any(np.array(values) != 0):
            assert norm.max() == pytest.approx(1.0)
        assert np.all((norm >= 0) & (norm <= 1))


class TestDispatchAndIO:
    def test_unknown_method(self, rng):
        model = random_tiny_model(rng)
        with pytest.raises(ConfigError, match="unknown attribution method"):
            attrib.explain("DEEPLIFT", model, np.ones((2, 3)), 1)

    def test_dispatch_covers_all_methods(self, rng):
        model = random_tiny_model(rng)
        v = tm.build_vocab(["a b c"])
        seq = tm.tokenize(v, "a b c")
        for method in attrib.METHODS:
            a = attrib.explain(method, model, seq, 1)
            assert a.method == method
            assert len(a.scores) == seq.n
            assert a.tokens == seq.tokens

    def test_jsonl_roundtrip(self, tmp_path, rng):
        model = random_tiny_model(rng)
        v = tm.build_vocab(["she runs fast"])
        seq = tm.tokenize(v, "she runs fast")
        rows = [("p1", "FEMALE", attrib.explain("GRAD", model, seq, 1)),
                ("p1", "MALE", attrib.explain("SHAP", model, seq, 0))]
        path = tmp_path / "attr.jsonl"
        attrib.write_jsonl(rows, path)
        back = attrib.read_jsonl(path)
        assert len(back) == 2
        for (pid, sub, a), (pid2, sub2, b) in zip(rows, back):
            assert (pid, sub) == (pid2, sub2)
            assert a.method == b.method and a.tokens == b.tokens
            assert a.target_class == b.target_class
            assert np.allclose(a.scores, b.scores, atol=1e-12)
