"""Router parameters, gating functions, Top-K selection and checkpoints."""
import numpy as np
import pytest

from semroute.errors import InvalidInputError, InvalidRoutingError, ShapeError
from semroute.model import (
    Model,
    base_logits,
    config_hash,
    expert_forward,
    expert_forward_one,
    route,
    select_topk,
    semantic_direction,
    student_gate,
    teacher_gate,
)
from semroute.numerics import seeded_rng, softmax


def make_model(d=6, n_experts=4, k=2, hidden=5, seed=0):
    return Model.init(d, n_experts, k, hidden, seed)


class TestBaseLogits:
    def test_zero_input(self):
        assert np.all(base_logits(np.zeros(6), np.ones((6, 4))) == 0.0)

    def test_row_extraction(self):
        w = np.array([[1.5, -2.0], [0.3, 0.7]])
        np.testing.assert_array_equal(base_logits(np.array([1.0, 0.0]), w),
                                      w[0])

    def test_shape_guard(self):
        with pytest.raises(ShapeError):
            base_logits(np.ones(3), np.ones((4, 2)))


class TestSemanticDirection:
    def test_identical_cues_give_zero(self, rng):
        c = rng.standard_normal(6)
        w = rng.standard_normal((6, 4))
        assert np.all(semantic_direction(c, c, w) == 0.0)

    def test_linearity(self, rng):
        pos, neg = rng.standard_normal(6), rng.standard_normal(6)
        w = rng.standard_normal((6, 4))
        np.testing.assert_allclose(semantic_direction(pos, neg, w),
                                   (pos - neg) @ w, atol=1e-15)


class TestGates:
    def test_zero_injection_matches_student(self, rng):
        z = rng.standard_normal(5)
        s = rng.standard_normal(5)
        _, g_t = teacher_gate(z, s, 0.0)
        np.testing.assert_array_equal(g_t, student_gate(z))

    def test_teacher_logits(self, rng):
        z, s = rng.standard_normal(5), rng.standard_normal(5)
        logits, gate = teacher_gate(z, s, 0.5)
        np.testing.assert_allclose(logits, z + 0.5 * s, atol=1e-15)
        np.testing.assert_allclose(gate, softmax(logits), atol=1e-15)

    def test_uniform_logits_uniform_gate(self):
        np.testing.assert_allclose(student_gate(np.full(4, 2.0)), 0.25, atol=1e-15)

    def test_length_mismatch(self, rng):
        with pytest.raises(ShapeError):
            teacher_gate(rng.standard_normal(5), rng.standard_normal(4), 0.5)

    def test_l1_perturbation_bound(self, rng):
        # ||g_teacher - g_student||_1 <= 2 * lambda_a * ||s||_inf
        for _ in range(100):
            z = rng.standard_normal(8) * 3
            s = rng.standard_normal(8)
            for lam in (0.1, 0.5, 1.0):
                _, g_t = teacher_gate(z, s, lam)
                gap = np.abs(g_t - student_gate(z)).sum()
                assert gap <= 2.0 * lam * np.abs(s).max() + 1e-12


class TestTopK:
    def test_k_equals_e(self):
        assert select_topk(np.array([0.4, 0.1, 0.3, 0.2]), 4) == (0, 1, 2, 3)

    def test_tie_takes_lower_index(self):
        assert select_topk(np.array([0.1, 0.4, 0.4, 0.1]), 2) == (1, 2)

    def test_sorted_ascending(self, rng):
        for _ in range(20):
            topk = select_topk(rng.random(6), 3)
            assert list(topk) == sorted(topk)

    def test_k_out_of_range(self):
        with pytest.raises(InvalidRoutingError):
            select_topk(np.array([0.5, 0.5]), 3)
        with pytest.raises(InvalidRoutingError):
            select_topk(np.array([0.5, 0.5]), 0)

    def test_pure_function(self, rng):
        g = rng.random(8)
        assert select_topk(g, 2) == select_topk(g.copy(), 2)


class TestExperts:
    def test_zero_weights_output_is_second_bias(self, rng):
        model = make_model()
        model.params["expert0_w1"][:] = 0.0
        model.params["expert0_w2"][:] = 0.0
        model.params["expert0_b2"][:] = rng.standard_normal(model.d)
        out = expert_forward_one(rng.standard_normal(model.d), model.params, 0)
        np.testing.assert_array_equal(out, model.params["expert0_b2"])

    def test_forward_matches_per_expert(self, rng):
        model = make_model()
        x = rng.standard_normal(model.d)
        outs = expert_forward(x, model, (1, 3))
        np.testing.assert_array_equal(outs[0], expert_forward_one(x, model.params, 1))
        np.testing.assert_array_equal(outs[1], expert_forward_one(x, model.params, 3))

    def test_index_guard(self, rng):
        model = make_model()
        with pytest.raises(InvalidRoutingError):
            expert_forward(rng.standard_normal(model.d), model, (0, 99))


class TestRoute:
    def test_topk_follows_mode_gate(self, rng):
        model = make_model()
        for _ in range(10):
            x = rng.standard_normal(model.d)
            s_a = rng.standard_normal(model.n_experts)
            teacher = route(x, model, s_a, 0.5, mode="teacher")
            student = route(x, model, None, 0.0, mode="student")
            assert teacher.topk == select_topk(teacher.teacher_gate, model.k)
            assert student.topk == select_topk(student.student_gate, model.k)

    def test_gate_normalization(self, rng):
        model = make_model()
        decision = route(rng.standard_normal(model.d), model,
                         rng.standard_normal(model.n_experts), 0.5, mode="teacher")
        assert abs(decision.teacher_gate.sum() - 1.0) <= 1e-12
        assert abs(decision.student_gate.sum() - 1.0) <= 1e-12


class TestCheckpoint:
    def test_round_trip_bit_exact(self, tmp_path):
        model = make_model(seed=3)
        path = tmp_path / "checkpoint.json"
        model.save(path, config_hash="abc123")
        loaded = Model.load(path)
        assert (loaded.d, loaded.n_experts, loaded.k, loaded.hidden) == \
            (model.d, model.n_experts, model.k, model.hidden)
        for name, value in model.params.items():
            np.testing.assert_array_equal(loaded.params[name], value)

    def test_copy_is_independent(self):
        model = make_model()
        clone = model.copy()
        clone.params["gating"][:] = 0.0
        assert not np.all(model.params["gating"] == 0.0)

    def test_init_determinism(self):
        a, b = make_model(seed=11), make_model(seed=11)
        for name in a.params:
            np.testing.assert_array_equal(a.params[name], b.params[name])

    def test_init_scale(self):
        model = Model.init(64, 8, 2, 64, seed=0)
        # weights drawn at scale 1/sqrt(d); std should sit near it
        assert np.std(model.params["gating"]) == pytest.approx(1 / 8, rel=0.15)
        assert np.all(model.params["expert0_b1"] == 0.0)

    def test_k_range_guard(self):
        with pytest.raises(InvalidInputError):
            Model.init(4, 2, 3, 4, seed=0)


class TestConfigHash:
    def test_stable_and_order_independent(self):
        a = config_hash({"x": 1, "y": [1, 2]})
        b = config_hash({"y": [1, 2], "x": 1})
        assert a == b
        assert len(a) == 16

    def test_sensitive_to_values(self):
        assert config_hash({"x": 1}) != config_hash({"x": 2})
