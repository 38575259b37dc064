import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from windowmt.numerics import (LstmCellParams, check_finite, clip_global_norm,
                               cross_entropy, global_norm, grad_check,
                               log_softmax_rows, lstm_step, lstm_step_backward,
                               matmul, momentum_step, sgd_step, softmax_rows)


def naive_matmul(a, b):
    m, k = a.shape
    k2, n = b.shape
    out = np.zeros((m, n))
    for i in range(m):
        for j in range(n):
            s = 0.0
            for kk in range(k2):
                s += a[i, kk] * b[kk, j]
            out[i, j] = s
    return out


class TestMatmul:
    def test_identity(self):
        rng = np.random.default_rng(0)
        a = rng.normal(size=(4, 4))
        np.testing.assert_allclose(matmul(a, np.eye(4)), a)

    def test_hand_example(self):
        a = np.array([[1.0, 2.0], [3.0, 4.0]])
        b = np.array([[5.0, 6.0], [7.0, 8.0]])
        np.testing.assert_array_equal(matmul(a, b), [[19, 22], [43, 50]])

    def test_against_triple_loop_oracle(self):
        rng = np.random.default_rng(1)
        a = rng.normal(size=(7, 5))
        b = rng.normal(size=(5, 3))
        np.testing.assert_allclose(matmul(a, b), naive_matmul(a, b), atol=1e-12)

    def test_identity_association(self):
        rng = np.random.default_rng(2)
        a = rng.normal(size=(3, 4))
        b = rng.normal(size=(4, 5))
        np.testing.assert_allclose(matmul(matmul(a, np.eye(4)), b),
                                   matmul(a, b), atol=1e-6)

    def test_shape_errors(self):
        with pytest.raises(ValueError):
            matmul(np.zeros((2, 3)), np.zeros((4, 2)))
        with pytest.raises(ValueError):
            matmul(np.zeros(3), np.zeros((3, 2)))


class TestSoftmax:
    def test_symmetric_row(self):
        np.testing.assert_allclose(softmax_rows(np.array([[0.0, 0.0]])), [[0.5, 0.5]])

    def test_no_overflow(self):
        out = softmax_rows(np.array([[1000.0, 0.0]]))
        assert np.all(np.isfinite(out))
        np.testing.assert_allclose(out, [[1.0, 0.0]], atol=1e-12)

    @settings(max_examples=50)
    @given(st.lists(st.lists(st.floats(-50, 50), min_size=2, max_size=6),
                    min_size=1, max_size=5).filter(
                        lambda rows: len({len(r) for r in rows}) == 1))
    def test_rows_sum_to_one(self, rows):
        out = softmax_rows(np.array(rows))
        assert np.all(out >= 0)
        np.testing.assert_allclose(out.sum(axis=-1), 1.0, atol=1e-6)

    @settings(max_examples=50)
    @given(st.lists(st.floats(-30, 30), min_size=2, max_size=8),
           st.floats(-100, 100))
    def test_shift_invariance(self, row, c):
        x = np.array([row])
        np.testing.assert_allclose(softmax_rows(x + c), softmax_rows(x), atol=1e-6)

    def test_log_softmax_consistent(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(4, 7))
        np.testing.assert_allclose(np.exp(log_softmax_rows(x)), softmax_rows(x),
                                   atol=1e-12)


class TestCrossEntropy:
    def test_certain_prediction_zero_loss(self):
        logits = np.zeros((1, 4))
        logits[0, 2] = 50.0
        loss, _ = cross_entropy(logits, [2])
        assert loss == pytest.approx(0.0, abs=1e-12)

    def test_uniform_is_log_vocab(self):
        loss, _ = cross_entropy(np.zeros((3, 94)), [0, 1, 93])
        assert loss == pytest.approx(np.log(94), abs=1e-9)

    def test_out_of_range_target(self):
        with pytest.raises(IndexError):
            cross_entropy(np.zeros((1, 4)), [4])

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(4)
        logits = rng.normal(size=(3, 6))
        targets = [1, 0, 5]

        def f(p):
            loss, d = cross_entropy(p["logits"], targets)
            return loss, {"logits": d}

        err = grad_check(f, {"logits": logits.copy()})
        assert err <= 1e-4


class TestLstmStep:
    def test_zero_parameter_closed_form(self):
        hd = 3
        p = LstmCellParams(np.zeros((4 * hd, 2 + hd)), np.zeros(4 * hd))
        c_prev = np.array([0.2, -0.4, 1.0])
        h, c, _ = lstm_step(p, np.zeros(2), np.zeros(hd), c_prev)
        np.testing.assert_allclose(c, 0.5 * c_prev, atol=1e-12)
        np.testing.assert_allclose(h, 0.5 * np.tanh(0.5 * c_prev), atol=1e-12)

    def test_output_shapes(self):
        rng = np.random.default_rng(5)
        p = LstmCellParams.init(4, 6, rng, dtype=np.float64)
        h, c, _ = lstm_step(p, np.ones(4), np.zeros(6), np.zeros(6))
        assert h.shape == (6,) and c.shape == (6,)
        hb, cb, _ = lstm_step(p, np.ones((3, 4)), np.zeros((3, 6)), np.zeros((3, 6)))
        assert hb.shape == (3, 6) and cb.shape == (3, 6)

    def test_shape_mismatch(self):
        rng = np.random.default_rng(6)
        p = LstmCellParams.init(4, 6, rng)
        with pytest.raises(ValueError):
            lstm_step(p, np.ones(5), np.zeros(6), np.zeros(6))

    def test_zero_upstream_gradient(self):
        rng = np.random.default_rng(7)
        p = LstmCellParams.init(3, 4, rng, dtype=np.float64)
        _, _, cache = lstm_step(p, rng.normal(size=3), np.zeros(4), np.zeros(4))
        dx, dh, dc, grads = lstm_step_backward(p, cache, np.zeros(4), np.zeros(4))
        assert not np.any(dx) and not np.any(dh) and not np.any(dc)
        assert not np.any(grads["W"]) and not np.any(grads["b"])

    @pytest.mark.parametrize("seed", range(50))
    def test_backward_matches_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        input_dim = int(rng.integers(1, 8))
        hidden = int(rng.integers(1, 8))
        x = rng.normal(size=input_dim)
        h0 = rng.normal(size=hidden)
        c0 = rng.normal(size=hidden)
        wh = rng.normal(size=hidden)
        wc = rng.normal(size=hidden)

        def f(params):
            p = LstmCellParams(params["W"], params["b"])
            h, c, cache = lstm_step(p, params["x"], params["h0"], params["c0"])
            loss = float(wh @ h + wc @ c)
            dx, dh0, dc0, g = lstm_step_backward(p, cache, wh, wc)
            return loss, {"W": g["W"], "b": g["b"], "x": dx, "h0": dh0, "c0": dc0}

        base = LstmCellParams.init(input_dim, hidden, rng, dtype=np.float64)
        err = grad_check(f, {"W": base.W, "b": base.b, "x": x, "h0": h0, "c0": c0})
        assert err <= 1e-4

    def test_three_step_chain_matches_finite_differences(self):
        rng = np.random.default_rng(11)
        p0 = LstmCellParams.init(2, 3, rng, dtype=np.float64)
        xs = rng.normal(size=(3, 2))
        w = rng.normal(size=3)

        def f(params):
            p = LstmCellParams(params["W"], params["b"])
            h = np.zeros(3)
            c = np.zeros(3)
            caches = []
            for t in range(3):
                h, c, cache = lstm_step(p, xs[t], h, c)
                caches.append(cache)
            loss = float(w @ h)
            dh, dc = w.copy(), np.zeros(3)
            dW = np.zeros_like(p.W)
            db = np.zeros_like(p.b)
            for cache in reversed(caches):
                _, dh, dc, g = lstm_step_backward(p, cache, dh, dc)
                dW += g["W"]
                db += g["b"]
            return loss, {"W": dW, "b": db}

        assert grad_check(f, {"W": p0.W, "b": p0.b}) <= 1e-4


class TestClipAndStep:
    def test_below_threshold_unchanged(self):
        g = {"a": np.array([3.0])}
        assert clip_global_norm(g, 5.0)["a"] is g["a"]

    def test_analytic_scaling(self):
        clipped = clip_global_norm({"g": np.array([3.0, 4.0])}, 2.5)
        np.testing.assert_allclose(clipped["g"], [1.5, 2.0])

    @settings(max_examples=50)
    @given(st.lists(st.floats(-10, 10), min_size=1, max_size=8),
           st.floats(0.1, 20))
    def test_clip_norm_and_direction(self, vals, max_norm):
        g = {"g": np.array(vals)}
        before = global_norm(g)
        clipped = clip_global_norm(g, max_norm)
        after = global_norm(clipped)
        assert after <= max(before, max_norm) + 1e-9
        assert after == pytest.approx(min(before, max_norm), abs=1e-6)
        if before > max_norm and before > 0:
            cos = float(g["g"] @ clipped["g"]) / (before * after)
            assert cos == pytest.approx(1.0, abs=1e-6)

    def test_sgd_zero_lr(self):
        p = {"w": np.array([1.0, 2.0])}
        sgd_step(p, {"w": np.array([5.0, 5.0])}, 0.0)
        np.testing.assert_array_equal(p["w"], [1.0, 2.0])

    def test_sgd_arithmetic(self):
        p = {"w": np.array([1.0])}
        sgd_step(p, {"w": np.array([0.5])}, 0.1)
        assert p["w"][0] == pytest.approx(0.95)

    def test_sgd_linearity(self):
        g1 = {"w": np.array([0.3])}
        g2 = {"w": np.array([0.7])}
        p_two = {"w": np.array([1.0])}
        sgd_step(p_two, g1, 0.1)
        sgd_step(p_two, g2, 0.1)
        p_one = {"w": np.array([1.0])}
        sgd_step(p_one, {"w": g1["w"] + g2["w"]}, 0.1)
        np.testing.assert_allclose(p_two["w"], p_one["w"], atol=1e-12)

    def test_sgd_missing_gradient(self):
        with pytest.raises(KeyError):
            sgd_step({"w": np.zeros(2)}, {}, 0.1)

    def test_momentum_accumulates(self):
        p = {"w": np.array([0.0])}
        v = {}
        momentum_step(p, {"w": np.array([1.0])}, v, lr=1.0, momentum=0.5)
        assert p["w"][0] == pytest.approx(-1.0)
        momentum_step(p, {"w": np.array([1.0])}, v, lr=1.0, momentum=0.5)
        # velocity 0.5*1 + 1 = 1.5
        assert p["w"][0] == pytest.approx(-2.5)

    def test_momentum_zero_matches_sgd(self):
        rng = np.random.default_rng(8)
        w = rng.normal(size=5)
        g = rng.normal(size=5)
        a = {"w": w.copy()}
        b = {"w": w.copy()}
        momentum_step(a, {"w": g}, {}, lr=0.2, momentum=0.0)
        sgd_step(b, {"w": g.copy()}, 0.2)
        np.testing.assert_allclose(a["w"], b["w"], atol=1e-12)


class TestGradCheck:
    def test_quadratic(self):
        def f(p):
            x = p["x"]
            return float((x * x).sum()), {"x": 2.0 * x}

        assert grad_check(f, {"x": np.array([3.0])}) <= 1e-8

    def test_constant_function(self):
        def f(p):
            return 1.0, {"x": np.zeros_like(p["x"])}

        assert grad_check(f, {"x": np.array([0.5, -0.5])}) == 0.0

    def test_rejects_float32(self):
        def f(p):
            return 0.0, {"x": np.zeros_like(p["x"])}

        with pytest.raises(ValueError):
            grad_check(f, {"x": np.zeros(2, dtype=np.float32)})


def test_check_finite():
    check_finite(np.ones(3))
    with pytest.raises(ValueError):
        check_finite(np.array([1.0, np.nan]))


def test_determinism():
    rng = np.random.default_rng(9)
    p = LstmCellParams.init(5, 7, rng, dtype=np.float64)
    x = rng.normal(size=5)
    h1, c1, _ = lstm_step(p, x, np.zeros(7), np.zeros(7))
    h2, c2, _ = lstm_step(p, x, np.zeros(7), np.zeros(7))
    assert np.array_equal(h1, h2) and np.array_equal(c1, c2)
