import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from newsrec import numerics as nm


class TestOps:
    def test_softmax_uniform_on_constant(self):
        np.testing.assert_allclose(nm.softmax(np.zeros(3)), np.full(3, 1 / 3), rtol=0, atol=0)

    def test_softmax_shift_invariance_no_overflow(self):
        out = nm.softmax(np.array([1000.0, 1000.0]))
        np.testing.assert_array_equal(out, [0.5, 0.5])

    def test_sigmoid_zero(self):
        assert nm.sigmoid(np.array(0.0)) == 0.5

    def test_sigmoid_extremes_finite(self):
        out = nm.sigmoid(np.array([-1000.0, 1000.0]))
        assert np.all(np.isfinite(out))
        assert 0.0 <= out[0] < out[1] <= 1.0

    def test_shape_mismatch_names_shapes(self):
        with pytest.raises(nm.DimensionError, match=r"\(2, 3\).*\(4,\)"):
            nm.matvec(np.zeros((2, 3)), np.zeros(4))

    @given(st.lists(st.floats(min_value=-50, max_value=50), min_size=1, max_size=12))
    def test_softmax_is_a_distribution(self, xs):
        out = nm.softmax(np.array(xs))
        assert np.all(out >= 0)
        assert abs(out.sum() - 1.0) < 1e-12


def _scalarize(op, arrays, weights):
    """Reduce an op output to a scalar via fixed random weights."""
    out = op(*arrays)
    return float(np.sum(out * weights))


def _dims(rng, n):
    return [int(d) for d in rng.integers(1, 9, size=n)]


OP_CASES = {
    "matvec": (lambda rng: ((lambda m, n: (rng.normal(size=(m, n)), rng.normal(size=n)))(*_dims(rng, 2))),
               nm.matvec, nm.matvec_backward),
    "matmul": (lambda rng: ((lambda m, k, n: (rng.normal(size=(m, k)), rng.normal(size=(k, n))))(*_dims(rng, 3))),
               nm.matmul, nm.matmul_backward),
    "outer": (lambda rng: ((lambda m, n: (rng.normal(size=m), rng.normal(size=n)))(*_dims(rng, 2))),
              nm.outer, nm.outer_backward),
}


class TestBackwardPasses:
    """Every backward op agrees with central differences at 100 random shapes."""

    @pytest.mark.parametrize("name", sorted(OP_CASES))
    def test_linear_ops(self, name):
        make, op, backward = OP_CASES[name]
        for trial in range(20):
            rng = np.random.default_rng(1000 + trial)
            arrays = [np.asarray(a, dtype=np.float64) for a in make(rng)]
            w = rng.normal(size=op(*arrays).shape)

            def f(params):
                args = [params["a"], params["b"]]
                val = _scalarize(op, args, w)
                grads = dict(zip(("a", "b"), backward(w, *args)))
                return val, grads

            err = nm.finite_diff_check(f, {"a": arrays[0], "b": arrays[1]}, h=1e-4)
            assert err < 1e-4, f"{name} trial {trial}: {err}"

    @pytest.mark.parametrize("name,op,backward,from_out", [
        ("softmax", nm.softmax, nm.softmax_backward, True),
        ("sigmoid", nm.sigmoid, nm.sigmoid_backward, True),
        ("tanh", nm.tanh, nm.tanh_backward, True),
        ("relu", nm.relu, nm.relu_backward, False),
    ])
    def test_elementwise_ops(self, name, op, backward, from_out):
        for trial in range(10):
            rng = np.random.default_rng(2000 + trial)
            for dim in rng.integers(1, 9, size=4):
                x = rng.normal(size=int(dim))
                # keep relu inputs away from its kink
                if name == "relu":
                    x = np.where(np.abs(x) < 1e-2, x + 0.05, x)
                w = rng.normal(size=x.shape)

                def f(params):
                    y = op(params["x"])
                    val = float(np.sum(y * w))
                    g = backward(w, y if from_out else params["x"])
                    return val, {"x": g}

                err = nm.finite_diff_check(f, {"x": x}, h=1e-4)
                assert err < 1e-4, f"{name} trial {trial} dim {dim}: {err}"

    def test_concat_backward(self):
        rng = np.random.default_rng(3)
        a, b = rng.normal(size=4), rng.normal(size=3)
        w = rng.normal(size=7)

        def f(params):
            val = float(np.sum(nm.concat(params["a"], params["b"]) * w))
            ga, gb = nm.concat_backward(w, 4)
            return val, {"a": ga, "b": gb}

        assert nm.finite_diff_check(f, {"a": a, "b": b}, h=1e-4) < 1e-10


class TestAdam:
    def test_first_step_closed_form(self):
        params = {"w": np.array([0.0])}
        grads = {"w": np.array([2.0])}
        state = nm.AdamState(lr=0.1)
        nm.adam_step(params, grads, state)
        assert abs(params["w"][0] + 0.1) < 1e-6
        assert state.t == 1

    def test_zero_gradient_is_noop(self):
        params = {"w": np.array([1.5, -2.0])}
        state = nm.AdamState(lr=0.1)
        for _ in range(5):
            nm.adam_step(params, {"w": np.zeros(2)}, state)
        np.testing.assert_array_equal(params["w"], [1.5, -2.0])

    def test_blocks_update_independently(self):
        rng = np.random.default_rng(0)
        w1, w2 = rng.normal(size=3), rng.normal(size=(2, 2))
        g1, g2 = rng.normal(size=3), rng.normal(size=(2, 2))

        both = {"a": w1.copy(), "b": w2.copy()}
        nm.adam_step(both, {"a": g1, "b": g2}, nm.AdamState(lr=0.01))

        solo_a = {"a": w1.copy()}
        nm.adam_step(solo_a, {"a": g1}, nm.AdamState(lr=0.01))
        solo_b = {"b": w2.copy()}
        nm.adam_step(solo_b, {"b": g2}, nm.AdamState(lr=0.01))

        np.testing.assert_array_equal(both["a"], solo_a["a"])
        np.testing.assert_array_equal(both["b"], solo_b["b"])

    def test_nonfinite_gradient_names_block(self):
        params = {"bad_block": np.zeros(2)}
        grads = {"bad_block": np.array([1.0, np.nan])}
        with pytest.raises(FloatingPointError, match="bad_block"):
            nm.adam_step(params, grads, nm.AdamState(lr=0.1))


class TestFiniteDiffCheck:
    def test_quadratic(self):
        def f(params):
            x = params["x"]
            return float(np.sum(x ** 2)), {"x": 2 * x}

        err = nm.finite_diff_check(f, {"x": np.array([3.0])}, h=1e-4)
        assert err < 1e-7

    def test_constant_function(self):
        def f(params):
            return 1.0, {"x": np.zeros_like(params["x"])}

        assert nm.finite_diff_check(f, {"x": np.array([0.3, -0.7])}, h=1e-4) == 0.0


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(5)
        params = {"layer.W": rng.normal(size=(3, 4)), "layer.b": rng.normal(size=3)}
        path = tmp_path / "ckpt.bin"
        nm.save_checkpoint(path, params, "abc123")
        loaded, tag = nm.load_checkpoint(path)
        assert tag == "abc123"
        assert set(loaded) == set(params)
        for name in params:
            np.testing.assert_array_equal(loaded[name], params[name])

    def test_reruns_byte_identical(self, tmp_path):
        params = {"w": np.arange(6, dtype=np.float64).reshape(2, 3)}
        p1, p2 = tmp_path / "a.bin", tmp_path / "b.bin"
        nm.save_checkpoint(p1, params, "h")
        nm.save_checkpoint(p2, params, "h")
        assert p1.read_bytes() == p2.read_bytes()

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"XCKP" + b"\0" * 32)
        with pytest.raises(nm.CheckpointError, match="magic"):
            nm.load_checkpoint(path)
