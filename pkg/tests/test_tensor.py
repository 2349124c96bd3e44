import numpy as np
import pytest

from activator_lab.tensor import GradError, ShapeError, Tensor, no_grad

from oracles import layernorm_direct, matmul_loops, softmax_direct


def t64(x):
    return Tensor(np.asarray(x, dtype=np.float64))


def param(x):
    return Tensor(np.asarray(x, dtype=np.float64), requires_grad=True)


class TestMatmul:
    def test_identity(self):
        out = t64([[1, 0], [0, 1]]) @ t64([[5, 6], [7, 8]])
        np.testing.assert_array_equal(out.data, [[5, 6], [7, 8]])

    def test_hand_computed(self):
        out = t64([[1, 2]]) @ t64([[3], [4]])
        np.testing.assert_array_equal(out.data, [[11]])

    def test_matches_triple_loop_oracle(self):
        rng = np.random.default_rng(0)
        a = rng.standard_normal((3, 4))
        b = rng.standard_normal((4, 2))
        out = (t64(a) @ t64(b)).data
        np.testing.assert_allclose(out, matmul_loops(a, b), atol=1e-12)

    def test_shape_mismatch_names_both_shapes(self):
        with pytest.raises(ShapeError, match=r"\(2, 3\).*\(2, 2\)"):
            t64(np.zeros((2, 3))) @ t64(np.zeros((2, 2)))

    def test_batched_broadcast(self):
        rng = np.random.default_rng(1)
        a = rng.standard_normal((2, 5, 3, 4))
        b = rng.standard_normal((4, 2))
        out = (t64(a) @ t64(b)).data
        assert out.shape == (2, 5, 3, 2)
        np.testing.assert_allclose(out[1, 3], matmul_loops(a[1, 3], b),
                                   atol=1e-12)


class TestSoftmax:
    def test_symmetry(self):
        out = t64([0.0, 0.0]).softmax()
        np.testing.assert_allclose(out.data, [0.5, 0.5])

    def test_large_inputs_no_overflow(self):
        out = t64([1000.0, 1000.0, 1000.0]).softmax()
        np.testing.assert_allclose(out.data, [1 / 3] * 3)

    def test_closed_form(self):
        out = t64([0.0, np.log(3.0)]).softmax()
        np.testing.assert_allclose(out.data, [0.25, 0.75])

    def test_rows_sum_to_one_random(self):
        rng = np.random.default_rng(2)
        for scale in (1.0, 1e3):
            x = rng.standard_normal((4, 7)) * scale
            out = t64(x).softmax(axis=-1).data
            assert (out >= 0).all()
            np.testing.assert_allclose(out.sum(axis=-1), 1.0, atol=1e-6)
            np.testing.assert_allclose(out[2], softmax_direct(x[2]),
                                       atol=1e-12)

    def test_axis_out_of_range(self):
        with pytest.raises(ShapeError):
            t64([1.0, 2.0]).softmax(axis=2)


class TestGelu:
    def test_zero(self):
        assert t64([0.0]).gelu().item() == 0.0

    def test_positive_asymptote(self):
        assert abs(t64([10.0]).gelu().item() - 10.0) < 1e-9

    def test_negative_asymptote(self):
        assert abs(t64([-10.0]).gelu().item()) < 1e-9


class TestLayernorm:
    def test_constant_vector_collapses_to_beta(self):
        g = t64(np.ones(4))
        b = t64(np.zeros(4))
        out = t64([5.0, 5.0, 5.0, 5.0]).layernorm(g, b)
        np.testing.assert_allclose(out.data, np.zeros(4), atol=1e-9)

    def test_already_standardized(self):
        g, b = t64(np.ones(2)), t64(np.zeros(2))
        out = t64([1.0, -1.0]).layernorm(g, b, eps=1e-12)
        np.testing.assert_allclose(out.data, [1.0, -1.0], rtol=1e-6)

    def test_output_statistics(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal(16) * 3 + 2
        g, b = t64(np.ones(16)), t64(np.zeros(16))
        out = t64(x).layernorm(g, b).data
        assert abs(out.mean()) < 1e-6
        assert abs(out.var() - 1.0) < 1e-4
        np.testing.assert_allclose(out, layernorm_direct(x, np.ones(16),
                                                         np.zeros(16)),
                                   atol=1e-9)

    def test_shift_invariance(self):
        rng = np.random.default_rng(4)
        x = rng.standard_normal((3, 8))
        g, b = t64(np.ones(8)), t64(np.zeros(8))
        base = t64(x).layernorm(g, b).data
        for c in (-5.0, 0.3, 1e2):
            shifted = t64(x + c).layernorm(g, b).data
            np.testing.assert_allclose(shifted, base, atol=1e-5)


class TestElementwise:
    def test_mul_absorbing(self):
        out = t64([1.0, 2.0, 3.0]) * t64([0.0, 0.0, 0.0])
        np.testing.assert_array_equal(out.data, [0.0, 0.0, 0.0])

    def test_transpose_involution(self):
        x = np.random.default_rng(5).standard_normal((3, 5))
        out = t64(x).transpose().transpose().data
        np.testing.assert_array_equal(out, x)

    def test_mean(self):
        assert t64([2.0, 4.0, 6.0]).mean(axis=0).item() == 4.0

    def test_reshape_round_trip(self):
        x = np.random.default_rng(6).standard_normal((2, 3, 4))
        out = t64(x).reshape(6, 4).reshape(2, 3, 4).data
        np.testing.assert_array_equal(out, x)

    def test_incompatible_broadcast(self):
        with pytest.raises(ShapeError):
            t64(np.zeros((2, 3))) + t64(np.zeros((2, 4)))

    def test_broadcast_add(self):
        x = t64(np.ones((2, 3, 4)))
        b = t64(np.arange(4.0))
        out = (x + b).data
        np.testing.assert_array_equal(out[1, 2], 1.0 + np.arange(4.0))


class TestBackward:
    def test_sum_grad_is_ones(self):
        x = param(np.random.default_rng(7).standard_normal((3, 4)))
        x.sum().backward()
        np.testing.assert_array_equal(x.grad, np.ones((3, 4)))

    def test_square_grad_is_2x(self):
        data = np.random.default_rng(8).standard_normal(5)
        x = param(data)
        (x * x).sum().backward()
        np.testing.assert_allclose(x.grad, 2 * data, atol=1e-12)

    def test_non_scalar_loss_rejected(self):
        x = param(np.zeros(3))
        with pytest.raises(GradError):
            (x * x).backward()

    def test_composite_matches_finite_differences(self):
        rng = np.random.default_rng(9)
        shapes_checked = 0
        for _ in range(10):
            t = int(rng.integers(2, 5))
            d = int(rng.integers(2, 6))
            x = param(rng.standard_normal((t, d)))
            w = param(rng.standard_normal((d, d)))
            g = param(np.ones(d))
            b = param(np.zeros(d))

            def loss_fn():
                y = (x @ w).gelu().layernorm(g, b).softmax(axis=-1)
                return (y * y).sum() + (x * x).mean()

            loss = loss_fn()
            loss.backward()
            for p in (x, w, g, b):
                ad = p.grad.reshape(-1)
                flat = p.data.reshape(-1)
                for i in range(flat.size):
                    h = 1e-5 * max(1.0, abs(flat[i]))
                    old = flat[i]
                    with no_grad():
                        flat[i] = old + h
                        up = loss_fn().item()
                        flat[i] = old - h
                        down = loss_fn().item()
                        flat[i] = old
                    fd = (up - down) / (2 * h)
                    assert abs(ad[i] - fd) < 1e-4 * max(1.0, abs(ad[i]),
                                                        abs(fd))
            shapes_checked += 1
        assert shapes_checked == 10

    def test_determinism_bit_identical(self):
        def run():
            rng = np.random.default_rng(11)
            x = param(rng.standard_normal((4, 4)))
            w = param(rng.standard_normal((4, 4)))
            loss = ((x @ w).gelu().softmax(axis=-1) * x).sum()
            loss.backward()
            return x.grad.copy(), w.grad.copy()

        gx1, gw1 = run()
        gx2, gw2 = run()
        assert (gx1 == gx2).all() and (gw1 == gw2).all()

    def test_unreached_parameter_has_no_gradient(self):
        x = param(np.ones(3))
        y = param(np.ones(3))
        x.sum().backward()
        assert y.grad is None

    def test_grad_accumulates_over_reuse(self):
        x = param(np.array([2.0]))
        (x * x + x * 3.0).sum().backward()
        np.testing.assert_allclose(x.grad, [7.0])


def test_verify_mode_catches_non_finite_outputs():
    from activator_lab.tensor import set_verify
    set_verify(True)
    try:
        with np.errstate(over="ignore"), pytest.raises(FloatingPointError):
            t64([1e308]) * t64([1e308])
        # finite results pass through untouched
        assert (t64([2.0]) * t64([3.0])).item() == 6.0
    finally:
        set_verify(False)


def test_no_grad_suppresses_graph():
    x = param(np.ones(3))
    with no_grad():
        y = (x * x).sum()
    assert y._backward is None and y._parents == ()
