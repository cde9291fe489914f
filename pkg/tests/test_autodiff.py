"""Tape mechanics, per-primitive gradients against finite differences,
and the optimizer."""

import numpy as np
import pytest

from specnet import autodiff as ad
from specnet.errors import ContractViolation, NumericalError

FD_STEP = 1e-6


def fd_check(build, arrays, tol=1e-6):
    """Compare tape gradients of a scalar-valued builder against central
    differences on every coordinate of every input array.

    build(leaves) receives one leaf Tensor per input array and returns a
    scalar Tensor on the same tape.
    """
    arrays = [np.asarray(a, dtype=np.float64) for a in arrays]

    def value(mod):
        tape = ad.Tape()
        return float(build([tape.leaf(a) for a in mod]).data)

    tape = ad.Tape()
    leaves = [tape.leaf(a) for a in arrays]
    grads = tape.backward(build(leaves))
    for which, arr in enumerate(arrays):
        g = grads.get(leaves[which].node_id)
        assert g is not None, f"input {which} received no gradient"
        assert g.shape == arr.shape
        for idx in range(arr.size):
            plus = [a.copy() for a in arrays]
            minus = [a.copy() for a in arrays]
            plus[which].flat[idx] += FD_STEP
            minus[which].flat[idx] -= FD_STEP
            fd = (value(plus) - value(minus)) / (2.0 * FD_STEP)
            got = g.flat[idx]
            err = abs(got - fd) / max(abs(got), abs(fd), 1e-3)
            assert err <= tol, f"input {which} coord {idx}: {got} vs {fd}"


def rng_for(seed):
    return np.random.Generator(np.random.PCG64(seed))


class TestPrimitiveGradients:
    def test_matmul_2d_2d(self):
        r = rng_for(1)
        fd_check(lambda l: ad.row_sum(ad.row_sum(ad.matmul(l[0], l[1]))),
                 [r.standard_normal((3, 4)), r.standard_normal((4, 2))])

    def test_matmul_1d_2d(self):
        r = rng_for(2)
        fd_check(lambda l: ad.row_sum(ad.matmul(l[0], l[1])),
                 [r.standard_normal(3), r.standard_normal((3, 5))])

    def test_matmul_2d_1d(self):
        r = rng_for(3)
        fd_check(lambda l: ad.row_sum(ad.matmul(l[0], l[1])),
                 [r.standard_normal((4, 3)), r.standard_normal(3)])

    def test_add_equal_and_bias(self):
        r = rng_for(4)
        fd_check(lambda l: ad.row_sum(ad.row_sum(ad.add(l[0], l[1]))),
                 [r.standard_normal((2, 3)), r.standard_normal((2, 3))])
        fd_check(lambda l: ad.row_sum(ad.row_sum(ad.add(l[0], l[1]))),
                 [r.standard_normal((4, 3)), r.standard_normal(3)])

    def test_mul_neg_scale(self):
        r = rng_for(5)
        fd_check(lambda l: ad.row_sum(ad.mul(l[0], l[1])),
                 [r.standard_normal(6), r.standard_normal(6)])
        fd_check(lambda l: ad.row_sum(ad.neg(l[0])), [r.standard_normal(5)])
        fd_check(lambda l: ad.row_sum(ad.scale(l[0], -2.5)),
                 [r.standard_normal(5)])

    def test_relu(self):
        # keep coordinates away from the kink
        x = np.array([-1.2, -0.4, 0.3, 1.7, -2.0, 0.9])
        fd_check(lambda l: ad.row_sum(ad.relu(l[0])), [x])

    def test_log_exp(self):
        r = rng_for(6)
        fd_check(lambda l: ad.row_sum(ad.log(l[0])), [r.uniform(0.5, 3.0, 5)])
        fd_check(lambda l: ad.row_sum(ad.exp(l[0])), [r.standard_normal(5)])

    def test_dot(self):
        r = rng_for(7)
        fd_check(lambda l: ad.dot(l[0], l[1]),
                 [r.standard_normal(8), r.standard_normal(8)])

    def test_row_sum_and_mean(self):
        r = rng_for(8)
        w = r.standard_normal(3)
        fd_check(lambda l: ad.dot(ad.row_sum(l[0]), l[1]),
                 [r.standard_normal((4, 3)), w])
        fd_check(lambda l: ad.dot(ad.row_mean(l[0]), l[1]),
                 [r.standard_normal((4, 3)), w])
        fd_check(lambda l: ad.row_mean(l[0]), [r.standard_normal(6)])

    def test_l2_normalize(self):
        r = rng_for(9)
        w = r.standard_normal(5)
        fd_check(lambda l: ad.dot(ad.l2_normalize(l[0]), l[1]),
                 [r.standard_normal(5) + 2.0, w])

    def test_concat_stack_transpose_reshape(self):
        r = rng_for(10)
        fd_check(lambda l: ad.row_sum(ad.concat([l[0], l[1]])),
                 [r.standard_normal(3), r.standard_normal(4)])
        fd_check(
            lambda l: ad.row_sum(ad.row_sum(ad.stack_rows([l[0], l[1], l[2]]))),
            [r.standard_normal(3)] * 3)
        fd_check(lambda l: ad.row_sum(ad.row_sum(ad.transpose(l[0]))),
                 [r.standard_normal((2, 5))])
        fd_check(lambda l: ad.row_sum(ad.reshape(l[0], (6,))),
                 [r.standard_normal((2, 3))])

    def test_logsumexp_1d_2d(self):
        r = rng_for(11)
        fd_check(lambda l: ad.logsumexp(l[0]), [r.standard_normal(7)])
        fd_check(lambda l: ad.row_sum(ad.logsumexp(l[0])),
                 [r.standard_normal((3, 4))])

    def test_dropout_with_fixed_mask(self):
        r = rng_for(12)
        x = r.standard_normal((4, 3))
        mask = (r.random((4, 3)) >= 0.3).astype(np.float64)
        fd_check(lambda l: ad.row_sum(ad.row_sum(ad.dropout(l[0], mask, 0.3))),
                 [x])

    def test_softmax_cross_entropy(self):
        r = rng_for(13)
        labels = np.array([0, 2, 1, 2])
        fd_check(lambda l: ad.softmax_cross_entropy(l[0], labels),
                 [r.standard_normal((4, 3))])


class TestValuesAndSemantics:
    def test_logsumexp_matches_naive(self):
        r = rng_for(20)
        x = r.standard_normal(9)
        got = float(ad.logsumexp(ad.Tensor(x)).data)
        assert got == pytest.approx(np.log(np.sum(np.exp(x))), abs=1e-12)

    def test_logsumexp_stable_for_large_inputs(self):
        x = np.array([1000.0, 1000.0])
        got = float(ad.logsumexp(ad.Tensor(x)).data)
        assert got == pytest.approx(1000.0 + np.log(2.0))

    def test_softmax_cross_entropy_value(self):
        logits = np.array([[2.0, 0.0], [0.0, 3.0]])
        labels = np.array([0, 0])
        z = np.exp(logits - logits.max(axis=1, keepdims=True))
        p = z / z.sum(axis=1, keepdims=True)
        expect = float(np.mean(-np.log(p[np.arange(2), labels])))
        got = float(ad.softmax_cross_entropy(ad.Tensor(logits), labels).data)
        assert got == pytest.approx(expect, abs=1e-12)

    def test_gradient_accumulates_across_uses(self):
        tape = ad.Tape()
        x = tape.leaf(np.array([1.0, 2.0]))
        y = ad.row_sum(ad.add(x, x))
        grads = tape.backward(y)
        assert np.array_equal(grads[x.node_id], [2.0, 2.0])

    def test_dead_branch_gets_no_gradient(self):
        tape = ad.Tape()
        x = tape.leaf(np.array([1.0]))
        z = tape.leaf(np.array([5.0]))
        ad.exp(z)  # side branch, never reaches the loss
        loss = ad.row_sum(x)
        grads = tape.backward(loss)
        assert z.node_id not in grads

    def test_constants_are_not_differentiated(self):
        tape = ad.Tape()
        x = tape.leaf(np.array([1.0, 2.0]))
        c = ad.Tensor(np.array([3.0, 4.0]))
        loss = ad.dot(x, c)
        grads = tape.backward(loss)
        assert np.array_equal(grads[x.node_id], [3.0, 4.0])
        assert c.node_id is None

    def test_all_constant_stays_constant(self):
        out = ad.add(ad.Tensor([1.0]), ad.Tensor([2.0]))
        assert out.tape is None and out.node_id is None


class TestErrorPaths:
    def test_non_finite_tensor_rejected(self):
        with pytest.raises(ContractViolation):
            ad.Tensor([np.inf])

    def test_exp_overflow(self):
        with pytest.raises(NumericalError, match="exp"):
            ad.exp(ad.Tensor([1000.0]))

    def test_log_of_nonpositive(self):
        with pytest.raises(NumericalError, match="log"):
            ad.log(ad.Tensor([0.0]))

    def test_l2_normalize_zero_vector(self):
        with pytest.raises(NumericalError, match="zero"):
            ad.l2_normalize(ad.Tensor([0.0, 0.0]))

    def test_shape_mismatches(self):
        a = ad.Tensor(np.zeros((2, 3)))
        b = ad.Tensor(np.zeros((2, 2)))
        with pytest.raises(ContractViolation):
            ad.matmul(a, b)
        with pytest.raises(ContractViolation):
            ad.add(a, b)
        with pytest.raises(ContractViolation):
            ad.dot(ad.Tensor([1.0]), ad.Tensor([1.0, 2.0]))

    def test_backward_requires_scalar(self):
        tape = ad.Tape()
        x = tape.leaf(np.ones(3))
        with pytest.raises(ContractViolation, match="scalar"):
            tape.backward(x)

    def test_backward_rejects_foreign_loss(self):
        t1, t2 = ad.Tape(), ad.Tape()
        x = t1.leaf(np.ones(()))
        with pytest.raises(ContractViolation):
            t2.backward(x)

    def test_mixed_tapes_rejected(self):
        t1, t2 = ad.Tape(), ad.Tape()
        with pytest.raises(ContractViolation, match="tapes"):
            ad.add(t1.leaf(np.ones(2)), t2.leaf(np.ones(2)))

    def test_dropout_mask_shape(self):
        with pytest.raises(ContractViolation):
            ad.dropout(ad.Tensor(np.ones((2, 2))), np.ones((2, 3)), 0.3)

    def test_label_out_of_range(self):
        with pytest.raises(ContractViolation):
            ad.softmax_cross_entropy(ad.Tensor(np.zeros((1, 2))),
                                     np.array([2]))


def reference_adam(params, grad_seq, lr=0.01, b1=0.9, b2=0.999, eps=1e-8):
    """Straightforward reimplementation used as the optimizer oracle."""
    p = {k: v.copy() for k, v in params.items()}
    m = {k: np.zeros_like(v) for k, v in params.items()}
    v = {k: np.zeros_like(val) for k, val in params.items()}
    for t, grads in enumerate(grad_seq, start=1):
        for k in p:
            g = grads.get(k, np.zeros_like(p[k]))
            m[k] = b1 * m[k] + (1 - b1) * g
            v[k] = b2 * v[k] + (1 - b2) * g * g
            mhat = m[k] / (1 - b1**t)
            vhat = v[k] / (1 - b2**t)
            p[k] = p[k] - lr * mhat / (np.sqrt(vhat) + eps)
    return p


class TestAdam:
    def test_matches_reference_over_steps(self):
        r = rng_for(30)
        params = {"w": r.standard_normal((3, 2)), "b": r.standard_normal(2)}
        grad_seq = [{"w": r.standard_normal((3, 2)),
                     "b": r.standard_normal(2)} for _ in range(7)]
        expect = reference_adam(params, grad_seq, lr=0.01)
        live = {k: v.copy() for k, v in params.items()}
        opt = ad.Adam(live, lr=0.01)
        for grads in grad_seq:
            opt.step(grads)
        for k in params:
            assert np.allclose(live[k], expect[k], atol=1e-12)

    def test_missing_gradients_decay_moments(self):
        r = rng_for(31)
        params = {"w": r.standard_normal(4)}
        grad_seq = [{"w": r.standard_normal(4)}, {}, {}]
        expect = reference_adam(params, grad_seq, lr=0.05)
        live = {k: v.copy() for k, v in params.items()}
        opt = ad.Adam(live, lr=0.05)
        for grads in grad_seq:
            opt.step(grads)
        assert np.allclose(live["w"], expect["w"], atol=1e-12)

    def test_rejects_bad_gradients(self):
        opt = ad.Adam({"w": np.zeros(2)}, lr=0.1)
        with pytest.raises(ContractViolation):
            opt.step({"w": np.zeros(3)})
        with pytest.raises(NumericalError):
            opt.step({"w": np.array([np.nan, 0.0])})

    def test_optimizes_quadratic(self):
        target = np.array([1.0, -2.0, 0.5])
        params = {"x": np.zeros(3)}
        opt = ad.Adam(params, lr=0.05)
        for _ in range(400):
            tape = ad.Tape()
            x = tape.leaf(params["x"])
            d = ad.add(x, ad.Tensor(-target))
            loss = ad.dot(d, d)
            grads = tape.backward(loss)
            opt.step({"x": grads[x.node_id]})
        assert np.allclose(params["x"], target, atol=1e-3)
