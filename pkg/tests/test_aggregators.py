import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cosgd.aggregators import (BcState, CollaborationWeights, alone_combine,
                               bc_combine, bc_update, check_alpha_guard,
                               oracle_bc_combine, wga_combine)
from cosgd.objective import GradientSample, QuadraticTask, true_gradient
from cosgd.rng import agent_stream


def gs(v, agent=0):
    return GradientSample(value=np.atleast_1d(np.asarray(v, float)), agent=agent)


class TestCollaborationWeights:
    def test_valid(self):
        w = CollaborationWeights(0.5, [0.25, 0.75], beta=0.1)
        assert w.n_collaborators == 2

    def test_alpha_range(self):
        with pytest.raises(ValueError):
            CollaborationWeights(1.5, [1.0])
        with pytest.raises(ValueError):
            CollaborationWeights(-0.1, [1.0])

    def test_tau_simplex(self):
        with pytest.raises(ValueError):
            CollaborationWeights(0.5, [0.7, 0.7])
        with pytest.raises(ValueError):
            CollaborationWeights(0.5, [1.5, -0.5])

    def test_beta_range(self):
        with pytest.raises(ValueError):
            CollaborationWeights(0.5, [1.0], beta=0.0)
        with pytest.raises(ValueError):
            CollaborationWeights(0.5, [1.0], beta=1.5)

    def test_alpha_guard(self):
        with pytest.raises(ValueError):
            check_alpha_guard(0.6, 4.0)  # 0.6 >= 1/2
        check_alpha_guard(0.4, 4.0)
        check_alpha_guard(1.0, 0.0)


class TestAloneCombine:
    def test_identity(self):
        np.testing.assert_array_equal(alone_combine(gs([3.0])), [3.0])
        np.testing.assert_array_equal(alone_combine(gs([0.0, 0.0])), [0.0, 0.0])


class TestWgaCombine:
    def test_alpha_zero(self):
        w = CollaborationWeights(0.0, [1.0])
        np.testing.assert_array_equal(wga_combine(gs([2.0]), [gs([9.0])], w), [2.0])

    def test_full_delegation(self):
        w = CollaborationWeights(1.0, [1.0])
        np.testing.assert_array_equal(wga_combine(gs([2.0]), [gs([5.0])], w), [5.0])

    def test_weighted_mix(self):
        w = CollaborationWeights(0.5, [0.5, 0.5])
        out = wga_combine(gs([2.0]), [gs([4.0]), gs([8.0])], w)
        np.testing.assert_allclose(out, [4.0])

    def test_length_mismatch(self):
        w = CollaborationWeights(0.5, [0.5, 0.5])
        with pytest.raises(ValueError):
            wga_combine(gs([2.0]), [gs([4.0])], w)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 4).flatmap(
        lambda n: st.tuples(
            st.lists(st.floats(-100, 100), min_size=n, max_size=n),
            st.lists(st.floats(-100, 100), min_size=n, max_size=n),
            st.lists(st.floats(-100, 100), min_size=n, max_size=n),
            st.lists(st.floats(-100, 100), min_size=n, max_size=n))),
           st.floats(0, 1))
    def test_linear_superposition(self, vecs, alpha):
        u0, u1, v0, v1 = map(np.array, vecs)
        w = CollaborationWeights(alpha, [1.0])
        lhs = wga_combine(gs(u0 + v0), [gs(u1 + v1)], w)
        rhs = wga_combine(gs(u0), [gs(u1)], w) + wga_combine(gs(v0), [gs(v1)], w)
        np.testing.assert_allclose(lhs, rhs, atol=1e-9)

    def test_unbiased_and_variance(self):
        t0 = QuadraticTask(1.0, 0.0, noise_std=2.0)
        t1 = QuadraticTask(2.0, 2.0, noise_std=3.0)
        w = CollaborationWeights(0.6, [1.0])
        x = 1.0
        g = agent_stream(5, 0)
        h = agent_stream(5, 1)
        from cosgd.objective import sample_gradient
        n = 10 ** 5
        outs = np.array([wga_combine(sample_gradient(t0, x, g),
                                     [sample_gradient(t1, x, h)], w)[0]
                         for _ in range(n)])
        target = (0.4 * true_gradient(t0, x) + 0.6 * true_gradient(t1, x))[0]
        var = 0.4 ** 2 * 4.0 + 0.6 ** 2 * 9.0
        assert abs(outs.mean() - target) < 3 * np.sqrt(var / n)
        assert outs.var() == pytest.approx(var, rel=0.1)


class TestBcCombine:
    def test_perfect_correction(self):
        t0 = QuadraticTask(1.0, 0.0)
        t1 = QuadraticTask(2.0, 2.0)
        x = 3.0
        g0, g1 = true_gradient(t0, x), true_gradient(t1, x)
        w = CollaborationWeights(0.7, [1.0], beta=0.5)
        state = BcState(g1 - g0)
        out, b = bc_combine(gs(g0), [gs(g1)], w, state)
        np.testing.assert_allclose(out, g0)
        np.testing.assert_allclose(b, g1 - g0)

    def test_alpha_zero(self):
        w = CollaborationWeights(0.0, [1.0], beta=0.5)
        out, _ = bc_combine(gs([2.0]), [gs([100.0])], w, BcState([55.0]))
        np.testing.assert_array_equal(out, [2.0])

    def test_worked_example(self):
        w = CollaborationWeights(1.0, [1.0], beta=0.5)
        out, b = bc_combine(gs([1.0]), [gs([4.0])], w, BcState([3.0]))
        np.testing.assert_allclose(out, [1.0])
        np.testing.assert_allclose(b, [3.0])

    def test_purity(self):
        w = CollaborationWeights(0.5, [1.0], beta=0.5)
        state = BcState([1.0])
        before = state.bias_estimate.copy()
        r1 = bc_combine(gs([1.0]), [gs([4.0])], w, state)
        r2 = bc_combine(gs([1.0]), [gs([4.0])], w, state)
        np.testing.assert_array_equal(state.bias_estimate, before)
        np.testing.assert_array_equal(r1[0], r2[0])


class TestBcUpdate:
    def test_full_replacement(self):
        s = bc_update(BcState([9.0]), [4.0], beta=1.0)
        np.testing.assert_array_equal(s.bias_estimate, [4.0])

    def test_midpoint(self):
        s = bc_update(BcState([2.0]), [4.0], beta=0.5)
        np.testing.assert_array_equal(s.bias_estimate, [3.0])

    def test_geometric_convergence(self):
        s = BcState([0.0])
        beta, b = 0.3, 5.0
        for k in range(1, 30):
            s = bc_update(s, [b], beta)
            expected = b * (1 - (1 - beta) ** k)
            assert s.bias_estimate[0] == pytest.approx(expected)

    def test_beta_bounds(self):
        with pytest.raises(ValueError):
            bc_update(BcState([0.0]), [1.0], beta=0.0)
        with pytest.raises(ValueError):
            bc_update(BcState([0.0]), [1.0], beta=1.2)

    def test_does_not_mutate_input(self):
        s = BcState([2.0])
        bc_update(s, [4.0], beta=0.5)
        np.testing.assert_array_equal(s.bias_estimate, [2.0])


class TestBcTelescoping:
    def test_deterministic_beta_one(self):
        # With sigma = 0 and beta = 1 the correction telescopes: from step 1
        # onward g(x_t) = grad f_0(x_t) + alpha [bias(x_t) - bias(x_{t-1})];
        # with delta = 0 the bias is constant, so g = grad f_0 exactly.
        for a1, exact in ((1.0, True), (3.0, False)):
            t0 = QuadraticTask(1.0, 0.0)
            t1 = QuadraticTask(a1, 2.0)
            w = CollaborationWeights(0.5, [1.0], beta=1.0)
            x, eta = 4.0, 0.1
            state = None
            prev_bias = None
            for step in range(6):
                g0, g1 = gs(true_gradient(t0, x)), gs(true_gradient(t1, x))
                bias = g1.value - g0.value
                if state is None:
                    state = BcState(bias)
                out, b = bc_combine(g0, [g1], w, state)
                if step >= 1:
                    expected = true_gradient(t0, x) + 0.5 * (bias - prev_bias)
                    np.testing.assert_allclose(out, expected, atol=1e-12)
                    if exact:
                        np.testing.assert_allclose(out, true_gradient(t0, x),
                                                   atol=1e-12)
                state = bc_update(state, b, 1.0)
                prev_bias = bias
                x = x - eta * out[0]


class TestOracleBcCombine:
    def test_exact_when_noiseless(self):
        t0 = QuadraticTask(1.0, 0.0)
        t1 = QuadraticTask(2.0, 2.0)
        x = 3.0
        w = CollaborationWeights(0.8, [1.0])
        bias = true_gradient(t1, x) - true_gradient(t0, x)
        out = oracle_bc_combine(gs(true_gradient(t0, x)), [gs(true_gradient(t1, x))],
                                w, bias, agent_stream(0, 0, 1), v=0.0)
        np.testing.assert_allclose(out, true_gradient(t0, x))

    def test_unbiased_and_variance(self):
        from cosgd.objective import sample_gradient
        t0 = QuadraticTask(1.0, 0.0, noise_std=2.0)
        t1 = QuadraticTask(2.0, 2.0, noise_std=3.0)
        alpha, v = 0.6, 1.5
        w = CollaborationWeights(alpha, [1.0])
        x = 1.0
        g, h, o = agent_stream(9, 0), agent_stream(9, 1), agent_stream(9, 0, 1)
        bias = true_gradient(t1, x) - true_gradient(t0, x)
        n = 10 ** 5
        outs = np.array([oracle_bc_combine(sample_gradient(t0, x, g),
                                           [sample_gradient(t1, x, h)],
                                           w, bias, o, v)[0]
                         for _ in range(n)])
        target = true_gradient(t0, x)[0]
        var = (1 - alpha) ** 2 * 4.0 + alpha ** 2 * (9.0 + v ** 2 / 1)
        assert abs(outs.mean() - target) < 3 * np.sqrt(var / n)
        assert outs.var() == pytest.approx(var, rel=0.1)

    def test_negative_v_rejected(self):
        w = CollaborationWeights(0.5, [1.0])
        with pytest.raises(ValueError):
            oracle_bc_combine(gs([1.0]), [gs([2.0])], w, [1.0],
                              agent_stream(0, 0, 1), v=-1.0)
