import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from dnseg.divnorm import (
    BETA_MIN,
    DnParams,
    dn_backward,
    dn_forward,
    nonlinearity_index,
    probe_center_surround,
    project_params,
)
from dnseg.divnorm.layer import DivisiveNormalization, divisive_normalization
from dnseg.errors import InvalidInput, ShapeError


def loop_forward(z, beta, gamma):
    """Direct evaluation of the DN formula with explicit loops and zero padding."""
    c, h, w = z.shape
    y = np.zeros_like(z)
    for k in range(c):
        for i in range(h):
            for j in range(w):
                pool = beta[k]
                for s in range(c):
                    for u in range(3):
                        for v in range(3):
                            ii, jj = i + u - 1, j + v - 1
                            if 0 <= ii < h and 0 <= jj < w:
                                pool += gamma[k, s, u, v] * abs(z[s, ii, jj])
                y[k, i, j] = z[k, i, j] / pool
    return y


def random_params(rng, c):
    return DnParams(rng.uniform(0.05, 2.0, c), rng.uniform(0.0, 0.5, (c, c, 3, 3)))


def random_input(rng, c, h, w, margin=1e-2):
    z = rng.normal(size=(c, h, w))
    # keep away from the |z| kink so finite differences stay valid
    small = np.abs(z) < margin
    z[small] = np.sign(z[small] + 1e-12) * margin * 2
    return z


def numeric_grads(z, p, g, h=1e-4):
    def f(zz, beta, gamma):
        return float(np.sum(dn_forward(zz, DnParams(beta, gamma)).y * g))

    out = []
    for which in ("z", "beta", "gamma"):
        base = {"z": z, "beta": p.beta, "gamma": p.gamma}
        arr = base[which]
        grad = np.zeros_like(arr)
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            plus = {k: v.copy() for k, v in base.items()}
            minus = {k: v.copy() for k, v in base.items()}
            plus[which][idx] += h
            minus[which][idx] -= h
            grad[idx] = (f(plus["z"], plus["beta"], plus["gamma"]) - f(minus["z"], minus["beta"], minus["gamma"])) / (2 * h)
        out.append(grad)
    return out


def rel_err(a, b):
    scale = max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-12)
    return float(np.max(np.abs(a - b)) / scale)


class TestForward:
    def test_zero_input(self):
        p = DnParams.init(2)
        assert np.all(dn_forward(np.zeros((2, 4, 4)), p).y == 0)

    def test_pointwise_when_gamma_zero(self):
        p = DnParams(np.full(3, 2.0), np.zeros((3, 3, 3, 3)))
        np.testing.assert_array_equal(dn_forward(np.ones((3, 5, 5)), p).y, 0.5)

    def test_hand_value(self):
        p = DnParams([0.5], np.full((1, 1, 3, 3), 0.1))
        act = dn_forward(np.ones((1, 5, 5)), p)
        assert act.denom[0, 2, 2] == pytest.approx(1.4)
        assert act.y[0, 2, 2] == pytest.approx(1 / 1.4)
        assert act.y[0, 2, 2] == pytest.approx(0.7143, abs=1e-4)
        # corner pixel sees only a 2x2 pool under zero padding
        assert act.denom[0, 0, 0] == pytest.approx(0.5 + 4 * 0.1)

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_loop_oracle_small(self, seed):
        rng = np.random.default_rng(seed)
        z = rng.normal(size=(2, 4, 4))
        p = random_params(rng, 2)
        np.testing.assert_allclose(dn_forward(z, p).y, loop_forward(z, p.beta, p.gamma), rtol=1e-10, atol=0)

    def test_batch_matches_single(self):
        rng = np.random.default_rng(1)
        z = rng.normal(size=(3, 2, 6, 5))
        p = random_params(rng, 2)
        batched = dn_forward(z, p).y
        for n in range(3):
            np.testing.assert_array_equal(batched[n], dn_forward(z[n], p).y)

    def test_nan_rejected(self):
        z = np.zeros((1, 3, 3))
        z[0, 1, 1] = np.nan
        with pytest.raises(InvalidInput):
            dn_forward(z, DnParams.init(1))

    def test_infeasible_params_rejected(self):
        with pytest.raises(InvalidInput):
            dn_forward(np.ones((1, 3, 3)), DnParams([0.0], np.zeros((1, 1, 3, 3))))

    def test_channel_mismatch(self):
        with pytest.raises(ShapeError):
            dn_forward(np.ones((2, 3, 3)), DnParams.init(3))

    def test_gamma_shape_checked(self):
        with pytest.raises(ShapeError):
            DnParams(np.ones(2), np.zeros((2, 2, 5, 5)))

    def test_general_exponents(self):
        rng = np.random.default_rng(2)
        z = rng.normal(size=(1, 3, 3))
        p = DnParams([1.0], np.full((1, 1, 3, 3), 0.2), alpha=2.0, eps_exp=0.5)
        d = (1.0 + 0.2 * np.sum(z[0] ** 2)) ** 0.5
        assert dn_forward(z, p).y[0, 1, 1] == pytest.approx(z[0, 1, 1] / d)


class TestProperties:
    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_range_compression(self, seed):
        rng = np.random.default_rng(seed)
        p = random_params(rng, 2)
        z = rng.normal(scale=5.0, size=(2, 5, 5))
        y = dn_forward(z, p).y
        g0 = np.array([p.gamma[k, k, 1, 1] for k in range(2)])[:, None, None]
        bound = np.abs(z) / (p.beta[:, None, None] + g0 * np.abs(z))
        assert np.all(np.abs(y) <= bound * (1 + 1e-12))
        assert np.all(np.abs(y) < 1 / g0 + 1e-12)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_denominator_positive(self, seed):
        rng = np.random.default_rng(seed)
        p = project_params(DnParams(rng.normal(size=3), rng.normal(size=(3, 3, 3, 3))))
        act = dn_forward(rng.normal(scale=10, size=(3, 4, 4)), p)
        assert np.all(act.denom >= BETA_MIN)
        assert np.all(np.sign(act.y) == np.sign(act.z))

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_surround_inhibition(self, seed):
        rng = np.random.default_rng(seed)
        p = random_params(rng, 1)
        z = rng.uniform(0, 1, (1, 3, 3))
        z[0, 1, 1] = rng.uniform(0.1, 1.0)
        more = z.copy()
        u, v = rng.choice([0, 2]), rng.integers(0, 3)
        more[0, u, v] += rng.uniform(0, 1)
        assert dn_forward(more, p).y[0, 1, 1] <= dn_forward(z, p).y[0, 1, 1]


class TestBackward:
    def test_zero_grad_out(self):
        rng = np.random.default_rng(0)
        p = random_params(rng, 2)
        act = dn_forward(rng.normal(size=(2, 4, 4)), p)
        for g in dn_backward(act, np.zeros((2, 4, 4))):
            assert np.all(g == 0)

    def test_gamma_zero_closed_form(self):
        rng = np.random.default_rng(1)
        beta = rng.uniform(0.5, 2, 2)
        p = DnParams(beta, np.zeros((2, 2, 3, 3)))
        z = rng.normal(size=(2, 3, 4))
        g = rng.normal(size=(2, 3, 4))
        gz, gb, _ = dn_backward(dn_forward(z, p), g)
        np.testing.assert_allclose(gz, g / beta[:, None, None], rtol=1e-13)
        np.testing.assert_allclose(gb, np.sum(-z / beta[:, None, None] ** 2 * g, axis=(1, 2)), rtol=1e-12)

    @pytest.mark.parametrize("seed", range(8))
    def test_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        c = int(rng.integers(1, 4))
        p = random_params(rng, c)
        z = random_input(rng, c, 8, 8)
        g = rng.normal(size=z.shape)
        analytic = dn_backward(dn_forward(z, p), g)
        numeric = numeric_grads(z, p, g)
        for a, n in zip(analytic, numeric):
            assert rel_err(a, n) < 1e-5

    def test_subgradient_at_zero(self):
        p = DnParams([1.0], np.full((1, 1, 3, 3), 0.3))
        z = np.zeros((1, 3, 3))
        z[0, 0, 0] = 1.0
        gz, _, _ = dn_backward(dn_forward(z, p), np.ones((1, 3, 3)))
        # at z = 0 only the direct 1/D term survives
        act = dn_forward(z, p)
        assert gz[0, 1, 1] == pytest.approx(1 / act.denom[0, 1, 1])

    def test_shape_mismatch(self):
        act = dn_forward(np.ones((1, 3, 3)), DnParams.init(1))
        with pytest.raises(ShapeError):
            dn_backward(act, np.ones((1, 3, 4)))


class TestProjection:
    def test_clamps(self):
        p = project_params(DnParams([-0.5, 2.0], np.full((2, 2, 3, 3), -0.01)))
        assert p.beta.tolist() == [BETA_MIN, 2.0]
        assert np.all(p.gamma == 0)

    def test_idempotent_on_feasible(self):
        p = DnParams.init(3)
        q = project_params(p)
        np.testing.assert_array_equal(p.beta, q.beta)
        np.testing.assert_array_equal(p.gamma, q.gamma)

    def test_init(self):
        p = DnParams.init(4)
        assert np.all(p.beta == 1.0)
        np.testing.assert_allclose(p.gamma, 1 / 36)


class TestTorchLayer:
    def test_matches_numpy(self):
        rng = np.random.default_rng(5)
        p = random_params(rng, 3)
        z = rng.normal(size=(2, 3, 7, 6))
        y = divisive_normalization(
            torch.tensor(z), torch.tensor(p.beta), torch.tensor(p.gamma)
        ).numpy()
        np.testing.assert_allclose(y, dn_forward(z, p).y, rtol=1e-12)

    def test_backward_matches_numpy(self):
        rng = np.random.default_rng(6)
        p = random_params(rng, 2)
        z = random_input(rng, 2, 5, 5)[None]
        g = rng.normal(size=z.shape)
        zt = torch.tensor(z, requires_grad=True)
        bt = torch.tensor(p.beta, requires_grad=True)
        gt = torch.tensor(p.gamma, requires_grad=True)
        (divisive_normalization(zt, bt, gt) * torch.tensor(g)).sum().backward()
        ref = dn_backward(dn_forward(z, p), g)
        for t, r in zip((zt.grad, bt.grad, gt.grad), ref):
            np.testing.assert_allclose(t.numpy(), r, rtol=1e-10, atol=1e-12)

    def test_gradcheck(self):
        rng = np.random.default_rng(7)
        p = random_params(rng, 2)
        z = torch.tensor(random_input(rng, 2, 4, 4)[None], requires_grad=True)
        b = torch.tensor(p.beta, requires_grad=True)
        g = torch.tensor(p.gamma, requires_grad=True)
        assert torch.autograd.gradcheck(divisive_normalization, (z, b, g), eps=1e-6, atol=1e-6)

    def test_module_projection_and_params(self):
        layer = DivisiveNormalization(2)
        with torch.no_grad():
            layer.beta.fill_(-1.0)
            layer.gamma[0, 0, 0, 0] = -3.0
        layer.project_()
        p = layer.params()
        assert np.all(p.beta == pytest.approx(BETA_MIN))
        assert p.gamma.min() >= 0


class TestProbe:
    def test_zero_center(self):
        curves = probe_center_surround(DnParams.init(2), 1, [0.0, 0.5, 1.0], 5)
        for b in curves.levels:
            c, y = curves.curve(b)
            assert y[c == 0] == pytest.approx(0.0)

    def test_closed_form_black_surround(self):
        rng = np.random.default_rng(0)
        p = random_params(rng, 3)
        curves = probe_center_surround(p, 2, [0.0], 11)
        c, y = curves.curve(0.0)
        np.testing.assert_allclose(y, c / (p.beta[2] + p.gamma[2, 2, 1, 1] * c), rtol=1e-12)

    def test_surround_ordering(self):
        rng = np.random.default_rng(1)
        p = random_params(rng, 2)
        curves = probe_center_surround(p, 0, [0.0, 0.5, 1.0], 21)
        y0 = curves.curve(0.0)[1]
        y5 = curves.curve(0.5)[1]
        y1 = curves.curve(1.0)[1]
        assert np.all(y1 <= y5 + 1e-15) and np.all(y5 <= y0 + 1e-15)
        assert np.all(np.diff(y0) >= 0)

    def test_center_range(self):
        curves = probe_center_surround(DnParams.init(1), 0, [0.0], 3, center_range=(0.0, 4.0))
        assert curves.center_in.tolist() == [0.0, 2.0, 4.0]

    def test_bad_steps(self):
        with pytest.raises(ValueError):
            probe_center_surround(DnParams.init(1), 0, [0.0], 1)


class TestNonlinearityIndex:
    def test_constant_ratio(self):
        assert nonlinearity_index(DnParams(np.ones(4), np.full((4, 4, 3, 3), 0.1))) == pytest.approx(10.0)

    def test_linear_layer(self):
        assert nonlinearity_index(DnParams(np.ones(2), np.zeros((2, 2, 3, 3)))) == float("inf")
