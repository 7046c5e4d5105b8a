import json

import numpy as np
import pytest
from scipy.stats import chi2
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from genprior.network import active_submatrix
from genprior.wdc import (
    angle,
    in_theta,
    operator_norm,
    q_matrix,
    q_quadratic_form,
    sample_pairs,
    smoothed_gram,
    smoothed_step,
    swap_matrix,
    wdc_deviation,
)

nonzero_vec = arrays(float, 4, elements=st.floats(-5, 5, allow_nan=False)).filter(
    lambda v: np.linalg.norm(v) > 1e-3
)


def mc_activated_gram(x, y, rows, seed, chunk=200_000):
    """Monte Carlo estimate of (1/n) E[W_{+,x}^T W_{+,y}] from N(0,1) rows."""
    rng = np.random.default_rng(seed)
    k = len(x)
    total = np.zeros((k, k))
    done = 0
    while done < rows:
        b = min(chunk, rows - done)
        W = rng.standard_normal((b, k))
        keep = ((W @ x) > 0) & ((W @ y) > 0)
        total += W[keep].T @ W[keep]
        done += b
    return total / rows


class TestSwapMatrix:
    def test_equal(self):
        x = np.array([3.0, 4.0])
        np.testing.assert_allclose(swap_matrix(x, x), np.outer(x, x) / 25)

    def test_basis(self):
        np.testing.assert_allclose(swap_matrix([1.0, 0.0], [0.0, 1.0]), [[0, 1], [1, 0]], atol=1e-15)

    def test_antipodal(self):
        x = np.array([1.0, 2.0, 2.0])
        np.testing.assert_allclose(swap_matrix(x, -x), -np.outer(x, x) / 9)

    def test_zero_rejected(self):
        with pytest.raises(ValueError):
            swap_matrix(np.zeros(3), np.ones(3))

    @settings(max_examples=200)
    @given(x=nonzero_vec, y=nonzero_vec)
    def test_defining_relations(self, x, y):
        M = swap_matrix(x, y)
        xh, yh = x / np.linalg.norm(x), y / np.linalg.norm(y)
        np.testing.assert_allclose(M, M.T, atol=1e-12)
        np.testing.assert_allclose(M @ xh, yh, atol=1e-9)
        np.testing.assert_allclose(M @ yh, xh, atol=1e-9)
        # Annihilates the orthogonal complement of span{x, y}.
        basis = np.linalg.svd(np.vstack([xh, yh]))[2]
        rank = np.linalg.matrix_rank(np.vstack([xh, yh]), tol=1e-9)
        for z in basis[rank:]:
            np.testing.assert_allclose(M @ z, 0, atol=1e-9)
        assert np.linalg.norm(M, 2) <= 1 + 1e-12


class TestQMatrix:
    def test_equal(self):
        x = np.array([0.3, -0.1, 2.0])
        q = q_matrix(x, x)
        np.testing.assert_allclose(q.matrix, 0.5 * np.eye(3))
        assert q.angle == 0.0

    def test_antipodal(self):
        x = np.array([0.3, -0.1, 2.0])
        q = q_matrix(x, -x)
        np.testing.assert_allclose(q.matrix, 0, atol=1e-15)
        assert q.angle == pytest.approx(np.pi)

    def test_orthogonal_closed_form(self):
        q = q_matrix([1.0, 0.0], [0.0, 1.0])
        expected = np.array([[0.25, 1 / (2 * np.pi)], [1 / (2 * np.pi), 0.25]])
        np.testing.assert_allclose(q.matrix, expected, atol=1e-15)

    def test_orthogonal_monte_carlo(self):
        x, y = np.array([1.0, 0.0]), np.array([0.0, 1.0])
        est = mc_activated_gram(x, y, 1_000_000, seed=0)
        assert np.linalg.norm(est - q_matrix(x, y).matrix, 2) <= 0.01

    @pytest.mark.parametrize("seed", range(3))
    def test_random_monte_carlo(self, seed):
        rng = np.random.default_rng(seed)
        x, y = rng.standard_normal((2, 4))
        est = mc_activated_gram(x, y, 1_000_000, seed=seed + 10)
        assert np.linalg.norm(est - q_matrix(x, y).matrix, 2) <= 0.01

    def test_scale_invariance_exact_powers_of_two(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            x, y = rng.standard_normal((2, 5))
            np.testing.assert_array_equal(q_matrix(4 * x, 0.5 * y).matrix, q_matrix(x, y).matrix)

    @settings(max_examples=200)
    @given(x=nonzero_vec, y=nonzero_vec, a=st.floats(1e-3, 1e3), b=st.floats(1e-3, 1e3))
    def test_scale_invariance(self, x, y, a, b):
        np.testing.assert_allclose(q_matrix(a * x, b * y).matrix, q_matrix(x, y).matrix, atol=1e-13)

    @settings(max_examples=300)
    @given(x=nonzero_vec, y=nonzero_vec)
    def test_norm_and_symmetry(self, x, y):
        Q = q_matrix(x, y).matrix
        np.testing.assert_allclose(Q, Q.T, atol=1e-12)
        assert np.linalg.norm(Q, 2) <= 1 + 1e-12

    def test_angle_accuracy_near_zero(self):
        x = np.array([1.0, 0.0])
        y = np.array([1.0, 1e-9])
        assert angle(x, y) == pytest.approx(1e-9, rel=1e-6)

    def test_quadratic_form_matches_matrix(self):
        rng = np.random.default_rng(3)
        X, Y, U = rng.standard_normal((3, 50, 4))
        Y[0] = X[0]
        Y[1] = -2 * X[1]
        got = q_quadratic_form(X, Y, U)
        want = [u @ q_matrix(x, y).matrix @ u for x, y, u in zip(X, Y, U)]
        np.testing.assert_allclose(got, want, atol=1e-13)


def shell_point(rng, k):
    v = rng.standard_normal(k)
    return v / np.linalg.norm(v) * rng.uniform(0.5, 1.5)


class TestQLipschitz:
    def test_bound_seven(self):
        rng = np.random.default_rng(4)
        worst = 0.0
        for _ in range(2000):
            k = rng.integers(2, 6)
            x, y = shell_point(rng, k), shell_point(rng, k)
            if rng.random() < 0.5:
                scale = 10.0 ** rng.uniform(-4, 0)
                xt = x + scale * rng.standard_normal(k)
                yt = y + scale * rng.standard_normal(k)
                if not (0.5 <= np.linalg.norm(xt) <= 1.5 and 0.5 <= np.linalg.norm(yt) <= 1.5):
                    continue
            else:
                xt, yt = shell_point(rng, k), shell_point(rng, k)
            d = max(np.linalg.norm(x - xt), np.linalg.norm(y - yt))
            gap = np.linalg.norm(q_matrix(x, y).matrix - q_matrix(xt, yt).matrix, 2)
            assert gap <= 7 * d + 1e-9
            worst = max(worst, gap / d)
        assert worst > 0.1  # the sweep actually exercises the bound


class TestWdcDeviation:
    def test_hand_example(self):
        rep = wdc_deviation([[1.0]], [(np.array([1.0]), np.array([1.0]))])
        assert rep.max_deviation == pytest.approx(0.5)
        assert rep.pairs_tested == 1 and rep.normalized

    def test_scale_invariance(self):
        rng = np.random.default_rng(0)
        W = rng.standard_normal((40, 3))
        for _ in range(20):
            x, y = rng.standard_normal((2, 3))
            a = wdc_deviation(W, [(x, y)]).max_deviation
            b = wdc_deviation(W, [(2 * x, 3 * y)]).max_deviation
            assert a == pytest.approx(b, abs=1e-14)
            c = wdc_deviation(W, [(2 * x, 4 * y)]).max_deviation
            assert a == c

    def test_argmax_reevaluates(self):
        rng = np.random.default_rng(1)
        W = rng.standard_normal((60, 4))
        rep = wdc_deviation(W, sample_pairs(4, 100, rng))
        again = wdc_deviation(W, [(rep.argmax_x, rep.argmax_y)])
        assert abs(again.max_deviation - rep.max_deviation) <= 1e-10

    def test_against_dense_definition(self):
        rng = np.random.default_rng(2)
        W = rng.standard_normal((30, 3))
        pairs = sample_pairs(3, 20, rng)
        want = max(
            np.linalg.norm(active_submatrix(W, x).T @ active_submatrix(W, y) / 30 - q_matrix(x, y).matrix, 2)
            for x, y in pairs
        )
        assert wdc_deviation(W, pairs).max_deviation == pytest.approx(want, rel=1e-10)

    def test_unnormalized(self):
        rng = np.random.default_rng(3)
        n = 200
        W = rng.standard_normal((n, 3))
        pairs = sample_pairs(3, 30, rng)
        a = wdc_deviation(W, pairs).max_deviation
        b = wdc_deviation(W / np.sqrt(n), pairs, normalized=False).max_deviation
        assert a == pytest.approx(b, rel=1e-10)

    def test_empty(self):
        with pytest.raises(ValueError):
            wdc_deviation(np.eye(2), [])

    def test_trend(self):
        def stat(n):
            rng = np.random.default_rng(77)
            W = rng.standard_normal((n, 10))
            return wdc_deviation(W, sample_pairs(10, 500, rng)).max_deviation

        assert stat(1000) < stat(50)

    def test_sample_pairs_structure(self):
        pairs = sample_pairs(3, 5, np.random.default_rng(0))
        assert len(pairs) == 8
        np.testing.assert_array_equal(pairs[0][0], pairs[0][1])
        np.testing.assert_array_equal(pairs[1][0], -pairs[1][1])
        assert abs(pairs[2][0] @ pairs[2][1]) < 1e-12

    def test_json(self):
        rep = wdc_deviation([[1.0]], [(np.array([1.0]), np.array([1.0]))])
        rec = json.loads(rep.to_json())
        assert set(rec) == {"max_deviation", "pairs_tested", "normalized", "argmax_x", "argmax_y"}
        assert rec["max_deviation"] == 0.5


class TestSmoothedStep:
    def test_upper_values(self):
        eps = 0.4
        assert smoothed_step(-eps, eps, "upper") == 0.0
        assert smoothed_step(-eps / 2, eps, "upper") == pytest.approx(0.5)
        assert smoothed_step(0.0, eps, "upper") == 1.0

    def test_lower_values(self):
        eps = 0.4
        assert smoothed_step(0.0, eps, "lower") == 0.0
        assert smoothed_step(eps, eps, "lower") == 1.0

    def test_sandwich_of_indicator(self):
        z = np.linspace(-3, 3, 100_001)
        ind = (z > 0).astype(float)
        for eps in (1e-3, 0.1, 1.0):
            assert np.all(smoothed_step(z, eps, "lower") <= ind)
            assert np.all(ind <= smoothed_step(z, eps, "upper"))

    def test_lipschitz(self):
        z = np.sort(np.random.default_rng(0).uniform(-2, 2, 10_000))
        for side in ("lower", "upper"):
            h = smoothed_step(z, 0.3, side)
            slopes = np.abs(np.diff(h)) / np.maximum(np.diff(z), 1e-300)
            assert np.all(slopes <= 1 / 0.3 + 1e-6)

    @pytest.mark.parametrize("eps", [0.0, -1.0])
    def test_bad_epsilon(self, eps):
        with pytest.raises(ValueError):
            smoothed_step(0.1, eps, "upper")

    def test_bad_side(self):
        with pytest.raises(ValueError):
            smoothed_step(0.1, 0.1, "middle")


class TestSmoothedGram:
    def test_saturated(self):
        W = np.array([[1.0, 0.2], [0.8, 1.0], [2.0, 0.5]])
        x = np.array([1.0, 1.0])
        for side in ("lower", "upper"):
            np.testing.assert_allclose(smoothed_gram(W, x, x, 0.1, side), W.T @ W)

    def test_zero_x_lower(self):
        W = np.random.default_rng(0).standard_normal((10, 3))
        np.testing.assert_array_equal(smoothed_gram(W, np.zeros(3), np.ones(3), 0.2, "lower"), np.zeros((3, 3)))

    def test_psd_on_diagonal(self):
        rng = np.random.default_rng(1)
        W = rng.standard_normal((30, 4))
        x = rng.standard_normal(4)
        for side in ("lower", "upper"):
            assert np.linalg.eigvalsh(smoothed_gram(W, x, x, 0.3, side)).min() >= -1e-9

    def test_sandwich(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            n, k = rng.integers(1, 40), rng.integers(1, 6)
            W = rng.standard_normal((n, k))
            x, y = rng.standard_normal((2, k))
            eps = 10.0 ** rng.uniform(-3, 0.5)
            act = active_submatrix(W, x).T @ active_submatrix(W, y)
            assert np.linalg.eigvalsh(smoothed_gram(W, x, y, eps, "upper") - act).min() >= -1e-9
            assert np.linalg.eigvalsh(act - smoothed_gram(W, x, y, eps, "lower")).min() >= -1e-9

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            smoothed_gram(np.eye(3), np.ones(2), np.ones(3), 0.1, "upper")


class TestInTheta:
    def test_zero(self):
        assert in_theta(np.zeros((5, 2)))

    def test_long_row(self):
        assert not in_theta(np.array([[2.0]]))

    def test_large_norm(self):
        # Every row norm is sqrt(2k) but the rows align: ||W|| = sqrt(2 n k) > 3 sqrt(n) for k = 5.
        W = np.tile(np.full(5, np.sqrt(2.0)), (10, 1))
        assert not in_theta(W)

    def test_row_bound_is_the_binding_constraint(self):
        # Raw Gaussian matrices at n=2000, k=10 essentially never meet the row bound:
        # P(chi2_10 > 20) ~ 0.029 per row, so all 2000 rows pass with probability ~1e-26.
        assert (1 - chi2.sf(20, 10)) ** 2000 < 1e-20
        hits = sum(in_theta(np.random.default_rng(s).standard_normal((2000, 10))) for s in range(100))
        assert hits == 0
        # The spectral bound alone holds for every seed.
        norms_ok = sum(
            operator_norm(np.random.default_rng(s).standard_normal((2000, 10))) <= 3 * np.sqrt(2000)
            for s in range(100)
        )
        assert norms_ok == 100

    def test_conditioned_sampler_members(self):
        from genprior.pseudolip import sample_theta_matrix

        rng = np.random.default_rng(0)
        for _ in range(100):
            assert in_theta(sample_theta_matrix(2000, 10, rng))


class TestOperatorNorm:
    def test_identity(self):
        assert operator_norm(np.eye(3)) == pytest.approx(1.0, rel=1e-12)

    def test_diag(self):
        assert operator_norm(np.diag([3.0, 1.0])) == pytest.approx(3.0, rel=1e-10)

    def test_zero(self):
        assert operator_norm(np.zeros((4, 2))) == 0.0

    @pytest.mark.parametrize("seed", range(10))
    def test_against_svd(self, seed):
        M = np.random.default_rng(seed).standard_normal((20, 7))
        assert operator_norm(M) == pytest.approx(np.linalg.svd(M, compute_uv=False)[0], rel=1e-8)

    def test_wide(self):
        M = np.random.default_rng(5).standard_normal((3, 40))
        assert operator_norm(M) == pytest.approx(np.linalg.svd(M, compute_uv=False)[0], rel=1e-8)
