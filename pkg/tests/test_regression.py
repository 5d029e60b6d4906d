import numpy as np
import pytest
from scipy.stats import multivariate_normal

from stringgp.kernels import CapabilityError, Matern52, SquaredExponential
from stringgp.regression import (
    Homoskedastic,
    IllConditionedError,
    PerString,
    fit,
    log_marginal_likelihood,
    predict,
    predict_gradient,
    predictive_log_likelihood,
)
from stringgp.string_kernel import StringKernel

SE1 = SquaredExponential(variance=1.0, lengthscale=1.0)


def two_string_kernel():
    return StringKernel([0.0, 0.5, 1.0], [SquaredExponential(variance=1.0, lengthscale=0.2),
                                          Matern52(variance=0.6, lengthscale=0.3)])


def test_scalar_posterior():
    post = fit(SE1, [0.0], [2.0], Homoskedastic(1.0))
    assert post.predict([0.0]).mean[0] == pytest.approx(1.0, abs=1e-14)


def test_noiseless_interpolation():
    x = np.linspace(0, 3, 12)
    y = np.sin(2 * x)
    post = fit(SE1.with_log_params(np.log([1.0, 0.5])), x, y, Homoskedastic(1e-12))
    p = post.predict(x)
    assert np.max(np.abs(p.mean - y)) <= 1e-6
    assert np.max(p.latent_var) <= 1e-6


def test_solve_residual():
    rng = np.random.default_rng(0)
    x = rng.uniform(0, 5, 40)
    y = np.cos(x) + 0.1 * rng.standard_normal(40)
    post = fit(SE1, x, y, Homoskedastic(0.01))
    K = SE1.gram(x) + 0.01 * np.eye(40)
    assert np.linalg.norm(K @ post.alpha - y) <= 1e-8 * np.linalg.norm(y)


def test_per_string_noise_keying():
    noise = PerString([0.0, 0.5, 1.0], [0.1, 0.7])
    assert np.allclose(noise.variances(np.array([0.25, 0.75, 0.5, 0.0, 1.0])), [0.1, 0.7, 0.1, 0.1, 0.7])


def test_per_string_equal_variances_match_homoskedastic():
    rng = np.random.default_rng(1)
    sk = two_string_kernel()
    x = rng.uniform(0, 1, 30)
    y = rng.standard_normal(30)
    xs = np.linspace(0, 1, 17)
    a = fit(sk, x, y, PerString(sk.partition, [0.05, 0.05]))
    b = fit(sk, x, y, Homoskedastic(0.05))
    pa, pb = a.predict(xs), b.predict(xs)
    assert np.max(np.abs(pa.mean - pb.mean)) <= 1e-10
    assert np.max(np.abs(pa.predictive_var - pb.predictive_var)) <= 1e-10
    assert a.log_marginal_likelihood() == pytest.approx(b.log_marginal_likelihood(), abs=1e-10)


def test_far_field_reverts_to_prior():
    post = fit(SE1, [0.0, 0.3], [1.0, -2.0], Homoskedastic(0.1))
    p = post.predict([100.0])
    assert abs(p.mean[0]) < 1e-12
    assert p.latent_var[0] == pytest.approx(1.0, abs=1e-12)
    assert p.predictive_var[0] == pytest.approx(1.1, abs=1e-12)


def test_training_point_with_tiny_noise():
    post = fit(SE1, [0.0, 1.0, 2.5], [1.0, -1.0, 0.3], Homoskedastic(1e-10))
    p = post.predict([1.0])
    assert p.mean[0] == pytest.approx(-1.0, abs=1e-6)
    assert p.latent_var[0] < 1e-8


def test_lml_scalar_closed_form():
    post = fit(SE1, [0.0], [0.0], Homoskedastic(1.0))
    assert log_marginal_likelihood(post) == pytest.approx(-0.5 * np.log(2) - 0.5 * np.log(2 * np.pi), abs=1e-14)


def test_lml_permutation_invariant():
    rng = np.random.default_rng(2)
    sk = two_string_kernel()
    x = rng.uniform(0, 1, 25)
    y = rng.standard_normal(25)
    perm = rng.permutation(25)
    noise = PerString(sk.partition, [0.1, 0.3])
    assert fit(sk, x, y, noise).log_marginal_likelihood() == pytest.approx(
        fit(sk, x[perm], y[perm], noise).log_marginal_likelihood(), abs=1e-8)


def test_lml_matches_dense_inverse():
    rng = np.random.default_rng(3)
    for _ in range(50):
        ell, s2, sn = np.exp(rng.uniform(-1.5, 0.5, 3))
        k = SquaredExponential(variance=s2, lengthscale=ell)
        x = rng.uniform(0, 4, 50)
        y = rng.standard_normal(50)
        K = k.gram(x) + sn * np.eye(50)
        naive = (-0.5 * y @ np.linalg.inv(K) @ y - 0.5 * np.linalg.slogdet(K)[1]
                 - 25 * np.log(2 * np.pi))
        got = fit(k, x, y, Homoskedastic(sn)).log_marginal_likelihood()
        assert got == pytest.approx(naive, rel=1e-6)
        assert got == pytest.approx(multivariate_normal(np.zeros(50), K).logpdf(y), rel=1e-6)


def test_latent_variance_bounded_by_prior():
    rng = np.random.default_rng(4)
    k = Matern52(variance=1.7, lengthscale=0.4)
    x = rng.uniform(0, 3, 20)
    post = fit(k, x, rng.standard_normal(20), Homoskedastic(0.2))
    p = post.predict(np.linspace(-1, 4, 101))
    assert np.all(p.latent_var <= 1.7 + 1e-8)


def test_information_monotonicity():
    rng = np.random.default_rng(5)
    sk = two_string_kernel()
    for _ in range(20):
        x = rng.uniform(0, 1, 15)
        y = rng.standard_normal(15)
        xs = rng.uniform(0, 1, 10)
        v1 = fit(sk, x[:-1], y[:-1], Homoskedastic(0.1)).predict(xs).latent_var
        v2 = fit(sk, x, y, Homoskedastic(0.1)).predict(xs).latent_var
        assert np.all(v2 <= v1 + 1e-8)


def test_full_cov_consistent_with_marginals():
    rng = np.random.default_rng(6)
    x = rng.uniform(0, 3, 10)
    post = fit(SE1, x, np.sin(x), Homoskedastic(0.05))
    xs = np.linspace(0, 3, 7)
    full = predict(post, xs, full_cov=True)
    marg = predict(post, xs)
    assert full.latent_var.shape == (7, 7)
    assert np.allclose(np.diag(full.latent_var), marg.latent_var, atol=1e-12)


def test_gradient_of_sine_at_peak():
    x = np.linspace(0, np.pi, 40)
    k = SquaredExponential(variance=1.0, lengthscale=0.8)
    post = fit(k, x, np.sin(x), Homoskedastic(1e-8))
    p = predict_gradient(post, [np.pi / 2, 1.0])
    assert abs(p.grad_mean[0, 0]) <= 1e-2
    assert p.grad_mean[1, 0] == pytest.approx(np.cos(1.0), abs=1e-2)


def test_gradient_zero_for_symmetric_data():
    x = np.linspace(-2, 2, 21)
    post = fit(SE1, x, np.cos(x) + x**2, Homoskedastic(0.01))
    assert abs(predict_gradient(post, [0.0]).grad_mean[0, 0]) <= 1e-8


def test_gradient_matches_finite_difference_of_mean():
    rng = np.random.default_rng(7)
    sk = two_string_kernel()
    x = np.sort(rng.uniform(0, 1, 40))
    y = np.sin(6 * x) + 0.05 * rng.standard_normal(40)
    post = fit(sk, x, y, PerString(sk.partition, [0.01, 0.02]))
    xs = np.linspace(0.02, 0.98, 49)
    g = predict_gradient(post, xs).grad_mean[:, 0]
    h = 1e-4
    fd = (post.predict(xs + h).mean - post.predict(xs - h).mean) / (2 * h)
    big = np.abs(fd) > 0.1
    assert big.sum() > 20
    assert np.all(np.abs(g[big] - fd[big]) <= 1e-3 * np.abs(fd[big]))


def test_string_gradient_equals_joint_dgp_posterior():
    rng = np.random.default_rng(8)
    sk = two_string_kernel()
    x = rng.uniform(0, 1, 25)
    y = rng.standard_normal(25)
    xs = np.array([0.1, 0.5, 0.62, 0.9])
    sn = 0.05
    p = predict_gradient(fit(sk, x, y, Homoskedastic(sn)), xs)
    # joint prior of (z(x), z(xs), z'(xs)) from full derivative blocks
    allx = np.r_[x, xs]
    G = sk.gram(allx, with_derivatives=True)
    n, m = x.size, xs.size
    N = n + m
    Kyy = G[:n, :n] + sn * np.eye(n)
    Kyd = G[:n, N + n:]
    Kdd = G[N + n:, N + n:]
    mean = Kyd.T @ np.linalg.solve(Kyy, y)
    var = np.diag(Kdd - Kyd.T @ np.linalg.solve(Kyy, Kyd))
    assert np.max(np.abs(p.grad_mean[:, 0] - mean)) <= 1e-8
    assert np.max(np.abs(p.grad_var[:, 0] - var)) <= 1e-8


def test_predictive_loglik_at_mean():
    post = fit(SE1, [0.0, 1.0], [0.5, -0.5], Homoskedastic(0.3))
    p = post.predict([0.4])
    v = p.predictive_var[0]
    assert predictive_log_likelihood(post, [0.4], p.mean) == pytest.approx(-0.5 * np.log(2 * np.pi * v), abs=1e-12)


def test_predictive_loglik_at_training_point_is_large():
    post = fit(SE1, [0.0, 1.0], [0.5, -0.5], Homoskedastic(1e-8))
    assert predictive_log_likelihood(post, [0.0], [0.5]) > 5.0


def test_predictive_loglik_monte_carlo():
    post = fit(SE1, [0.0, 0.7, 1.5], [0.3, -0.2, 0.8], Homoskedastic(0.2))
    xs, ys = np.array([0.3, 1.0, 2.0]), np.array([0.1, 0.0, 1.1])
    p = post.predict(xs)
    rng = np.random.default_rng(9)
    total = 0.0
    for j in range(3):
        acc = 0.0
        for _ in range(10):
            f = p.mean[j] + np.sqrt(p.latent_var[j]) * rng.standard_normal(1_000_000)
            acc += np.mean(np.exp(-0.5 * (ys[j] - f) ** 2 / 0.2) / np.sqrt(2 * np.pi * 0.2))
        total += np.log(acc / 10)
    assert predictive_log_likelihood(post, xs, ys) == pytest.approx(total, abs=1e-3)


def test_capability_error_without_derivatives():
    class ValuesOnly:
        ndim = 1

        def gram(self, X, Y=None):
            return SE1.gram(X, Y)

        def diag(self, X):
            return SE1.diag(X)

    post = fit(ValuesOnly(), [0.0, 1.0], [1.0, 2.0], Homoskedastic(0.1))
    assert post.predict([0.5]).mean.shape == (1,)
    with pytest.raises(CapabilityError):
        predict_gradient(post, [0.5])


def test_ill_conditioned_error():
    class Broken:
        ndim = 1

        def gram(self, X, Y=None):
            return -np.ones((len(X), len(X)))

        def diag(self, X):
            return -np.ones(len(X))

    with pytest.raises(IllConditionedError):
        fit(Broken(), [0.0, 1.0], [1.0, 2.0], Homoskedastic(1e-3))


def test_input_validation():
    with pytest.raises(ValueError):
        fit(SE1, [0.0, 1.0], [1.0], Homoskedastic(0.1))
    with pytest.raises(ValueError):
        fit(SE1, [0.0, np.nan], [1.0, 2.0], Homoskedastic(0.1))
    with pytest.raises(ValueError):
        Homoskedastic(0.0)
    with pytest.raises(ValueError):
        PerString([0.0, 1.0], [0.1, 0.2])


def test_string_posterior_mean_c1_at_boundary():
    rng = np.random.default_rng(10)
    sk = two_string_kernel()
    x = rng.uniform(0, 1, 40)
    y = np.sin(5 * x) + 0.1 * rng.standard_normal(40)
    post = fit(sk, x, y, PerString(sk.partition, [0.01, 0.05]))
    h = 1e-5
    m = lambda t: post.predict(np.atleast_1d(t)).mean[0]
    left = (m(0.5) - m(0.5 - h)) / h
    right = (m(0.5 + h) - m(0.5)) / h
    assert abs(left - right) <= 1e-3 * max(abs(left), abs(right))
