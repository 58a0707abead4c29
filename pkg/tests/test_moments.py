import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from spectral_hmm import (
    MomentSet, Projection, SingularMomentError, StructuralZeroWarning, TripleSample,
    compute_projection, empirical_moments, exact_joint_distributions, exact_moments,
    lambda_of, moments_from_distributions, random_hmm, range_residual, sample_triples,
    sigma_min,
)
from spectral_hmm.distributions import distributions_from_dense_counts
from spectral_hmm.hmm import exact_trigram_tensor, sample_trigram_counts
from spectral_hmm.io import moments_from_dict, moments_to_dict

from oracles import loop_moments, path_sum_triples

finite = st.floats(-10, 10, allow_nan=False)


def _svd_u(hmm):
    return compute_projection(exact_joint_distributions(hmm).P21, hmm.m).U


# --- examples ------------------------------------------------------------

def test_single_triple_moments():
    mom = empirical_moments(TripleSample([[0, 1, 2]]), np.eye(3))
    np.testing.assert_array_equal(mom.mu, [1, 0, 0])
    expected_sigma = np.zeros((3, 3))
    expected_sigma[1, 0] = 1
    np.testing.assert_array_equal(mom.sigma, expected_sigma)
    expected_k = np.zeros((3, 3))
    expected_k[2, 0] = 1
    np.testing.assert_array_equal(mom.kappa[:, :, 1], expected_k)
    assert np.count_nonzero(mom.kappa) == 1
    assert mom.provenance == "empirical" and mom.N == 1


def test_identity_moments(ident):
    for mom in (empirical_moments(sample_triples(ident, 100, seed=0), np.eye(2)),
                exact_moments(ident, np.eye(2))):
        np.testing.assert_array_equal(mom.mu, [1, 0])
        np.testing.assert_array_equal(mom.sigma, [[1, 0], [0, 0]])
        assert mom.kappa[0, 0, 0] == 1 and mom.kappa.sum() == 1


def test_hmm_a_mu(hmmA):
    np.testing.assert_allclose(exact_moments(hmmA, np.eye(2)).mu, [0.55, 0.45], atol=1e-15)
    emp = empirical_moments(sample_triples(hmmA, 10**6, seed=4), np.eye(2))
    assert np.max(np.abs(emp.mu - [0.55, 0.45])) < 0.003


def test_dimension_mismatch(hmmA):
    with pytest.raises(ValueError):
        exact_moments(hmmA, np.eye(3))
    with pytest.raises(ValueError):
        empirical_moments(TripleSample([[0, 1, 1]]), np.eye(3), v=2)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 3), st.integers(0, 3), st.integers(0, 10**6))
def test_exact_moments_match_loop_oracle(m, extra, seed):
    hmm = random_hmm(m, m + extra, seed=seed)
    rng = np.random.default_rng(seed)
    U = rng.standard_normal((hmm.v, m))
    mom = exact_moments(hmm, U)
    mu, S, kap = loop_moments(path_sum_triples(hmm.T, hmm.O, hmm.pi), U)
    np.testing.assert_allclose(mom.mu, mu, atol=1e-10)
    np.testing.assert_allclose(mom.sigma, S, atol=1e-10)
    np.testing.assert_allclose(mom.kappa, kap, atol=1e-10)
    via_dists = moments_from_distributions(exact_joint_distributions(hmm), U, "exact")
    assert mom.max_abs_diff(via_dists) < 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 3), st.integers(0, 3), st.integers(0, 10**6))
def test_sigma_is_projected_bigram(m, extra, seed):
    hmm = random_hmm(m, m + extra, seed=seed)
    P21 = exact_joint_distributions(hmm).P21_dense()
    U = _svd_u(hmm)
    np.testing.assert_allclose(exact_moments(hmm, U).sigma, U.T @ P21 @ U, atol=1e-12)


def test_kappa_order_switch(hmmA):
    d = exact_joint_distributions(hmmA)
    U = np.array([[1.0, 0.3], [0.2, 1.0]])
    a = moments_from_distributions(d, U, kappa_order="y3y1")
    b = moments_from_distributions(d, U, kappa_order="y1y3")
    np.testing.assert_allclose(b.kappa, a.kappa.transpose(1, 0, 2))
    with pytest.raises(ValueError):
        moments_from_distributions(d, U, kappa_order="x")


def test_empirical_is_order_independent(hmmA):
    s = sample_triples(hmmA, 5000, seed=9)
    shuffled = TripleSample(s.triples[np.random.default_rng(0).permutation(s.N)])
    U = np.array([[0.8, -0.6], [0.6, 0.8]])
    a, b = empirical_moments(s, U), empirical_moments(shuffled, U)
    assert a.max_abs_diff(b) == 0.0


@settings(max_examples=50, deadline=None)
@given(arrays(float, (3, 3, 3), elements=finite), arrays(float, 3, elements=finite),
       arrays(float, 3, elements=finite), finite, finite)
def test_k_is_linear(kappa, a, b, alpha, beta):
    mom = MomentSet(np.ones(3), np.eye(3), kappa)
    lhs = mom.K(alpha * a + beta * b)
    rhs = alpha * mom.K(a) + beta * mom.K(b)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12 * max(1.0, np.abs(kappa).sum() * 400))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.floats(0, 2 * np.pi))
def test_moments_transform_under_rotation(seed, theta):
    hmm = random_hmm(2, 4, seed=seed)
    U = _svd_u(hmm)
    R = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    a, b = exact_moments(hmm, U), exact_moments(hmm, U @ R)
    np.testing.assert_allclose(b.mu, R.T @ a.mu, atol=1e-12)
    np.testing.assert_allclose(b.sigma, R.T @ a.sigma @ R, atol=1e-12)
    np.testing.assert_allclose(b.kappa, np.einsum("abc,ai,bk,cj->ikj", a.kappa, R, R, R),
                               atol=1e-12)
    assert sigma_min(b.sigma) == pytest.approx(sigma_min(a.sigma), rel=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 3), st.integers(0, 4), st.integers(0, 10**6))
def test_svd_projection_spans_emissions(m, extra, seed):
    hmm = random_hmm(m, m + extra, seed=seed)
    U = compute_projection(exact_joint_distributions(hmm).P21, m)
    np.testing.assert_allclose(U.U.T @ U.U, np.eye(m), atol=1e-10)
    assert range_residual(U, hmm.O) < 1e-10
    assert range_residual(U.U[:, :1], hmm.O) > 1e-6


# --- Lambda and sigma_m ----------------------------------------------------

def test_lambda_zero_for_identity_sigma():
    mom = MomentSet(np.ones(2), np.eye(2), np.ones((2, 2, 2)))
    with pytest.warns(StructuralZeroWarning):
        assert lambda_of(mom) == 0.0


def test_lambda_brute_force(hmmA):
    mom = exact_moments(hmmA, np.eye(2))
    inv = np.linalg.inv(mom.sigma)
    entries = [abs(x) for x in mom.mu] + [abs(inv[i, j]) for i in range(2) for j in range(2)]
    entries += [abs(mom.kappa[i, j, k]) for i in range(2) for j in range(2) for k in range(2)]
    assert lambda_of(mom) == min(entries)


def test_lambda_halves_with_kappa():
    kappa = np.full((2, 2, 2), 0.4)
    kappa[1, 0, 1] = 0.05
    mom = MomentSet(np.array([0.9, 0.8]), np.array([[2.0, 1.0], [1.0, 3.0]]), kappa)
    half = MomentSet(mom.mu, mom.sigma, 0.5 * kappa)
    assert lambda_of(mom) == pytest.approx(0.05)
    assert lambda_of(half) == pytest.approx(0.025)


def test_lambda_singular_sigma(ident):
    mom = exact_moments(ident, np.eye(2))
    with pytest.raises(SingularMomentError) as info:
        lambda_of(mom)
    assert info.value.sigma_min == 0.0


def test_sigma_min_examples():
    assert sigma_min(np.eye(2)) == 1.0
    assert sigma_min(np.diag([3.0, 0.2])) == pytest.approx(0.2, abs=1e-15)


@settings(max_examples=50, deadline=None)
@given(arrays(float, (3, 3), elements=finite))
def test_sigma_min_eigen_oracle(M):
    # compare squares: the square root is ill-conditioned near singular M
    ev = np.linalg.eigvalsh(M.T @ M)[0]
    scale = max(1.0, np.abs(M).max() ** 2)
    assert sigma_min(M) ** 2 == pytest.approx(ev, abs=1e-10 * scale)


def test_projection_is_immutable():
    P = Projection(np.eye(2), "custom")
    with pytest.raises(ValueError):
        P.U[0, 0] = 3.0
    assert P.embed(1).tolist() == [0.0, 1.0]


# --- consistency and serialisation -----------------------------------------

def test_moment_error_decays_like_inverse_sqrt(hmmA):
    U = np.array([[0.8, -0.6], [0.6, 0.8]])
    exact = exact_moments(hmmA, U)
    Ns = [10**3, 10**4, 10**5, 10**6]
    med = []
    for N in Ns:
        errs = []
        for seed in range(15):
            d = distributions_from_dense_counts(sample_trigram_counts(hmmA, N, seed=seed))
            errs.append(moments_from_distributions(d, U).max_abs_diff(exact))
        med.append(np.median(errs))
    slope = np.polyfit(np.log(Ns), np.log(med), 1)[0]
    assert -0.65 <= slope <= -0.35


def test_dense_counts_match_triple_path(hmmA):
    s = sample_triples(hmmA, 2000, seed=1)
    counts = np.zeros((2, 2, 2), dtype=np.int64)
    np.add.at(counts, tuple(s.triples.T), 1)
    U = np.array([[1.0, 0.5], [-0.3, 1.0]])
    a = empirical_moments(s, U)
    b = moments_from_distributions(distributions_from_dense_counts(counts), U)
    assert a.max_abs_diff(b) < 1e-15


def test_moments_round_trip(hmmA):
    mom = exact_moments(hmmA, np.array([[0.3, 0.1], [0.7, 0.2]]))
    back = moments_from_dict(moments_to_dict(mom))
    assert back.max_abs_diff(mom) == 0.0
    assert back.provenance == "exact"
    np.testing.assert_array_equal(exact_trigram_tensor(hmmA).shape, (2, 2, 2))
