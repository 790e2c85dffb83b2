import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import frechet_dense, inception_score_loops, random_psd, sqrtm_psd_dense, tei_scalar
from ssce.metrics import (
    ConvergenceError, FeatureStatistics, TEIInputs, accuracy, evaluate_gan_quality, feature_stats, frechet_distance,
    inception_score, jacobi_eigh, psd_sqrt, psd_sqrt_of_product, tei, trace_sqrt_product_lowrank, two_sample_baseline,
)


def _stats(m, c, n=10):
    return FeatureStatistics(np.asarray(m, float), np.asarray(c, float), n)


# -- eigensolver --------------------------------------------------------------------------


@pytest.mark.parametrize("d", [1, 2, 3, 5, 8, 17])
def test_jacobi_matches_lapack(d, rng):
    a = rng.normal(size=(d, d))
    a = a + a.T
    w, v = jacobi_eigh(a)
    np.testing.assert_allclose(w, np.linalg.eigvalsh(a), atol=1e-10)
    np.testing.assert_allclose(v.T @ v, np.eye(d), atol=1e-12)
    np.testing.assert_allclose((v * w) @ v.T, a, atol=1e-10)


def test_jacobi_repeated_eigenvalues():
    w, v = jacobi_eigh(np.eye(4) * 3.0)
    np.testing.assert_array_equal(w, [3.0] * 4)


def test_jacobi_iteration_cap(rng):
    a = rng.normal(size=(6, 6))
    with pytest.raises(ConvergenceError):
        jacobi_eigh(a + a.T, max_sweeps=1)


def test_psd_sqrt_squares_back(rng):
    c = random_psd(6, rng)
    r = psd_sqrt(c)
    np.testing.assert_allclose(r @ r, c, atol=1e-10)
    np.testing.assert_allclose(r, sqrtm_psd_dense(c), atol=1e-10)


# -- Frechet distance ---------------------------------------------------------------------


def test_frechet_matches_dense_oracle_on_random_pairs():
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(100):
        d = int(rng.integers(1, 9))
        ca, cb = random_psd(d, rng), random_psd(d, rng)
        ma, mb = rng.normal(size=d), rng.normal(size=d)
        worst = max(worst, abs(frechet_distance(_stats(ma, ca), _stats(mb, cb)) - frechet_dense(ma, ca, mb, cb)))
    assert worst < 1e-8


def test_frechet_rank_deficient_pairs():
    # sqrt of roundoff-level eigenvalues limits both routes to about sqrt(eps)
    rng = np.random.default_rng(1)
    for _ in range(100):
        d = int(rng.integers(2, 9))
        ca, cb = random_psd(d, rng), random_psd(d, rng, rank=int(rng.integers(1, d)))
        ma, mb = rng.normal(size=d), rng.normal(size=d)
        assert abs(frechet_distance(_stats(ma, ca), _stats(mb, cb)) - frechet_dense(ma, ca, mb, cb)) < 1e-6


def test_trace_sqrt_product_matches_oracle(rng):
    ca, cb = random_psd(4, rng), random_psd(4, rng)
    ra = sqrtm_psd_dense(ca)
    expected = np.sqrt(np.clip(np.linalg.eigvalsh(ra @ cb @ ra), 0, None)).sum()
    assert abs(np.trace(psd_sqrt_of_product(ca, cb)) - expected) < 1e-8


def test_scalar_closed_form():
    assert frechet_distance(_stats([1.0], [[4.0]]), _stats([0.0], [[1.0]])) == pytest.approx(2.0, abs=1e-12)


def test_diagonal_closed_form():
    a, b = _stats([0, 0], np.diag([4.0, 9.0])), _stats([0, 0], np.eye(2))
    assert frechet_distance(a, b) == pytest.approx(5.0, abs=1e-12)


def test_sqrt_term_scalars():
    assert np.trace(psd_sqrt_of_product(np.diag([4.0]), np.diag([9.0]))) == pytest.approx(6.0, abs=1e-12)


def test_identity_pair_trace():
    assert np.trace(psd_sqrt_of_product(np.eye(5), np.eye(5))) == pytest.approx(5.0, abs=1e-12)


def test_self_distance_zero_and_symmetry(rng):
    for d in (3, 8, 40):
        x, y = rng.normal(size=(60, d)), rng.normal(size=(50, d)) * 1.5 + 0.3
        a, b = feature_stats(x), feature_stats(y)
        assert abs(frechet_distance(a, a)) < 1e-6
        assert frechet_distance(a, b) >= 0
        assert abs(frechet_distance(a, b) - frechet_distance(b, a)) < 1e-9


def test_lowrank_path_matches_dense(rng):
    # n <= d keeps the factor and routes through the small Gram solve
    x, y = rng.normal(size=(12, 30)), rng.normal(size=(10, 30)) + 0.5
    a, b = feature_stats(x), feature_stats(y)
    assert a.factor is not None
    # exact route: the cross term is the nuclear norm of F_b F_a^T
    nuclear = np.linalg.svd(b.factor @ a.factor.T, compute_uv=False).sum()
    assert abs(trace_sqrt_product_lowrank(a.factor, b.factor) - nuclear) < 1e-10
    assert abs(frechet_distance(a, b) - frechet_dense(a.m, a.C, b.m, b.C)) < 1e-5


def test_dimension_mismatch():
    with pytest.raises(ValueError, match="dimension"):
        frechet_distance(_stats([0.0], [[1.0]]), _stats([0.0, 0.0], np.eye(2)))


# -- feature statistics ------------------------------------------------------------------


def test_feature_stats_hand_case():
    s = feature_stats([[0.0, 0.0], [2.0, 2.0]])
    np.testing.assert_array_equal(s.m, [1.0, 1.0])
    np.testing.assert_array_equal(s.C, [[2.0, 2.0], [2.0, 2.0]])
    assert s.n == 2


def test_feature_stats_constant_and_permutation(rng):
    assert np.all(feature_stats(np.ones((5, 3))).C == 0)
    x = rng.normal(size=(20, 4))
    a, b = feature_stats(x), feature_stats(x[rng.permutation(20)])
    np.testing.assert_allclose(a.m, b.m, atol=1e-14)
    np.testing.assert_allclose(a.C, b.C, atol=1e-13)
    np.testing.assert_allclose(a.C, np.cov(x, rowvar=False), atol=1e-13)


def test_feature_stats_needs_two_rows():
    with pytest.raises(ValueError, match="at least 2"):
        feature_stats(np.zeros((1, 3)))


# -- inception score -------------------------------------------------------------------


def test_uniform_rows_score_one():
    assert inception_score(np.full((7, 4), 0.25)) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("k", [2, 3, 10])
def test_one_hot_rows_score_k(k):
    assert abs(inception_score(np.eye(k)) - k) < 1e-9
    assert abs(inception_score(np.tile(np.eye(k), (3, 1))) - k) < 1e-9


def test_is_bounds_on_random_matrices():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        k = int(rng.integers(2, 11))
        n = int(rng.integers(1, 30))
        p = rng.dirichlet(np.full(k, rng.uniform(0.05, 3.0)), size=n)
        score = inception_score(p)
        assert 1.0 - 1e-12 <= score <= k + 1e-9


def test_is_matches_loop_oracle(rng):
    p = rng.dirichlet(np.ones(5), size=40)
    assert inception_score(p) == pytest.approx(inception_score_loops(p), rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 12), st.integers(2, 6)), elements=st.floats(0.0, 1.0)))
def test_is_bounds_property(raw):
    raw = raw + 1e-3
    p = raw / raw.sum(axis=1, keepdims=True)
    score = inception_score(p)
    assert 1.0 - 1e-9 <= score <= p.shape[1] + 1e-9


def test_is_splits_average():
    p = np.vstack([np.eye(2), np.full((2, 2), 0.5)])
    assert inception_score(p, splits=2) == pytest.approx((2.0 + 1.0) / 2)


@pytest.mark.parametrize("bad", [np.zeros((0, 3)), np.array([[0.7, 0.7]]), np.array([[-0.1, 1.1]])])
def test_is_rejects_invalid(bad):
    with pytest.raises(ValueError):
        inception_score(bad)


# -- accuracy and TEI ------------------------------------------------------------------


@pytest.mark.parametrize("pred, lab, expected", [([0, 1, 2], [0, 1, 2], 1.0), ([0, 1, 2], [0, 1, 1], 2 / 3),
                                                 ([0, 0], [1, 1], 0.0)])
def test_accuracy(pred, lab, expected):
    assert accuracy(pred, lab) == pytest.approx(expected)


def test_accuracy_length_mismatch():
    with pytest.raises(ValueError, match="mismatch"):
        accuracy([0, 1], [0])


@pytest.mark.parametrize("acc, acc_b, t, t_b, expected", [(90.0, 69.0, 1263.7, 305.8, 3.06),
                                                         (94.9, 73.4, 1460.3, 293.2, 3.04)])
def test_tei_reference_rows(acc, acc_b, t, t_b, expected):
    value = tei(TEIInputs(acc, acc_b, t, t_b))
    assert abs(value - expected) <= 0.01
    assert value == pytest.approx(tei_scalar(acc, acc_b, t, t_b), rel=1e-15)


def test_tei_no_improvement():
    assert tei(TEIInputs(80.0, 80.0, 100.0, 10.0)) == 0.0


@pytest.mark.parametrize("t, t_b", [(10.0, 9.5), (10.0, 9.0), (5.0, 10.0)])
def test_tei_domain(t, t_b):
    with pytest.raises(ValueError, match="exceed 1 s"):
        tei(TEIInputs(90.0, 80.0, t, t_b))


def test_tei_accuracy_units():
    with pytest.raises(ValueError, match="percentage"):
        tei(TEIInputs(100.5, 80.0, 100.0, 10.0))


# -- GAN quality -----------------------------------------------------------------------


@pytest.fixture(scope="module")
def embedder_and_real():
    from ssce.data import make_shapes
    from ssce.models import build_classifier

    ds = make_shapes(n_per_class=40, resolution=16, seed=0)
    model = build_classifier("small-4conv", 16, 3, seed=0)
    model.set_normalization([float(ds.images.mean())], [float(ds.images.std())])
    model.eval()
    return model, ds.images


def _real_sampler(images):
    def sample(n, rng):
        return images[rng.choice(len(images), size=n, replace=False)] * 2.0 - 1.0

    return sample


def test_quality_is_deterministic(embedder_and_real):
    from ssce.models import build_gan

    model, real = embedder_and_real
    gen = build_gan("dcgan", latent_len=16, resolution=16).generator
    a = evaluate_gan_quality(gen, model, real, 32, seed=5)
    b = evaluate_gan_quality(gen, model, real, 32, seed=5)
    assert a == b


def test_real_sampler_vs_untrained_against_two_sample_floor(embedder_and_real):
    from ssce.models import build_gan

    model, real = embedder_and_real
    floor = two_sample_baseline(model, real, seed=0)
    fid_real, _ = evaluate_gan_quality(_real_sampler(real), model, real, 60, seed=1)
    fid_untrained, _ = evaluate_gan_quality(build_gan("dcgan", latent_len=16, resolution=16).generator, model,
                                            real, 60, seed=1)
    # a sampler of the real set sits at the noise floor, an untrained generator far above it
    assert fid_real < 2.0 * floor
    assert fid_untrained > floor
    assert fid_untrained > 5.0 * fid_real


def test_quality_needs_two_samples(embedder_and_real):
    model, real = embedder_and_real
    with pytest.raises(ValueError, match="n_synth"):
        evaluate_gan_quality(_real_sampler(real), model, real, 1, seed=0)


def test_is_log_clamp_handles_zeros():
    assert math.isfinite(inception_score(np.array([[1.0, 0.0], [1.0, 0.0]])))
