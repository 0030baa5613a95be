import numpy as np
import pytest

from infinite_label.bilinear import BilinearModel, score
from infinite_label.errors import ContractError
from infinite_label.synthgen import (PAPER_LABEL_COV, PAPER_LABEL_MEAN, AnnotationMatrix, GmmParams,
                                     LabelGaussian, SynthConfig, SyntheticWorld, annotate, dirichlet,
                                     generate_world, make_world, sample_data, sample_gmm_params,
                                     sample_labels)


def _world(flip_prob=0.0, seed=0, d=3, n=2):
    return make_world(SynthConfig(d=d, n=n, flip_prob=flip_prob), seed)


def test_gmm_params_paper_shape():
    gmm = sample_gmm_params(3, 5, 3.0, seed=1)
    assert gmm.means.shape == (5, 3)
    assert gmm.factors.shape == (5, 3, 3)
    assert abs(gmm.weights.sum() - 1.0) <= 1e-12
    assert np.all(gmm.weights >= 0)


def test_single_component_has_unit_weight():
    for alpha in (0.1, 3.0, 50.0):
        assert sample_gmm_params(2, 1, alpha, seed=4).weights.tolist() == [1.0]


def test_dirichlet_moments():
    draws = dirichlet(3.0, 5, np.random.default_rng(0), size=100_000)
    assert np.allclose(draws.sum(axis=1), 1.0, atol=1e-12)
    # Var of a Dir(3,...,3) coordinate with k=5: a(a0 - a) / (a0^2 (a0 + 1)) = 0.01
    se = np.sqrt(0.01 / draws.shape[0])
    assert np.all(np.abs(draws.mean(axis=0) - 0.2) <= 3 * se)


def test_sample_data_shape():
    gmm = sample_gmm_params(3, 5, 3.0, seed=2)
    assert sample_data(gmm, 500, seed=3).shape == (500, 3)


def test_degenerate_covariance_returns_means():
    gmm = sample_gmm_params(3, 4, 3.0, seed=5)
    flat = GmmParams(gmm.weights, gmm.means, np.zeros_like(gmm.factors))
    x = sample_data(flat, 200, seed=6)
    assert all(any(np.array_equal(row, mu) for mu in flat.means) for row in x)


def test_data_mean_matches_mixture_mean():
    gmm = sample_gmm_params(3, 5, 3.0, seed=7)
    x = sample_data(gmm, 100_000, seed=8)
    mu = gmm.mean()
    second = sum(w * (f @ f.T + np.outer(m, m)) for w, m, f in zip(gmm.weights, gmm.means, gmm.factors))
    var = np.diag(second - np.outer(mu, mu))
    se = np.sqrt(var / x.shape[0])
    assert np.all(np.abs(x.mean(axis=0) - mu) <= 3 * se)


def test_label_sample_shape_and_point_mass():
    dist = LabelGaussian(np.array(PAPER_LABEL_MEAN), np.array(PAPER_LABEL_COV))
    assert sample_labels(dist, 10, seed=0).shape == (10, 2)
    point = LabelGaussian(np.array([2.0, 3.0]), np.zeros((2, 2)))
    assert np.all(sample_labels(point, 25, seed=1) == [2.0, 3.0])


def test_label_covariance_moment():
    dist = LabelGaussian(np.array(PAPER_LABEL_MEAN), np.array(PAPER_LABEL_COV))
    lab = sample_labels(dist, 100_000, seed=2)
    c = np.cov(lab.T)[0, 1]
    # Var(x1 x2) for a bivariate normal is s11 s22 + s12^2
    se = np.sqrt((1.0 * 3.0 + 1.5 ** 2) / lab.shape[0])
    assert abs(c - 1.5) <= 3 * se


def test_label_cov_not_psd_raises():
    dist = LabelGaussian(np.zeros(2), np.array([[1.0, 0.0], [0.0, -1.0]]))
    with pytest.raises(ArithmeticError):
        sample_labels(dist, 3, seed=0)


def test_annotate_noise_extremes():
    rng = np.random.default_rng(0)
    x, labels = rng.standard_normal((30, 3)), rng.standard_normal((20, 2))
    clean = annotate(_world(0.0), x, labels, seed=1)
    assert np.array_equal(clean.values, clean.noiseless)
    flipped = annotate(_world(1.0), x, labels, seed=1)
    assert np.array_equal(flipped.values, -flipped.noiseless)


def test_annotate_flip_rate():
    rng = np.random.default_rng(1)
    x, labels = rng.standard_normal((100, 3)), rng.standard_normal((50, 2))
    ann = annotate(_world(0.1), x, labels, seed=2)
    frac = np.mean(ann.values != ann.noiseless)
    assert abs(frac - 0.1) <= 3 * np.sqrt(0.1 * 0.9 / 5000)


def test_noiseless_annotations_match_brute_force():
    world = _world(0.0, seed=3)
    rng = np.random.default_rng(4)
    x, labels = rng.standard_normal((20, 3)), rng.standard_normal((20, 2))
    ann = annotate(world, x, labels, seed=0)
    for m in range(20):
        for l in range(20):
            expected = 1 if score(world.v_star, x[m], labels[l]) > 0 else -1
            assert ann.values[m, l] == expected


def test_tie_maps_to_minus_one():
    world = SyntheticWorld(_world().gmm, _world().label_dist, BilinearModel.zeros(2, 3), 0.0, 0)
    ann = annotate(world, np.ones((3, 3)), np.ones((2, 2)), seed=0)
    assert np.all(ann.values == -1)


def test_generate_world_paper_shapes():
    draw = generate_world(SynthConfig(), seed=0)
    assert draw.train_x.shape == (500, 3)
    assert draw.train_y.shape == (500, 10)
    assert draw.test_x.shape == (1000, 3)
    assert draw.test_y.shape == (1000, 3000)
    assert draw.seen.shape == (10, 2)
    assert draw.unseen.shape == (2990, 2)
    assert draw.world.v_star.v.shape == (2, 3)


def test_generate_world_without_unseen_labels():
    draw = generate_world(SynthConfig(m_train=20, m_test=10, l_unseen=0), seed=1)
    assert draw.unseen.shape == (0, 2)
    assert draw.test_y.shape == (10, 10)


def test_generate_world_deterministic():
    cfg = SynthConfig(m_train=50, m_test=40, l_unseen=30)
    a, b = generate_world(cfg, seed=9), generate_world(cfg, seed=9)
    for name in ("train_x", "test_x", "seen", "unseen"):
        assert getattr(a, name).tobytes() == getattr(b, name).tobytes()
    assert a.train_y.values.tobytes() == b.train_y.values.tobytes()
    assert a.test_y.values.tobytes() == b.test_y.values.tobytes()
    assert a.world.v_star.v.tobytes() == b.world.v_star.v.tobytes()


def test_changing_label_counts_keeps_data():
    a = generate_world(SynthConfig(m_train=50, m_test=40, l_unseen=30), seed=2)
    b = generate_world(SynthConfig(m_train=50, m_test=40, l_unseen=300), seed=2)
    assert np.array_equal(a.train_x, b.train_x)
    assert np.array_equal(a.seen, b.seen)
    assert np.array_equal(a.train_y.values, b.train_y.values)


def test_default_label_distribution_for_other_dims():
    dist = SynthConfig(n=4).label_distribution()
    assert np.array_equal(dist.mean, np.zeros(4))
    assert np.array_equal(dist.cov, np.eye(4))


def test_config_validation():
    with pytest.raises(ContractError):
        SynthConfig(flip_prob=1.5)
    with pytest.raises(ContractError):
        SynthConfig.from_dict({"d": 3, "bogus": 1})
    with pytest.raises(ContractError):
        AnnotationMatrix(np.array([[0, 1]]))
