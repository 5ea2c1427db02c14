import math

import numpy as np
import pytest

from densityclf.classifier import (
    UNCLASSIFIED,
    ClassPrior,
    DensityFitError,
    DimensionMismatch,
    EmptyClass,
    GenerativeClassifier,
    GmmSpec,
    UnknownClass,
    class_scores,
    estimate_priors,
    fit,
    outlier_score,
    predict,
)
from densityclf.data import Scaler, load_builtin, make_circles
from densityclf.gmm import GaussianComponent, GmmModel
from densityclf.numkit import Rng


def _blobs(seed=0, n=60):
    rng = np.random.default_rng(seed)
    x = np.vstack([rng.normal([-3, 0], [1.0, 0.5], (n, 2)), rng.normal([3, 1], [0.7, 1.2], (n, 2))])
    y = np.repeat(["A", "B"], n)
    return x, y


def _identity_scaler(d):
    return Scaler(np.zeros(d), np.ones(d))


def _fixed_model(components, log_priors, labels=("A", "B"), threshold=None):
    dens = [GmmModel([c], [1.0]) for c in components]
    d = components[0].mean.shape[0]
    return GenerativeClassifier(ClassPrior(list(labels), np.asarray(log_priors)), dens, "gmm",
                                _identity_scaler(d), threshold)


# -- priors ----------------------------------------------------------------------------

def test_priors_balanced():
    p = estimate_priors(["A", "A", "B", "B"])
    np.testing.assert_allclose(np.exp(p.log_priors), [0.5, 0.5])


def test_priors_counting():
    p = estimate_priors(["A", "A", "A", "B"])
    np.testing.assert_allclose(np.exp(p.log_priors), [0.75, 0.25])


def test_priors_saheart():
    p = estimate_priors(load_builtin("saheart").labels)
    assert p.labels == [0, 1]
    np.testing.assert_allclose(p.log_priors, [math.log(302 / 462), math.log(160 / 462)], atol=1e-15)


def test_priors_errors():
    with pytest.raises(EmptyClass):
        estimate_priors([])
    with pytest.raises(EmptyClass):
        estimate_priors(["A"], classes=["A", "B"])


# -- scores -----------------------------------------------------------------------------

def test_identical_densities_leave_prior_difference():
    comp = GaussianComponent([0.0], [[1.0]])
    lp = np.log([0.7, 0.3])
    model = _fixed_model([comp, GaussianComponent([0.0], [[1.0]])], lp)
    s = class_scores(model, np.array([[0.3], [-2.0]]))
    np.testing.assert_allclose(s[:, 0] - s[:, 1], lp[0] - lp[1], rtol=0, atol=1e-14)


def test_symmetric_gaussians_mean_point():
    model = _fixed_model([GaussianComponent([-1.0], [[1.0]]), GaussianComponent([1.0], [[1.0]])],
                         np.log([0.5, 0.5]))
    assert predict(model, np.array([[-1.0]])).labels == ["A"]
    assert predict(model, np.array([[1.0]])).labels == ["B"]


def test_posterior_matches_plain_bayes():
    model = _fixed_model([GaussianComponent([-1.0], [[0.5]]), GaussianComponent([2.0], [[2.0]])],
                         np.log([0.4, 0.6]))

    def pdf(x, m, v):
        return math.exp(-0.5 * (x - m) ** 2 / v) / math.sqrt(2 * math.pi * v)

    for x in (-2.0, 0.0, 0.6, 3.0):
        ja, jb = 0.4 * pdf(x, -1.0, 0.5), 0.6 * pdf(x, 2.0, 2.0)
        post = predict(model, np.array([[x]])).log_posterior[0]
        np.testing.assert_allclose(np.exp(post), [ja / (ja + jb), jb / (ja + jb)], atol=1e-12)


def test_tie_goes_to_lower_index():
    model = _fixed_model([GaussianComponent([0.0], [[1.0]]), GaussianComponent([0.0], [[1.0]])],
                         np.log([0.5, 0.5]))
    assert predict(model, np.array([[0.4]])).index.tolist() == [0]


def test_rejection_contract():
    model = _fixed_model([GaussianComponent([-1.0], [[1.0]]), GaussianComponent([1.0], [[1.0]])],
                         np.log([0.5, 0.5]), threshold=np.array([-5.0, -5.0]))
    pred = predict(model, np.array([[0.0], [30.0]]), use_threshold=True)
    assert pred.labels == ["A", UNCLASSIFIED]
    assert predict(model, np.array([[30.0]])).labels == ["B"]


def test_dimension_mismatch():
    x, y = _blobs()
    model = fit(x, y, GmmSpec(k=1))
    with pytest.raises(DimensionMismatch):
        class_scores(model, np.zeros((2, 3)))


# -- fit ---------------------------------------------------------------------------------

def test_fit_separates_blobs():
    x, y = _blobs()
    model = fit(x, y, GmmSpec(k=1))
    s = class_scores(model, x[:1])
    assert s[0, 0] > s[0, 1]
    assert np.mean(np.array(predict(model, x).labels) == y) > 0.97


def test_k1_matches_quadratic_discriminant():
    x, y = _blobs(1)
    model = fit(x, y, GmmSpec(k=1, reg_epsilon=1e-6))
    z = model.scaler.transform(x)
    expected = []
    for j, c in enumerate(["A", "B"]):
        rows = z[y == c]
        mu = rows.mean(axis=0)
        diff = rows - mu
        cov = diff.T @ diff / rows.shape[0] + 1e-6 * np.eye(2)
        q = z - mu
        maha = np.einsum("ij,jk,ik->i", q, np.linalg.inv(cov), q)
        expected.append(math.log(0.5) - 0.5 * maha - 0.5 * math.log(np.linalg.det(cov)) - math.log(2 * math.pi))
    np.testing.assert_allclose(class_scores(model, x), np.column_stack(expected), atol=1e-8)


def test_pooled_covariance_gives_linear_rule():
    x, y = _blobs(2)
    model = fit(x, y, GmmSpec(k=1, pooled_covariance=True))
    ca, cb = (m.components[0].cov for m in model.densities)
    np.testing.assert_array_equal(ca, cb)
    # difference of scores is affine in x: second differences vanish
    line = np.linspace(-4, 4, 9)[:, None] * np.array([[1.0, 0.5]])
    s = class_scores(model, line)
    delta = s[:, 0] - s[:, 1]
    np.testing.assert_allclose(np.diff(delta, 2), 0.0, atol=1e-9)
    with pytest.raises(ValueError):
        fit(x, y, GmmSpec(k=2, pooled_covariance=True))


def test_circles_single_gaussian_blob():
    train = make_circles(400, 0.5, 0.08, Rng(1))
    test = make_circles(400, 0.5, 0.08, Rng(2))
    model = fit(train.features, train.labels, GmmSpec(k=1))
    acc = np.mean(np.array(predict(model, test.features).labels) == test.labels)
    assert acc > 0.9


def test_fit_annotates_class():
    x, y = _blobs()
    with pytest.raises(DensityFitError) as exc:
        fit(np.vstack([x, [[0.0, 0.0]]]), np.append(y, "C"), GmmSpec(k=1))
    assert exc.value.label == "C"


def test_fit_is_deterministic():
    x, y = _blobs(3)
    a = fit(x, y, GmmSpec(k=2, seed=5))
    b = fit(x, y, GmmSpec(k=2, seed=5))
    np.testing.assert_array_equal(class_scores(a, x), class_scores(b, x))


# -- invariants ------------------------------------------------------------------------

def test_posterior_normalized_everywhere():
    x, y = _blobs(4)
    model = fit(x, y, GmmSpec(k=2))
    grid = np.random.default_rng(0).uniform(-50, 50, (200, 2))
    post = predict(model, grid).log_posterior
    np.testing.assert_allclose(np.exp(post).sum(axis=1), 1.0, atol=1e-10)


def test_prior_scaling_invariance():
    x, y = _blobs(5)
    model = fit(x, y, GmmSpec(k=1))
    tripled = fit(np.vstack([x] * 3), np.concatenate([y] * 3), GmmSpec(k=1))
    grid = np.random.default_rng(1).uniform(-6, 6, (300, 2))
    assert predict(model, grid).labels == predict(tripled, grid).labels


def test_shared_offset_leaves_decisions():
    x, y = _blobs(6)
    model = fit(x, y, GmmSpec(k=1))
    grid = np.random.default_rng(2).uniform(-6, 6, (100, 2))
    joint = class_scores(model, grid)
    shifted = joint + 17.25
    np.testing.assert_array_equal(np.argmax(joint, 1), np.argmax(shifted, 1))
    base = predict(model, grid).log_posterior
    np.testing.assert_allclose(shifted - np.logaddexp(shifted[:, 0], shifted[:, 1])[:, None], base, atol=1e-12)


def test_no_threshold_never_rejects():
    x, y = _blobs(7)
    model = fit(x, y, GmmSpec(k=1))
    far = np.random.default_rng(3).uniform(-1e3, 1e3, (100, 2))
    assert not predict(model, far).unclassified.any()


# -- outlier score ---------------------------------------------------------------------

def test_outlier_score_identity():
    x, y = _blobs(8)
    model = fit(x, y, GmmSpec(k=2))
    s = class_scores(model, x[:10])
    for j, c in enumerate(model.classes):
        np.testing.assert_allclose(outlier_score(model, x[:10], c), s[:, j] - model.prior.log_priors[j],
                                   atol=1e-12)
    with pytest.raises(UnknownClass):
        outlier_score(model, x[:1], "Z")


def test_outlier_score_separation():
    x, y = _blobs(9)
    model = fit(x, y, GmmSpec(k=1))
    centroid = x[y == "A"].mean(axis=0, keepdims=True)
    assert outlier_score(model, centroid, "A")[0] > outlier_score(model, centroid, "B")[0]


def test_far_point_below_every_class_percentile():
    ds = make_circles(400, 0.5, 0.08, Rng(3))
    model = fit(ds.features, ds.labels, GmmSpec(k=3))
    inner = np.array([[0.0, 0.0]])
    outside = np.array([[6.0, 0.0]])  # 5 units beyond the outer ring
    ll_train = model.log_likelihoods(ds.features)
    for j, c in enumerate(model.classes):
        p1 = np.percentile(ll_train[ds.labels == c, j], 1)
        assert outlier_score(model, outside, c)[0] < p1
        assert outlier_score(model, outside, c)[0] < outlier_score(model, inner, c)[0]
    assert predict(model, outside, use_threshold=True).labels == [UNCLASSIFIED]
