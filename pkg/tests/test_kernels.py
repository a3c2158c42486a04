"""Cross-backend equivalence between the compiled and pure NumPy kernels."""

import numpy as np
import pytest

from miembed import kernels

pytestmark = pytest.mark.skipif(
    "cython" not in kernels.available_backends(),
    reason="compiled extension not built",
)


def random_inputs(rng, n=6, f=7, s=4, t=9):
    weight = rng.normal(size=(s, f)) * 0.7
    feats = rng.normal(size=(n, f))
    labels = rng.normal(size=(t, s))
    labels /= np.linalg.norm(labels, axis=1, keepdims=True)
    pos = np.sort(rng.choice(t, size=3, replace=False)).astype(np.intp)
    neg = np.array(sorted(set(range(t)) - set(pos.tolist())), dtype=np.intp)
    return weight, feats, labels, pos, neg


def test_embed_features_agree():
    rng = np.random.default_rng(0)
    for _ in range(10):
        weight, feats, *_ = random_inputs(rng)
        s1, e1, n1 = kernels._BY_NAME["cython"].embed_features(weight, feats)
        s2, e2, n2 = kernels._BY_NAME["python"].embed_features(weight, feats)
        assert s1 == s2 == -1
        np.testing.assert_allclose(e1, e2, rtol=1e-13, atol=1e-15)
        np.testing.assert_allclose(n1, n2, rtol=1e-13)


def test_min_label_distances_agree():
    rng = np.random.default_rng(1)
    for _ in range(10):
        weight, feats, labels, _, _ = random_inputs(rng)
        s1, d1, a1 = kernels._BY_NAME["cython"].min_label_distances(weight, feats, labels)
        s2, d2, a2 = kernels._BY_NAME["python"].min_label_distances(weight, feats, labels)
        assert s1 == s2 == -1
        np.testing.assert_allclose(d1, d2, rtol=1e-12, atol=1e-15)
        assert np.array_equal(a1, a2)


@pytest.mark.parametrize("whole", [False, True])
@pytest.mark.parametrize("rank_weighted", [False, True])
@pytest.mark.parametrize("exclude", [False, True])
@pytest.mark.parametrize("force_unit", [False, True])
def test_ranking_loss_grad_agree(whole, rank_weighted, exclude, force_unit):
    rng = np.random.default_rng(2)
    for _ in range(5):
        weight, feats, labels, pos, neg = random_inputs(rng)
        g1 = np.zeros_like(weight)
        g2 = np.zeros_like(weight)
        s1, v1 = kernels._BY_NAME["cython"].ranking_loss_grad(
            weight, feats, labels, pos, neg, 0.1, whole, rank_weighted, exclude, force_unit, g1
        )
        s2, v2 = kernels._BY_NAME["python"].ranking_loss_grad(
            weight, feats, labels, pos, neg, 0.1, whole, rank_weighted, exclude, force_unit, g2
        )
        assert s1 == s2 == -1
        assert v1 == pytest.approx(v2, rel=1e-12)
        np.testing.assert_allclose(g1, g2, rtol=1e-11, atol=1e-13)


def test_zero_norm_status_agrees():
    weight = np.zeros((3, 4))
    feats = np.ones((2, 4))
    labels = np.eye(3)
    for name in kernels.available_backends():
        mod = kernels._BY_NAME[name]
        status, emb, norms = mod.embed_features(weight, feats)
        assert status == 0
        assert emb is None and norms is None
        status, dmin, argmin = mod.min_label_distances(weight, feats, labels)
        assert status == 0
        grad = np.zeros_like(weight)
        status, value = mod.ranking_loss_grad(
            weight, feats, labels,
            np.array([0], dtype=np.intp), np.array([1, 2], dtype=np.intp),
            0.1, False, False, False, False, grad,
        )
        assert status == 0 and value == 0.0


def test_zero_norm_reports_first_offending_instance():
    rng = np.random.default_rng(3)
    weight = rng.normal(size=(3, 4))
    feats = rng.normal(size=(4, 4))
    feats[2] = 0.0  # W @ 0 has zero norm
    labels = np.eye(3)
    for name in kernels.available_backends():
        status, _, _ = kernels._BY_NAME[name].embed_features(weight, feats)
        assert status == 2


def test_backend_selection_helpers():
    assert set(kernels.available_backends()) <= {"cython", "python"}
    with kernels.use_backend("python"):
        assert kernels.backend_name() == "python"
    with pytest.raises(ValueError, match="unknown backend"):
        with kernels.use_backend("fortran"):
            pass
