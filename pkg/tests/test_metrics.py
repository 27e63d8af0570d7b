import numpy as np
import pytest
import scipy.stats
from hypothesis import given, settings
from hypothesis import strategies as st

import bbscore as bb
from bbscore.errors import DataError


def brute_auc(inc, coh):
    total = 0.0
    for a in inc:
        for b in coh:
            total += 1.0 if a > b else (0.5 if a == b else 0.0)
    return total / (len(inc) * len(coh))


def random_instance(rng, tie_prone=False):
    n, m = int(rng.integers(1, 50)), int(rng.integers(1, 50))
    if tie_prone:
        return rng.integers(0, 5, n).astype(float), rng.integers(0, 5, m).astype(float)
    return rng.standard_normal(n), rng.standard_normal(m)


# ---------------------------------------------------------------------------
# AUC
# ---------------------------------------------------------------------------

def test_auc_hand_values():
    assert bb.auc([2.0], [1.0]) == 1.0
    assert bb.auc([1.0], [2.0]) == 0.0
    assert bb.auc([1.0], [1.0]) == 0.5
    assert bb.auc([1.0, 2.0], [1.0, 0.0]) == pytest.approx(0.875, abs=1e-15)


def test_auc_against_brute_force():
    rng = np.random.default_rng(0)
    for k in range(100):
        inc, coh = random_instance(rng, tie_prone=(k % 2 == 0))
        assert bb.auc(inc, coh) == pytest.approx(brute_auc(inc, coh), abs=1e-12)


def test_auc_complementarity():
    rng = np.random.default_rng(1)
    for k in range(30):
        inc, coh = random_instance(rng, tie_prone=(k % 3 == 0))
        assert bb.auc(inc, coh) + bb.auc(coh, inc) == pytest.approx(1.0, abs=1e-12)


def test_auc_against_scipy():
    rng = np.random.default_rng(2)
    for k in range(50):
        inc, coh = random_instance(rng, tie_prone=(k % 2 == 0))
        u = scipy.stats.mannwhitneyu(inc, coh, alternative="two-sided").statistic
        assert bb.auc(inc, coh) == pytest.approx(u / (len(inc) * len(coh)), abs=1e-10)


def test_auc_empty_inputs():
    with pytest.raises(DataError, match="empty"):
        bb.auc([], [1.0])
    with pytest.raises(DataError, match="empty"):
        bb.auc([1.0], [])


# ---------------------------------------------------------------------------
# pairwise accuracy
# ---------------------------------------------------------------------------

def test_pairwise_accuracy_fixture():
    # original in column 0; a win is original strictly lower, ties lose
    pairs = [[1.0, 2.0], [2.0, 1.0], [1.0, 1.0], [0.0, 5.0]]
    assert bb.pairwise_accuracy(pairs) == 0.5


def test_pairwise_accuracy_validation():
    with pytest.raises(DataError, match="no pairs"):
        bb.pairwise_accuracy(np.zeros((0, 2)))
    with pytest.raises(DataError, match=r"\(N, 2\)"):
        bb.pairwise_accuracy([[1.0, 2.0, 3.0]])


# ---------------------------------------------------------------------------
# Wasserstein-1
# ---------------------------------------------------------------------------

def test_w1_hand_values():
    assert bb.wasserstein1([0.0], [1.0]) == 1.0
    assert bb.wasserstein1([0.0, 1.0], [1.0, 2.0]) == pytest.approx(1.0, abs=1e-15)
    assert bb.wasserstein1([0.0, 2.0], [1.0, 1.0]) == pytest.approx(1.0, abs=1e-15)
    assert bb.wasserstein1([3.0, 3.0], [3.0]) == 0.0


def test_w1_equal_sizes_is_sorted_mean_abs_diff():
    rng = np.random.default_rng(3)
    for _ in range(50):
        n = int(rng.integers(1, 40))
        p, q = rng.standard_normal(n), rng.standard_normal(n)
        expect = np.abs(np.sort(p) - np.sort(q)).mean()
        assert bb.wasserstein1(p, q) == pytest.approx(expect, abs=1e-10)


def test_w1_against_scipy():
    rng = np.random.default_rng(4)
    for k in range(100):
        p, q = random_instance(rng, tie_prone=(k % 2 == 0))
        assert bb.wasserstein1(p, q) == pytest.approx(
            scipy.stats.wasserstein_distance(p, q), abs=1e-10)


def test_w1_metric_properties():
    rng = np.random.default_rng(5)
    for _ in range(25):
        p, q, r = (rng.standard_normal(int(rng.integers(1, 30))) for _ in range(3))
        dpq = bb.wasserstein1(p, q)
        assert dpq >= 0.0
        assert dpq == pytest.approx(bb.wasserstein1(q, p), abs=1e-12)
        assert bb.wasserstein1(p, r) <= dpq + bb.wasserstein1(q, r) + 1e-12
        # translation invariance and pure-shift distance
        assert bb.wasserstein1(p + 2.5, q + 2.5) == pytest.approx(dpq, abs=1e-10)
        assert bb.wasserstein1(p, p + 2.5) == pytest.approx(2.5, abs=1e-10)
    perm = rng.permutation(20)
    x = rng.standard_normal(20)
    assert bb.wasserstein1(x, x[perm]) == 0.0


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=30),
       st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=30))
def test_property_w1_matches_scipy(p, q):
    assert bb.wasserstein1(p, q) == pytest.approx(
        scipy.stats.wasserstein_distance(p, q), rel=1e-9, abs=1e-9)


# ---------------------------------------------------------------------------
# normalization
# ---------------------------------------------------------------------------

def test_normalize_fixtures():
    np.testing.assert_array_equal(bb.normalize_1_2([0.0, 1.0]), [1.0, 2.0])
    np.testing.assert_allclose(bb.normalize_1_2([2.0, 3.0, 4.0]),
                               [1.0, 1.5, 2.0], rtol=1e-15)
    np.testing.assert_array_equal(bb.normalize_1_2([7.0, 7.0, 7.0]), [1.0, 1.0, 1.0])
    np.testing.assert_array_equal(bb.normalize_1_2([4.0]), [1.0])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e9, 1e9), min_size=1, max_size=40))
def test_property_normalize_bounds_and_order(vals):
    out = bb.normalize_1_2(vals)
    assert out.min() >= 1.0 and out.max() <= 2.0
    order = np.argsort(vals, kind="stable")
    assert (np.diff(out[order]) >= -1e-12).all()


# ---------------------------------------------------------------------------
# sigma sweep
# ---------------------------------------------------------------------------

def test_sigma_sweep_single_point_matches_direct_auc(small_corpus):
    ds = bb.make_shuffle_dataset(small_corpus, "global_block", 1,
                                 n_shuffles=2, seed=3)
    res = bb.sigma_sweep(small_corpus, ds, [1.7])
    direct = bb.auc(bb.score_corpus([p.shuffled for p in ds.pairs], 1.7),
                    bb.score_corpus(small_corpus, 1.7))
    assert res.points == [(1.7, direct)]
    assert res.nearest_index == 0
    est = bb.estimate_sigma_sq_corpus(small_corpus).sigma_sq
    assert res.sigma_hat == pytest.approx(est, rel=1e-15)


def test_sigma_sweep_nearest_index_and_dict(small_corpus):
    ds = bb.make_shuffle_dataset(small_corpus, "global_block", 1,
                                 n_shuffles=1, seed=3)
    est = bb.estimate_sigma_sq_corpus(small_corpus).sigma_sq
    grid = [est / 4, est * 1.01, est * 9]
    res = bb.sigma_sweep(small_corpus, ds, grid)
    assert res.nearest_index == 1
    d = res.to_dict()
    assert d["nearest_sigma_sq"] == grid[1]
    assert len(d["points"]) == 3


def test_sigma_sweep_restricts_to_represented_docs(small_corpus):
    # drop half the corpus from the dataset; sigma_hat must follow
    kept = small_corpus[: len(small_corpus) // 2]
    ds = bb.make_shuffle_dataset(kept, "global_block", 1, n_shuffles=1, seed=4)
    res = bb.sigma_sweep(small_corpus, ds, [1.0])
    assert res.sigma_hat == pytest.approx(
        bb.estimate_sigma_sq_corpus(kept).sigma_sq, rel=1e-15)


def test_sigma_sweep_validation(small_corpus):
    ds = bb.make_shuffle_dataset(small_corpus, "global_block", 1,
                                 n_shuffles=1, seed=0)
    with pytest.raises(DataError, match="empty"):
        bb.sigma_sweep(small_corpus, ds, [])
    with pytest.raises(DataError, match="positive"):
        bb.sigma_sweep(small_corpus, ds, [1.0, -2.0])
    strangers = [bb.LatentSequence("zzz", np.zeros((5, 4)))]
    with pytest.raises(DataError, match="represented"):
        bb.sigma_sweep(strangers, ds, [1.0])


def test_sweep_csv(tmp_path, small_corpus):
    ds = bb.make_shuffle_dataset(small_corpus, "global_block", 1,
                                 n_shuffles=1, seed=0)
    res = bb.sigma_sweep(small_corpus, ds, [0.5, 2.0])
    path = tmp_path / "sweep.csv"
    bb.sweep_to_csv(res, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "sigma,auc"
    assert len(lines) == 3
    s, a = lines[1].split(",")
    assert float(s) == 0.5 and float(a) == res.points[0][1]


# ---------------------------------------------------------------------------
# trajectory profiles
# ---------------------------------------------------------------------------

def test_trajectory_interpolation_fixture():
    doc = bb.LatentSequence("a", np.array([[0.0], [2.0]]))
    prof = bb.trajectory_profile([doc], 3)
    np.testing.assert_allclose(prof.mean, [[0.0], [1.0], [2.0]], atol=1e-15)
    np.testing.assert_array_equal(prof.var, np.zeros((3, 1)))
    assert prof.n_docs == 1


def test_trajectory_identity_when_lengths_match():
    rng = np.random.default_rng(6)
    rows = rng.standard_normal((9, 3))
    prof = bb.trajectory_profile([bb.LatentSequence("a", rows)], 9)
    np.testing.assert_allclose(prof.mean, rows, rtol=1e-12, atol=1e-12)


def test_trajectory_mirrored_docs_cancel():
    rng = np.random.default_rng(7)
    rows = rng.standard_normal((6, 2))
    corpus = [bb.LatentSequence("p", rows), bb.LatentSequence("m", -rows)]
    prof = bb.trajectory_profile(corpus, 6)
    np.testing.assert_allclose(prof.mean, 0.0, atol=1e-12)
    np.testing.assert_allclose(prof.var, rows ** 2, rtol=1e-12, atol=1e-12)


def test_trajectory_skips_single_row_docs():
    good = bb.LatentSequence("g", np.array([[0.0], [1.0], [2.0]]))
    lonely = bb.LatentSequence("l", np.array([[5.0]]))
    with pytest.warns(UserWarning, match="'l'"):
        prof = bb.trajectory_profile([good, lonely], 4)
    assert prof.n_docs == 1
    with pytest.raises(DataError, match="no document"):
        bb.trajectory_profile([lonely], 4)


def test_trajectory_validation():
    doc = bb.LatentSequence("a", np.zeros((4, 2)))
    with pytest.raises(DataError, match="length"):
        bb.trajectory_profile([doc], 1)
    other = bb.LatentSequence("b", np.zeros((4, 3)))
    with pytest.raises(DataError, match="dimension"):
        bb.trajectory_profile([doc, other], 4)


def test_profile_csv(tmp_path):
    rng = np.random.default_rng(8)
    corpus = [bb.LatentSequence(f"d{k}", rng.standard_normal((7, 2)))
              for k in range(3)]
    prof = bb.trajectory_profile(corpus, 5)
    path = tmp_path / "prof.csv"
    bb.profile_to_csv(prof, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "pos,dim,mean,var"
    assert len(lines) == 1 + 5 * 2
    pos, d, mean, var = lines[1].split(",")
    assert (int(pos), int(d)) == (0, 0)
    assert float(mean) == prof.mean[0, 0] and float(var) == prof.var[0, 0]
