import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from encoder_di.errors import DimensionMismatch, EmptyInput, RowCountMismatch, ZeroNormRow
from encoder_di.obfuscate import ObfuscationSpec, apply_obfuscation
from encoder_di.similarity import (cosine_score, l2_score, lp_distances, pair_histogram, per_pair_cosine,
                                   per_pair_l2_score, similarity_report, write_histogram_csv)


def unit_rows(rng, n, d):
    x = rng.normal(size=(n, d))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


@pytest.mark.parametrize("d", [2, 64, 512])
def test_distance_cosine_identity(rng, d):
    a, b = unit_rows(rng, 3000, d), unit_rows(rng, 3000, d)
    sim = per_pair_cosine(a, b, raw=True)
    dist = 2.0 * (1.0 - per_pair_l2_score(a, b, raw=True))
    assert np.max(np.abs(dist - np.sqrt(2 * (1 - sim)))) < 1e-10


def test_score_relation(rng):
    a, b = rng.normal(size=(2000, 16)), rng.normal(size=(2000, 16))
    b[:1000] += 3 * a[:1000]
    c = np.abs(per_pair_cosine(a, b))
    s = per_pair_l2_score(a, b)
    np.testing.assert_allclose(c, np.abs(1 - 2 * (1 - s) ** 2), atol=1e-9, rtol=0)


def test_self_and_negation(rng):
    a = rng.normal(size=(100, 8))
    assert cosine_score(a, a) == pytest.approx(1.0)
    assert cosine_score(a, -a) == pytest.approx(1.0)
    assert l2_score(a, a) == pytest.approx(1.0)
    assert l2_score(a, -a) == pytest.approx(0.0, abs=1e-12)
    for p in (1, 2, "inf"):
        assert lp_distances(a, a, p=p) == (0.0, 0.0)


def test_orthogonal_pairs():
    a = np.tile([1.0, 0.0], (5, 1))
    b = np.tile([0.0, 1.0], (5, 1))
    assert l2_score(a, b, raw=True) == pytest.approx(1 - math.sqrt(2) / 2)
    assert round(1 - math.sqrt(2) / 2, 4) == 0.2929
    assert cosine_score(a, b, raw=True) == 0.0


def test_unit_vector_distances_raw():
    e1, e2 = np.array([[1.0, 0.0, 0.0]]), np.array([[0.0, 1.0, 0.0]])
    assert lp_distances(e1, e2, 1, raw=True)[0] == pytest.approx(2.0)
    assert lp_distances(e1, e2, 2, raw=True)[0] == pytest.approx(math.sqrt(2))
    assert lp_distances(e1, e2, "inf", raw=True)[0] == pytest.approx(1.0)


def test_l2_mean_bounded(rng):
    a, b = rng.normal(size=(500, 5)), rng.normal(size=(500, 5))
    assert lp_distances(a, b, 2)[0] <= 2.0


def test_stderr(rng):
    a, b = rng.normal(size=(400, 6)), rng.normal(size=(400, 6))
    mean, stderr = lp_distances(a, b, 1)
    from encoder_di.preprocess import center_and_normalize
    d = np.abs(center_and_normalize(a) - center_and_normalize(b)).sum(axis=1)
    assert mean == pytest.approx(d.mean())
    assert stderr == pytest.approx(d.std(ddof=1) / math.sqrt(400))


def test_bad_p(rng):
    with pytest.raises(ValueError):
        lp_distances(np.ones((2, 2)), np.ones((2, 2)), p=3)


def test_mismatches_are_errors():
    with pytest.raises(RowCountMismatch):
        cosine_score(np.eye(3), np.eye(3)[:2])
    with pytest.raises(DimensionMismatch):
        cosine_score(np.eye(3), np.zeros((3, 5)) + np.arange(5))


def test_constant_row_after_centering():
    a = np.array([[1.0, 2.0], [3.0, 3.0]])
    with pytest.raises(ZeroNormRow):
        cosine_score(a, a)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, (6, 5), elements=st.floats(-10, 10)),
       st.floats(0.01, 100), st.floats(-100, 100), st.integers(0, 2**31))
def test_affine_invariance(a, s, c, seed):
    rng = np.random.default_rng(seed)
    b = rng.normal(size=a.shape)
    a = a + rng.normal(size=a.shape)  # keep rows non-constant
    assert cosine_score(a, s * b + c) == pytest.approx(cosine_score(a, b), abs=1e-9)


def test_independent_high_dim_is_small(rng):
    a, b = rng.normal(size=(20_000, 512)), rng.normal(size=(20_000, 512))
    c = cosine_score(a, b)
    assert c < 0.05
    assert c == pytest.approx(math.sqrt(2 / (math.pi * 512)), rel=0.05)


def test_shuffle_drives_cosine_down(rng):
    a = rng.normal(size=(20_000, 512))
    shuffled = apply_obfuscation(a, ObfuscationSpec("shuffle", seed=3))
    assert cosine_score(a, shuffled) < 0.05


def test_report_consistent(rng):
    a, b = rng.normal(size=(300, 10)), rng.normal(size=(300, 10))
    rep = similarity_report(a, b)
    assert rep.cosine_score == pytest.approx(cosine_score(a, b))
    assert rep.l2_score == pytest.approx(l2_score(a, b))
    for p, name in ((1, "l1"), (2, "l2"), ("inf", "linf")):
        mean, err = lp_distances(a, b, p)
        assert getattr(rep, f"{name}_mean") == pytest.approx(mean)
        assert getattr(rep, f"{name}_stderr") == pytest.approx(err)
    assert rep.n_pairs == 300 and set(rep.to_dict()) >= {"cosine_score", "n_pairs"}


def test_histogram_single_bin():
    edges, counts = pair_histogram(np.full(37, 0.5), 10, (0.0, 1.0))
    assert len(edges) == 11 and counts.sum() == 37 and np.count_nonzero(counts) == 1


def test_histogram_uniform_grid():
    n, bins = 1000, 20
    _, counts = pair_histogram(np.linspace(0, 1, n), bins)
    assert counts.sum() == n
    assert np.all(np.abs(counts - n / bins) <= 1)


def test_histogram_empty():
    with pytest.raises(EmptyInput):
        pair_histogram([], 5)


def test_histogram_csv(tmp_path):
    edges, counts = pair_histogram([0.1, 0.2, 0.9], 4, (0.0, 1.0))
    path = tmp_path / "h.csv"
    write_histogram_csv(edges, counts, path)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["bin_left", "bin_right", "count"]
    assert [int(r[2]) for r in rows[1:]] == [2, 0, 0, 1]
    assert float(rows[-1][1]) == 1.0
