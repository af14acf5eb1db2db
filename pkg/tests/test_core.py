import json

import numpy as np
import pytest

from zeromatch.core import (Correspondence, DegenerateGeometryError,
                            InlierPartition, MatchProblem, PointSet,
                            build_problem, load_pointset, metrics,
                            pairwise_distances, validate_partial_permutation)


def triangle():
    return PointSet(points=[[0.0, 0.0], [1.0, 0.0], [0.5, 1.0]])


class TestPointSet:
    def test_basic(self):
        ps = triangle()
        assert len(ps) == 3 and ps.dim == 2

    def test_rejects_1d_points(self):
        with pytest.raises(ValueError):
            PointSet(points=[[1.0], [2.0]])

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            PointSet(points=np.empty((0, 2)))

    def test_rejects_nan_naming_index(self):
        with pytest.raises(ValueError, match="index 1"):
            PointSet(points=[[0.0, 0.0], [np.nan, 1.0]])

    def test_json_round_trip(self, tmp_path):
        ps = PointSet(points=[[0.0, 1.0], [2.0, 3.0]], labels=["a", "b"])
        path = tmp_path / "pts.json"
        path.write_text(json.dumps(ps.to_json_obj()))
        back = load_pointset(path)
        assert np.array_equal(back.points, ps.points)
        assert back.labels == ("a", "b")


class TestBuildProblem:
    def test_identical_triangles(self):
        prob = build_problem(triangle(), triangle())
        assert np.allclose(np.diag(prob.D), 0.0)
        assert np.array_equal(prob.attrA, prob.attrB)
        assert np.array_equal(prob.adjA, prob.adjB)

    def test_collinear_reciprocal_distances(self):
        pts = PointSet(points=[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
        prob = build_problem(pts, pts)
        E = pairwise_distances(pts.points)
        assert np.array_equal(E, [[0, 1, 2], [1, 0, 1], [2, 1, 0]])
        expect = np.array([[0.0, 1.0, 0.5], [1.0, 0.0, 1.0], [0.5, 1.0, 0.0]])
        assert np.allclose(prob.adjA, expect)

    def test_duplicate_point_rejected(self):
        pts = PointSet(points=[[0.0, 0.0], [0.0, 0.0], [1.0, 1.0]])
        with pytest.raises(DegenerateGeometryError):
            build_problem(pts, triangle())

    def test_dimension_mismatch(self):
        p3 = PointSet(points=[[0.0, 0.0, 0.0], [1.0, 1.0, 1.0]])
        with pytest.raises(ValueError, match="dimension"):
            build_problem(triangle(), p3)

    def test_swaps_when_first_larger(self):
        rng = np.random.default_rng(0)
        big = PointSet(points=rng.normal(size=(5, 2)))
        small = PointSet(points=rng.normal(size=(3, 2)))
        prob = build_problem(big, small)
        assert prob.swapped and prob.m == 3 and prob.n == 5
        P = np.zeros((3, 5))
        assert prob.to_input_orientation(P).shape == (5, 3)

    def test_invariants_on_random_sets(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            a = PointSet(points=rng.normal(size=(rng.integers(2, 8), 2)))
            b = PointSet(points=rng.normal(size=(rng.integers(2, 8), 2)))
            prob = build_problem(a, b)  # MatchProblem validates on construction
            assert prob.m <= prob.n
            assert np.all(prob.D >= 0) and np.all(prob.D <= 1 + 1e-12)


class TestCorrespondence:
    def test_row_sum_guard(self):
        with pytest.raises(ValueError, match="row sum"):
            Correspondence(mat=[[0.6, 0.6]], kind="continuous")

    def test_binary_requires_01(self):
        with pytest.raises(ValueError, match="0/1"):
            Correspondence(mat=[[0.5, 0.0]], kind="binary")

    def test_pairs(self):
        c = Correspondence(mat=[[0.0, 1.0], [1.0, 0.0]], kind="binary")
        assert c.pairs() == ((0, 1), (1, 0))


class TestValidatePartialPermutation:
    def test_zero_matrix_k0(self):
        assert validate_partial_permutation(np.zeros((2, 3)), 0)

    def test_duplicate_column_rejected(self):
        P = np.array([[1.0, 0, 0], [1.0, 0, 0]])
        assert not validate_partial_permutation(P, 2)

    def test_valid_3x4(self):
        P = np.zeros((3, 4))
        P[0, 1] = 1.0
        P[2, 3] = 1.0
        assert validate_partial_permutation(P, 2)
        assert not validate_partial_permutation(P, 3)

    def test_removing_an_entry_drops_k_by_one(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            m, n = rng.integers(2, 7, size=2)
            k = int(rng.integers(1, min(m, n) + 1))
            rows = rng.choice(m, size=k, replace=False)
            cols = rng.choice(n, size=k, replace=False)
            P = np.zeros((m, n))
            P[rows, cols] = 1.0
            assert validate_partial_permutation(P, k)
            r, c = rows[0], cols[0]
            Q = P.copy()
            Q[r, c] = 0.0
            assert validate_partial_permutation(Q, k - 1)


class TestInlierPartition:
    def test_partition_covers_index_ranges(self):
        gt = InlierPartition(inliers_a={0, 1}, outliers_a={2},
                             inliers_b={0, 2}, outliers_b={1, 3},
                             tau={0: 0, 1: 2})
        assert gt.covers(3, 4)
        assert not gt.covers(4, 4)

    def test_overlap_rejected(self):
        with pytest.raises(ValueError, match="disjoint"):
            InlierPartition(inliers_a={0}, outliers_a={0}, inliers_b={0},
                            outliers_b=set(), tau={0: 0})

    def test_tau_must_be_bijection(self):
        with pytest.raises(ValueError, match="bijection"):
            InlierPartition(inliers_a={0, 1}, outliers_a=set(),
                            inliers_b={0}, outliers_b={1}, tau={0: 0, 1: 0})


class TestMetrics:
    def gt4(self):
        return InlierPartition(inliers_a={0, 1, 2, 3}, outliers_a=set(),
                               inliers_b={0, 1, 2, 3}, outliers_b=set(),
                               tau={i: i for i in range(4)})

    def test_perfect(self):
        m = metrics(np.eye(4), self.gt4())
        assert (m.recall, m.precision, m.f_measure) == (1.0, 1.0, 1.0)

    def test_half_right(self):
        P = np.zeros((4, 4))
        P[0, 0] = P[1, 1] = 1.0  # correct
        P[2, 3] = P[3, 2] = 1.0  # wrong
        m = metrics(P, self.gt4())
        assert (m.recall, m.precision, m.f_measure) == (0.5, 0.5, 0.5)

    def test_empty_prediction(self):
        m = metrics(np.zeros((4, 4)), self.gt4())
        assert (m.recall, m.precision, m.f_measure) == (0.0, 0.0, 0.0)

    def test_empty_gt_rejected(self):
        gt = InlierPartition(inliers_a=set(), outliers_a={0},
                             inliers_b=set(), outliers_b={0}, tau={})
        with pytest.raises(ValueError, match="recall"):
            metrics(np.zeros((1, 1)), gt)

    def test_counts_are_integers(self):
        rng = np.random.default_rng(4)
        gt = self.gt4()
        for _ in range(10):
            k = int(rng.integers(1, 5))
            rows = rng.choice(4, size=k, replace=False)
            cols = rng.choice(4, size=k, replace=False)
            P = np.zeros((4, 4))
            P[rows, cols] = 1.0
            m = metrics(P, gt)
            assert round(m.recall * 4, 9) == int(round(m.recall * 4))
            assert round(m.precision * k, 9) == int(round(m.precision * k))


def test_match_problem_rejects_asymmetry():
    bad = np.array([[0.0, 1.0], [2.0, 0.0]])
    eye0 = np.zeros((2, 2))
    with pytest.raises(ValueError, match="symmetric"):
        MatchProblem(D=np.zeros((2, 2)), adjA=bad, adjB=eye0,
                     attrA=eye0, attrB=eye0)


def test_match_problem_json_dump_shapes():
    prob = build_problem(triangle(), triangle())
    obj = prob.to_json_obj()
    assert obj["m"] == 3 and obj["n"] == 3
    assert len(obj["D"]) == 3 and len(obj["D"][0]) == 3
    json.dumps(obj)  # serializable


def test_problem_dump_matches_golden():
    import pathlib
    golden = json.loads((pathlib.Path(__file__).parent / "data"
                         / "golden_problem.json").read_text())
    pts_a = PointSet(points=[[0.0, 0.0], [1.0, 0.0], [0.5, 1.0]])
    pts_b = PointSet(points=[[0.0, 0.0], [1.1, 0.0], [0.5, 0.9], [2.0, 2.0]])
    obj = build_problem(pts_a, pts_b, lambda1=2.0).to_json_obj()
    assert obj.keys() == golden.keys()
    for key, want in golden.items():
        got = obj[key]
        if isinstance(want, list):
            np.testing.assert_allclose(got, want, rtol=1e-15, atol=0)
        else:
            assert got == want, key
