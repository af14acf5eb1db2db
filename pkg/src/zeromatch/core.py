"""Domain types shared by all modules: point sets, matching problems,
correspondence matrices, ground-truth partitions and matching metrics."""

import json
from dataclasses import dataclass, field

import numpy as np

ROWSUM_EPS = 1e-9


class DegenerateGeometryError(ValueError):
    """Raised when a point set has coincident points (zero pairwise distance)."""


def _frozen(arr, dtype=np.float64):
    out = np.array(arr, dtype=dtype)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class PointSet:
    """Ordered list of d-dimensional coordinates, d >= 2."""

    points: np.ndarray
    labels: tuple = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 2:
            raise ValueError(f"points must be (n>=1, d>=2), got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            bad = np.argwhere(~np.isfinite(pts))[0]
            raise ValueError(f"non-finite coordinate at point index {bad[0]}")
        object.__setattr__(self, "points", _frozen(pts))
        if self.labels is not None:
            labels = tuple(self.labels)
            if len(labels) != len(pts):
                raise ValueError("labels length must match point count")
            object.__setattr__(self, "labels", labels)

    def __len__(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]

    def to_json_obj(self):
        obj = {"points": self.points.tolist()}
        if self.labels is not None:
            obj["labels"] = list(self.labels)
        return obj

    @classmethod
    def from_json_obj(cls, obj):
        if not isinstance(obj, dict) or "points" not in obj:
            raise ValueError("point set JSON must be an object with a 'points' field")
        return cls(points=obj["points"], labels=obj.get("labels"))


def pairwise_distances(pts):
    """Symmetric Euclidean distance matrix of one point set."""
    pts = np.asarray(pts, dtype=np.float64)
    diff = pts[:, None, :] - pts[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=2))


def _check_edge_matrix(name, M, size):
    if M.shape != (size, size):
        raise ValueError(f"{name} must be {size}x{size}, got {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} contains non-finite entries")
    if not np.array_equal(M, M.T):
        raise ValueError(f"{name} must be symmetric")
    if np.any(np.diag(M) != 0.0):
        raise ValueError(f"{name} must have a zero diagonal")


@dataclass(frozen=True)
class MatchProblem:
    """Two weighted graphs plus node dissimilarities and objective weights.

    Sides are oriented so m <= n; ``swapped`` records whether the inputs
    were exchanged to achieve that.
    """

    D: np.ndarray
    adjA: np.ndarray
    adjB: np.ndarray
    attrA: np.ndarray
    attrB: np.ndarray
    lambda0: float = 1.0
    lambda1: float = 1.0
    lambda2: float = 1.0
    swapped: bool = False

    def __post_init__(self):
        D = np.asarray(self.D, dtype=np.float64)
        if D.ndim != 2:
            raise ValueError("D must be a 2-D matrix")
        m, n = D.shape
        if m > n:
            raise ValueError(f"need m <= n, got {m}x{n} (swap sides first)")
        if not np.all(np.isfinite(D)) or np.any(D < 0):
            raise ValueError("D must be finite and nonnegative")
        mats = {"adjA": (self.adjA, m), "adjB": (self.adjB, n),
                "attrA": (self.attrA, m), "attrB": (self.attrB, n)}
        frozen = {}
        for name, (M, size) in mats.items():
            M = np.asarray(M, dtype=np.float64)
            _check_edge_matrix(name, M, size)
            if name.startswith("adj") and np.any(M < 0):
                raise ValueError(f"{name} must be nonnegative")
            frozen[name] = _frozen(M)
        for lam in (self.lambda0, self.lambda1, self.lambda2):
            if not (np.isfinite(lam) and lam >= 0):
                raise ValueError("lambda weights must be finite and nonnegative")
        object.__setattr__(self, "D", _frozen(D))
        for name, M in frozen.items():
            object.__setattr__(self, name, M)

    @property
    def m(self):
        return self.D.shape[0]

    @property
    def n(self):
        return self.D.shape[1]

    def restricted(self, rows, cols):
        """Subproblem on the given node subsets (same orientation)."""
        rows = np.asarray(rows, dtype=int)
        cols = np.asarray(cols, dtype=int)
        return MatchProblem(
            D=self.D[np.ix_(rows, cols)],
            adjA=self.adjA[np.ix_(rows, rows)],
            adjB=self.adjB[np.ix_(cols, cols)],
            attrA=self.attrA[np.ix_(rows, rows)],
            attrB=self.attrB[np.ix_(cols, cols)],
            lambda0=self.lambda0, lambda1=self.lambda1, lambda2=self.lambda2,
            swapped=self.swapped,
        )

    def to_input_orientation(self, mat):
        """Map an m x n matrix back to the caller's original side order."""
        mat = np.asarray(mat)
        return mat.T if self.swapped else mat

    def to_json_obj(self):
        return {
            "m": self.m, "n": self.n, "swapped": self.swapped,
            "lambda0": self.lambda0, "lambda1": self.lambda1, "lambda2": self.lambda2,
            "D": self.D.tolist(),
            "adjA": self.adjA.tolist(), "adjB": self.adjB.tolist(),
            "attrA": self.attrA.tolist(), "attrB": self.attrB.tolist(),
        }


@dataclass(frozen=True)
class Correspondence:
    """m x n matching matrix, continuous (substochastic) or binary partial
    permutation."""

    mat: np.ndarray
    kind: str = "continuous"

    def __post_init__(self):
        mat = np.asarray(self.mat, dtype=np.float64)
        if mat.ndim != 2:
            raise ValueError("correspondence must be a 2-D matrix")
        if self.kind not in ("continuous", "binary"):
            raise ValueError(f"unknown correspondence kind {self.kind!r}")
        if np.any(mat < 0.0) or np.any(mat > 1.0):
            raise ValueError("entries must lie in [0, 1]")
        if np.any(mat.sum(axis=1) > 1.0 + ROWSUM_EPS):
            raise ValueError("a row sum exceeds 1")
        if np.any(mat.sum(axis=0) > 1.0 + ROWSUM_EPS):
            raise ValueError("a column sum exceeds 1")
        if self.kind == "binary" and not np.all((mat == 0.0) | (mat == 1.0)):
            raise ValueError("binary correspondence must be 0/1 valued")
        object.__setattr__(self, "mat", _frozen(mat))

    @property
    def cardinality(self):
        return float(self.mat.sum())

    def pairs(self):
        """(row, col) pairs of a binary correspondence."""
        if self.kind != "binary":
            raise ValueError("pairs() requires a binary correspondence")
        rows, cols = np.nonzero(self.mat)
        return tuple(zip(rows.tolist(), cols.tolist()))


def validate_partial_permutation(P, k):
    """True iff P is binary with row/col sums <= 1 and total mass exactly k."""
    mat = P.mat if isinstance(P, Correspondence) else np.asarray(P, dtype=float)
    if not np.all((mat == 0.0) | (mat == 1.0)):
        return False
    return (np.all(mat.sum(axis=1) <= 1) and np.all(mat.sum(axis=0) <= 1)
            and int(mat.sum()) == k)


@dataclass(frozen=True)
class InlierPartition:
    """Ground-truth or predicted split into inliers/outliers plus the partial
    permutation tau mapping A-side inliers onto B-side inliers."""

    inliers_a: frozenset
    outliers_a: frozenset
    inliers_b: frozenset
    outliers_b: frozenset
    tau: dict = field(default_factory=dict)

    def __post_init__(self):
        ia, oa = frozenset(self.inliers_a), frozenset(self.outliers_a)
        ib, ob = frozenset(self.inliers_b), frozenset(self.outliers_b)
        if ia & oa or ib & ob:
            raise ValueError("inlier and outlier sets must be disjoint")
        tau = dict(self.tau)
        if set(tau.keys()) != set(ia):
            raise ValueError("tau must be defined exactly on the A-side inliers")
        if set(tau.values()) != set(ib) or len(set(tau.values())) != len(tau):
            raise ValueError("tau must be a bijection onto the B-side inliers")
        object.__setattr__(self, "inliers_a", ia)
        object.__setattr__(self, "outliers_a", oa)
        object.__setattr__(self, "inliers_b", ib)
        object.__setattr__(self, "outliers_b", ob)
        object.__setattr__(self, "tau", tau)

    @property
    def m(self):
        return len(self.inliers_a) + len(self.outliers_a)

    @property
    def n(self):
        return len(self.inliers_b) + len(self.outliers_b)

    def covers(self, m, n):
        """True iff the inlier/outlier sets exactly partition both index
        ranges {0..m-1} and {0..n-1} with no overlap."""
        return (self.inliers_a | self.outliers_a == frozenset(range(m))
                and self.inliers_b | self.outliers_b == frozenset(range(n))
                and not (self.inliers_a & self.outliers_a)
                and not (self.inliers_b & self.outliers_b))

    def matrix(self, m=None, n=None):
        """Binary matrix realization of tau."""
        m = self.m if m is None else m
        n = self.n if n is None else n
        P = np.zeros((m, n))
        for i, a in self.tau.items():
            P[i, a] = 1.0
        return P

    def to_json_obj(self):
        return {
            "inliersA": sorted(self.inliers_a), "outliersA": sorted(self.outliers_a),
            "inliersB": sorted(self.inliers_b), "outliersB": sorted(self.outliers_b),
            "tau": {str(i): a for i, a in sorted(self.tau.items())},
        }


@dataclass(frozen=True)
class MatchMetrics:
    recall: float
    precision: float
    f_measure: float


def metrics(pred, gt):
    """Recall / precision / F-measure of a binary prediction against gt."""
    mat = pred.mat if isinstance(pred, Correspondence) else np.asarray(pred, dtype=float)
    if not gt.tau:
        raise ValueError("ground truth has no matches; recall undefined")
    correct = sum(1 for i, a in gt.tau.items() if mat[i, a] == 1.0)
    total_pred = int(round(mat.sum()))
    recall = correct / len(gt.tau)
    precision = correct / total_pred if total_pred else 0.0
    f = 2 * recall * precision / (recall + precision) if recall + precision else 0.0
    return MatchMetrics(recall=recall, precision=precision, f_measure=f)


def build_problem(pts_a, pts_b, feature_config=None,
                  lambda0=1.0, lambda1=1.0, lambda2=1.0):
    """Assemble a MatchProblem from two point sets.

    Node dissimilarities are chi-squared costs between shape-context
    descriptors. Edge weights are reciprocal pairwise distances and edge
    attributes are Gaussians of distance, exp(-E^2/sigma^2), with sigma the
    standard deviation of the off-diagonal distances. Sides are swapped when
    the first set is larger, and the swap is recorded on the problem.
    """
    from . import features  # local import to avoid a cycle at module load

    if feature_config is None:
        feature_config = features.ShapeContextConfig()
    if pts_a.dim != pts_b.dim:
        raise ValueError(f"dimension mismatch: {pts_a.dim} vs {pts_b.dim}")

    swapped = len(pts_a) > len(pts_b)
    if swapped:
        pts_a, pts_b = pts_b, pts_a

    def side(pts, tag):
        E = pairwise_distances(pts.points)
        off = ~np.eye(len(pts), dtype=bool)
        if np.any(E[off] == 0.0):
            i, j = np.argwhere((E == 0.0) & off)[0]
            raise DegenerateGeometryError(
                f"coincident points {i} and {j} on side {tag}")
        adj = np.zeros_like(E)
        adj[off] = 1.0 / E[off]
        sigma = float(np.std(E[off])) if len(pts) > 1 else 0.0
        if sigma == 0.0:
            sigma = float(np.mean(E[off])) if len(pts) > 1 else 1.0
        attr = np.exp(-(E * E) / (sigma * sigma))
        np.fill_diagonal(attr, 0.0)
        return adj, attr

    adjA, attrA = side(pts_a, "A")
    adjB, attrB = side(pts_b, "B")
    desc_a = features.build_descriptors(pts_a, feature_config)
    desc_b = features.build_descriptors(pts_b, feature_config)
    D = features.pairwise_cost(desc_a, desc_b)
    return MatchProblem(D=D, adjA=adjA, adjB=adjB, attrA=attrA, attrB=attrB,
                        lambda0=lambda0, lambda1=lambda1, lambda2=lambda2,
                        swapped=swapped)


def load_pointset(path):
    """Read a PointSet from its JSON file format."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: malformed JSON ({exc})") from exc
    return PointSet.from_json_obj(obj)
