"""Outlier identification from the optimal correspondence and the iterative
removal-and-rematch loop.

A node whose row (or column) of the continuous correspondence is nearly zero
received no assignment mass and is a likely outlier. Each node is placed in
a 2-D joint-probability space: its own mass paired with the mass of the node
it couples to in the discretized matching. A deterministic 2-means split of
that point cloud separates inliers from outliers; the problem is then
rebuilt on the surviving nodes and re-solved until the inlier sets stop
changing.
"""

from dataclasses import dataclass, field

import numpy as np

from .core import Correspondence, InlierPartition
from .solver import (MatchCollapsedError, SolveReport, SolverConfig,
                     frank_wolfe_zac, frank_wolfe_zacr)


@dataclass(frozen=True)
class JointPoint:
    side: str          # 'A' or 'B'
    index: int
    coord: tuple       # (own mass, coupled partner mass)


@dataclass(frozen=True)
class RemovalConfig:
    method: str = "zac"            # 'zac' (hard cardinality) or 'zacr' (soft
                                   # penalty, k re-estimated within each solve)
    max_rounds: int = 10
    solver: SolverConfig = field(default_factory=SolverConfig)
    # optional point-aware rebuild: (rows, cols) -> MatchProblem for the
    # surviving nodes. When set, descriptors are recomputed on the cleaned
    # sets instead of slicing the original (polluted) matrices.
    rebuild: object = None

    def __post_init__(self):
        if self.method not in ("zac", "zacr"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")


@dataclass
class RemovalResult:
    report: SolveReport
    partition: InlierPartition
    rounds: int
    warnings: list


def joint_probabilities(P_hat, coupling):
    """Joint-probability coordinates for all m + n nodes.

    ``coupling`` is a binary discretization of ``P_hat`` defining which nodes
    are coupled; uncoupled nodes get partner mass 0.
    """
    P = P_hat.mat if hasattr(P_hat, "mat") else np.asarray(P_hat, dtype=float)
    C = coupling.mat if hasattr(coupling, "mat") else np.asarray(coupling, dtype=float)
    if P.shape != C.shape:
        raise ValueError(f"shape mismatch: {P.shape} vs {C.shape}")
    m, n = P.shape
    row_mass = P.sum(axis=1)
    col_mass = P.sum(axis=0)
    rows, cols = np.nonzero(C)
    a_of = dict(zip(rows.tolist(), cols.tolist()))
    i_of = dict(zip(cols.tolist(), rows.tolist()))

    points = []
    for i in range(m):
        partner = col_mass[a_of[i]] if i in a_of else 0.0
        points.append(JointPoint("A", i, (float(row_mass[i]), float(partner))))
    for a in range(n):
        partner = row_mass[i_of[a]] if a in i_of else 0.0
        points.append(JointPoint("B", a, (float(col_mass[a]), float(partner))))
    return points


def two_means(points):
    """Deterministic planar 2-means; True marks the inlier cluster.

    Centroids are seeded at the points of minimum and maximum coordinate sum
    and Lloyd iterations run to a fixed point (at most 100). The cluster
    whose centroid has the larger coordinate sum is the inlier cluster. If
    all points are identical there is a single cluster and everything is an
    inlier.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 2:
        raise ValueError("two_means needs at least 2 points")
    sums = pts.sum(axis=1)
    c0 = pts[int(np.argmin(sums))].copy()
    c1 = pts[int(np.argmax(sums))].copy()
    if np.array_equal(c0, c1):
        return np.ones(len(pts), dtype=bool)

    labels = None  # True -> cluster seeded at the max-sum point
    for _ in range(100):
        d0 = np.sum((pts - c0) ** 2, axis=1)
        d1 = np.sum((pts - c1) ** 2, axis=1)
        new_labels = d1 < d0  # ties stay with the low-sum seed cluster
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        if labels.any():
            c1 = pts[labels].mean(axis=0)
        if (~labels).any():
            c0 = pts[~labels].mean(axis=0)

    inlier_is_c1 = c1.sum() >= c0.sum()
    return labels if inlier_is_c1 else ~labels


def refine_inliers(points, labels, k):
    """Adjust clustered inlier sets toward cardinality k, per side.

    If a side has fewer than k inliers, the highest-mass outliers are
    promoted back. If it has more than k, inliers with mass below 0.5 are
    demoted as well.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    out = []
    for side in ("A", "B"):
        members = [(p, bool(lab)) for p, lab in zip(points, labels)
                   if p.side == side]
        if len(members) < k:
            raise ValueError(f"side {side} has fewer than k={k} nodes")
        inliers = {p.index for p, lab in members if lab}
        count = len(inliers)
        if count < k:
            demoted = sorted((p for p, lab in members if not lab),
                             key=lambda p: (-p.coord[0], p.index))
            for p in demoted[:k - count]:
                inliers.add(p.index)
        elif count > k:
            for p, lab in members:
                if lab and p.coord[0] < 0.5:
                    inliers.discard(p.index)
        out.append(frozenset(inliers))
    return out[0], out[1]


def _solve(prob, k, cfg):
    if cfg.method == "zacr":
        return frank_wolfe_zacr(prob, k, cfg.solver)
    return frank_wolfe_zac(prob, k, cfg.solver)


def _oriented_sub(prob, rows, cols):
    """Restriction of ``prob`` to the given original-side node subsets,
    oriented so the smaller side comes first; flipped reports whether the
    sub-problem's A side is the original B side."""
    from .core import MatchProblem

    if len(rows) <= len(cols):
        return prob.restricted(rows, cols), False
    return MatchProblem(
        D=prob.D[np.ix_(rows, cols)].T,
        adjA=prob.adjB[np.ix_(cols, cols)],
        adjB=prob.adjA[np.ix_(rows, rows)],
        attrA=prob.attrB[np.ix_(cols, cols)],
        attrB=prob.attrA[np.ix_(rows, rows)],
        lambda0=prob.lambda0, lambda1=prob.lambda1, lambda2=prob.lambda2,
    ), True


def match_with_removal(prob, k, cfg=None):
    """Solve, identify outliers, remove them and re-match until stable.

    Returns a RemovalResult whose report holds the final correspondence
    padded back to the full problem size (removed nodes have exactly zero
    rows/columns) and whose partition classifies every node, all in the
    problem's own orientation.
    """
    cfg = cfg or RemovalConfig()
    if not 1 <= k <= prob.m:
        raise ValueError(f"cardinality k={k} out of range [1, {prob.m}]")

    active_a = np.arange(prob.m)
    active_b = np.arange(prob.n)
    sub, flipped = prob, False
    k_round = k
    warnings = []
    rounds = 0

    snapshot = None  # (report, active_a, active_b, flipped) of the last round
    while True:
        try:
            report = _solve(sub, k_round, cfg)
        except MatchCollapsedError:
            if snapshot is not None:
                warnings.append("matching collapsed on the refined graph; "
                                "keeping previous round")
                report, active_a, active_b, flipped = snapshot
                break
            # first round: fall back to the hard-cardinality solver
            warnings.append("soft-cardinality matching collapsed; "
                            "falling back to fixed cardinality")
            report = frank_wolfe_zac(sub, k_round, cfg.solver)
        snapshot = (report, active_a, active_b, flipped)
        rounds += 1
        if rounds > cfg.max_rounds:
            warnings.append("removal loop hit the round cap without stabilizing")
            break
        points = joint_probabilities(report.final_continuous, report.final_binary)
        labels = two_means([p.coord for p in points])
        keep_first, keep_second = refine_inliers(points, labels, k_round)
        keep_a, keep_b = (keep_second, keep_first) if flipped \
            else (keep_first, keep_second)
        if len(keep_a) == len(active_a) and len(keep_b) == len(active_b):
            break  # inlier sets unchanged; this solve used the final graphs
        if min(len(keep_a), len(keep_b)) < max(k_round, 2):
            warnings.append("refined graph smaller than k; keeping previous round")
            break
        active_a = active_a[np.array(sorted(keep_a), dtype=int)]
        active_b = active_b[np.array(sorted(keep_b), dtype=int)]
        if cfg.rebuild is not None:
            rebuilt = cfg.rebuild(active_a, active_b)
            sub, flipped = rebuilt, rebuilt.swapped
        else:
            sub, flipped = _oriented_sub(prob, active_a, active_b)

    # pad the final matching back to the full problem
    raw_cont = report.final_continuous.mat
    raw_bin = report.final_binary.mat
    if flipped:
        raw_cont, raw_bin = raw_cont.T, raw_bin.T
    full_cont = np.zeros((prob.m, prob.n))
    full_bin = np.zeros((prob.m, prob.n))
    full_cont[np.ix_(active_a, active_b)] = raw_cont
    full_bin[np.ix_(active_a, active_b)] = raw_bin

    pairs = [(int(i), int(a)) for i, a in zip(*np.nonzero(full_bin))]
    inliers_a = frozenset(i for i, _ in pairs)
    inliers_b = frozenset(a for _, a in pairs)
    partition = InlierPartition(
        inliers_a=inliers_a,
        outliers_a=frozenset(range(prob.m)) - inliers_a,
        inliers_b=inliers_b,
        outliers_b=frozenset(range(prob.n)) - inliers_b,
        tau=dict(pairs))

    padded = SolveReport(
        final_continuous=Correspondence(mat=full_cont, kind="continuous"),
        final_binary=Correspondence(mat=full_bin, kind="binary"),
        objective_trace=report.objective_trace,
        iterations=report.iterations,
        k_final=report.k_final,
        elapsed=report.elapsed,
        warnings=warnings)
    return RemovalResult(report=padded, partition=partition, rounds=rounds,
                         warnings=warnings)
