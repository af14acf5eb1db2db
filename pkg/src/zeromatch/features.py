"""Shape-context descriptors and chi-squared dissimilarity.

A descriptor is a log-polar histogram of where the other points sit relative
to a reference point. Radii are normalized by the mean pairwise distance of
the whole set, which makes descriptors translation- and scale-invariant. The
rotation-invariant variant measures angles relative to the direction from
the point to the set centroid instead of the horizontal axis.

Binning conventions (deterministic):
  - radial bins are half-open on the left, (lo, hi], so a radius exactly on
    a boundary falls in the lower bin; radii outside [r_min, r_max] times
    the mean distance are clamped into the innermost/outermost bin;
  - angular bins are half-open [lo, hi) starting at the reference direction.
"""

from dataclasses import dataclass

import numpy as np

from .core import pairwise_distances

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class ShapeContextConfig:
    radial_bins: int = 5
    angular_bins: int = 12
    r_min: float = 0.125
    r_max: float = 2.0
    rotation_invariant: bool = False

    def __post_init__(self):
        if self.radial_bins < 2:
            raise ValueError("radial_bins must be >= 2")
        if self.angular_bins < 4:
            raise ValueError("angular_bins must be >= 4")
        if not 0 < self.r_min < self.r_max:
            raise ValueError("need 0 < r_min < r_max")


def _radial_edges(cfg):
    return np.geomspace(cfg.r_min, cfg.r_max, cfg.radial_bins + 1)


def _descriptor(rel, mean_dist, cfg):
    """Histogram of relative offsets ``rel`` (k x 2), already excluding self."""
    r = np.sqrt(np.sum(rel * rel, axis=1))
    if np.all(r == 0.0):
        raise ValueError("all other points coincide with the reference point")
    rho = r / mean_dist
    edges = _radial_edges(cfg)
    rbin = np.clip(np.searchsorted(edges, rho, side="left") - 1,
                   0, cfg.radial_bins - 1)

    theta = np.arctan2(rel[:, 1], rel[:, 0])
    if cfg.rotation_invariant:
        theta = theta - _reference_angle(rel)
    theta = np.mod(theta, TWO_PI)
    abin = (theta / (TWO_PI / cfg.angular_bins)).astype(int) % cfg.angular_bins

    hist = np.zeros((cfg.radial_bins, cfg.angular_bins))
    np.add.at(hist, (rbin, abin), 1.0)
    return hist / hist.sum()


def _reference_angle(rel):
    # centroid of the full set, seen from the reference point, is the mean
    # of the offsets to the others scaled by k/(k+1); the angle is the same
    center = rel.mean(axis=0)
    if np.all(center == 0.0):
        return 0.0  # reference point sits at the centroid; fall back to x-axis
    return np.arctan2(center[1], center[0])


def shape_context(pts, i, cfg=None):
    """Log-polar histogram descriptor of point ``i``; sums to 1."""
    cfg = cfg or ShapeContextConfig()
    coords = np.asarray(pts.points if hasattr(pts, "points") else pts, dtype=float)
    if coords.shape[0] < 2:
        raise ValueError("shape context needs at least 2 points")
    E = pairwise_distances(coords)
    mean_dist = float(np.mean(E[~np.eye(len(coords), dtype=bool)]))
    if mean_dist == 0.0:
        raise ValueError("all points coincide; no geometry to describe")
    rel = np.delete(coords, i, axis=0) - coords[i]
    return _descriptor(rel, mean_dist, cfg)


def build_descriptors(pts, cfg=None):
    """Descriptors for every point of the set, as a (n, radial, angular) array."""
    cfg = cfg or ShapeContextConfig()
    coords = np.asarray(pts.points if hasattr(pts, "points") else pts, dtype=float)
    if coords.shape[0] < 2:
        raise ValueError("shape context needs at least 2 points")
    E = pairwise_distances(coords)
    mean_dist = float(np.mean(E[~np.eye(len(coords), dtype=bool)]))
    if mean_dist == 0.0:
        raise ValueError("all points coincide; no geometry to describe")
    out = np.empty((len(coords), cfg.radial_bins, cfg.angular_bins))
    for i in range(len(coords)):
        rel = np.delete(coords, i, axis=0) - coords[i]
        out[i] = _descriptor(rel, mean_dist, cfg)
    return out


def chi2_cost(h1, h2):
    """Chi-squared statistic between two unit-sum histograms, in [0, 1]."""
    h1 = np.asarray(h1, dtype=float)
    h2 = np.asarray(h2, dtype=float)
    if h1.shape != h2.shape:
        raise ValueError(f"histogram shapes differ: {h1.shape} vs {h2.shape}")
    denom = h1 + h2
    num = (h1 - h2) ** 2
    mask = denom > 0
    return 0.5 * float(np.sum(num[mask] / denom[mask]))


def pairwise_cost(desc_a, desc_b):
    """Matrix of chi-squared costs between two descriptor stacks."""
    desc_a = np.asarray(desc_a, dtype=float)
    desc_b = np.asarray(desc_b, dtype=float)
    if desc_a.shape[1:] != desc_b.shape[1:]:
        raise ValueError("descriptor shapes differ between sides")
    A = desc_a.reshape(len(desc_a), -1)
    B = desc_b.reshape(len(desc_b), -1)
    num = (A[:, None, :] - B[None, :, :]) ** 2
    denom = A[:, None, :] + B[None, :, :]
    frac = np.divide(num, denom, out=np.zeros_like(num), where=denom > 0)
    return 0.5 * frac.sum(axis=2)
