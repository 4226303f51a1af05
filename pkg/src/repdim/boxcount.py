"""Box-counting dimension from backward-orbit point clouds.

This is the oracle side of the cross-validation: it never touches transfer
operators.  A repeller is approximated by the depth-n preimage tree of a base
point, and the box dimension is read off from occupied-box counts over a range
of radii.  Boxes are squares in the (log-modulus, argument) chart, which is
bi-Lipschitz to the hyperbolic metric on K, so the dimension is unaffected;
counts are averaged over four shifted grids to suppress aliasing.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import maps as maps_mod
from .errors import DomainError, ResolutionError

DEFAULT_CAP = 2_000_000
DEFAULT_RADII_COUNT = 12
DEFAULT_TOP_DIVISOR = 8
DEFAULT_DECADES = 2.0
_OFFSETS = ((0.0, 0.0), (0.5, 0.0), (0.0, 0.5), (0.5, 0.5))


@dataclass
class PointCloud:
    """Finite sample of a repeller: depth-n preimages of a base point."""

    points: np.ndarray
    generation_depth: int
    chart: str = "log-polar"          # "log-polar" for annulus maps, "linear" for fixtures
    cap_exceeded: bool = False

    def __len__(self):
        return len(self.points)

    def chart_coords(self) -> np.ndarray:
        if self.chart == "linear":
            return np.stack([np.real(self.points), np.imag(self.points)], axis=1)
        return np.stack([np.log(np.abs(self.points)),
                         np.angle(self.points) % (2.0 * np.pi)], axis=1)

    def chart_span(self) -> float:
        P = self.chart_coords()
        return float((P.max(axis=0) - P.min(axis=0)).max())

    def spacing(self, sample: int = 4096, seed: int = 0) -> float:
        """Median nearest-neighbor gap in the chart (subsampled for large clouds)."""
        P = self.chart_coords()
        if len(P) > sample:
            rng = np.random.default_rng(seed)
            P = P[rng.choice(len(P), sample, replace=False)]
        tree = cKDTree(P)
        d, _ = tree.query(P, k=2)
        return float(np.median(d[:, 1]))

    def merged_with(self, other: "PointCloud") -> "PointCloud":
        if self.chart != other.chart:
            raise DomainError("cannot merge clouds in different charts")
        return PointCloud(np.concatenate([self.points, other.points]),
                          min(self.generation_depth, other.generation_depth),
                          self.chart, self.cap_exceeded or other.cap_exceeded)


def backward_orbit(maps_seq, base: complex, depth: int, cap: int = DEFAULT_CAP,
                   K=None, seed: int = 0) -> PointCloud:
    """Full preimage tree of `base` to the given depth (breadth-first).

    The level-k frontier consists of the preimages under the k-th map from the
    end of the (cycled) sequence, so the final cloud samples the time-zero
    invariant set.  If a level would exceed `cap` it is subsampled uniformly
    within each branch to stay unbiased.
    """
    if depth < 1:
        raise DomainError("depth must be >= 1")
    seq = [maps_seq[k % len(maps_seq)] for k in range(depth)]
    rng = np.random.default_rng(seed)
    pts = np.asarray([base], dtype=complex)
    capped = False
    for m in reversed(seq):
        groups = []
        for mask, branch_pts, _dfs in maps_mod.preimage_arrays(m, pts, K):
            if np.any(mask):
                groups.append(branch_pts[mask])
        if not groups:
            raise DomainError("backward orbit died out; check base point and domains")
        total = sum(len(g) for g in groups)
        if total > cap:
            capped = True
            keep = cap / total
            groups = [g[rng.random(len(g)) < keep] for g in groups]
        pts = np.concatenate(groups)
    if capped:
        warnings.warn("backward orbit exceeded the cap; levels were subsampled")
    chart = "linear" if seq[0].kind == "linear_ifs" else "log-polar"
    return PointCloud(points=pts, generation_depth=depth, chart=chart, cap_exceeded=capped)


def default_radii(cloud: PointCloud, top_divisor: float = DEFAULT_TOP_DIVISOR,
                  decades: float = DEFAULT_DECADES, count: int = DEFAULT_RADII_COUNT):
    top = cloud.chart_span() / top_divisor
    return np.geomspace(top, top / 10.0 ** decades, count)


@dataclass
class BoxDimension:
    slope: float
    radii: np.ndarray
    counts: np.ndarray
    two_point_slopes: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def upper_surrogate(self) -> float:
        return float(self.two_point_slopes.max())

    @property
    def lower_surrogate(self) -> float:
        return float(self.two_point_slopes.min())


def _occupied(P: np.ndarray, origin: np.ndarray, r: float) -> float:
    cnt = 0
    for ox, oy in _OFFSETS:
        ij = np.floor((P - origin) / r + (ox, oy)).astype(np.int64)
        cnt += len(np.unique((ij[:, 0] << np.int64(32)) + ij[:, 1]))
    return cnt / len(_OFFSETS)


def box_dimension(cloud: PointCloud, radii) -> BoxDimension:
    """Least-squares slope of log N(r) against log(1/r), offset-averaged.

    Radii should span at least ~1.5 decades and stay well above the cloud
    spacing; the max/min consecutive two-point slopes serve as upper/lower box
    surrogates.
    """
    radii = np.sort(np.asarray(radii, dtype=float))[::-1]
    if len(radii) < 3:
        raise DomainError("need at least 3 radii")
    if cloud.spacing() > radii.min():
        raise ResolutionError("cloud spacing exceeds the smallest radius; deepen the orbit")
    P = cloud.chart_coords()
    origin = P.min(axis=0)
    counts = np.asarray([_occupied(P, origin, r) for r in radii])
    x = np.log(1.0 / radii)
    y = np.log(counts)
    slope = float(np.polyfit(x, y, 1)[0])
    two_point = np.diff(y) / np.diff(x)
    return BoxDimension(slope=slope, radii=radii, counts=counts,
                        two_point_slopes=two_point)
