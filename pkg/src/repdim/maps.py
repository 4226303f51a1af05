"""Conformal covering maps on annulus pairs, plus a synthetic interval fixture.

Three families share one descriptor type:

* power_plus_c  -- z -> z^(N+2) + c, the workhorse family; full preimages are
  the (N+2)-nd roots of y - c filtered to the closed modulus band of K.
* circle_power  -- z -> z^d, the c = 0 special case kept as its own kind.
* linear_ifs    -- an affine expanding interval system with constant derivative
  per branch, embedded as a radial segment.  This is a synthetic test fixture:
  it supplies closed-form pressure oracles and the reducible systems used by
  the component decomposition, and it declares its (constant) derivative
  directly instead of deriving it from a metric density.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, EmptyPreimage, RootError, ValidationError
from .geometry import HyperbolicAnnulus, density_of_modulus

MODULUS_BAND_TOL = 1e-12
RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class IFSBranch:
    """One inverse branch y -> ratio * y + offset of an expanding interval map.

    `window` is the sub-interval of [0, 1] on which the branch is defined;
    the forward map carries the image interval onto the window with slope
    1/ratio.  The default window makes the classic full-shift IFS.
    """

    ratio: float
    offset: float
    window: tuple = (0.0, 1.0)

    def __post_init__(self):
        if not (0.0 < self.ratio < 1.0):
            raise DomainError("branch ratio must lie in (0, 1)")

    def image(self) -> tuple:
        lo, hi = self.window
        return (self.ratio * lo + self.offset, self.ratio * hi + self.offset)


@dataclass(frozen=True)
class MapDescriptor:
    """A member of the covering family over U, or a synthetic interval system."""

    kind: str                                   # power_plus_c | circle_power | linear_ifs
    domain: HyperbolicAnnulus | None = None     # the U the map covers
    degree_exponent: int = 0                    # power_plus_c: map is z^(N+2) + c
    coefficient: complex = 0j
    power: int = 2                              # circle_power degree
    branches: tuple = ()
    synthetic: bool = False

    def cache_key(self):
        rho = self.domain.rho_inner if self.domain is not None else None
        return (self.kind, rho, self.degree_exponent, complex(self.coefficient),
                self.power, self.branches)


def power_plus_c(N: int, c: complex, domain: HyperbolicAnnulus) -> MapDescriptor:
    if N < 0:
        raise DomainError("degree exponent N must be >= 0")
    return MapDescriptor(kind="power_plus_c", domain=domain, degree_exponent=N,
                         coefficient=complex(c))


def circle_power(d: int, domain: HyperbolicAnnulus) -> MapDescriptor:
    if d < 2:
        raise DomainError("circle power degree must be >= 2")
    return MapDescriptor(kind="circle_power", domain=domain, power=d)


def linear_ifs(branches) -> MapDescriptor:
    brs = tuple(b if isinstance(b, IFSBranch) else IFSBranch(*b) for b in branches)
    if not brs:
        raise DomainError("linear_ifs needs at least one branch")
    return MapDescriptor(kind="linear_ifs", branches=brs, synthetic=True)


@dataclass
class PreimageSet:
    """Complete preimage of one target point, with conformal derivatives attached."""

    target: complex
    points: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=complex))
    derivatives: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=float))

    def __len__(self):
        return len(self.points)


def _power_degree(m: MapDescriptor) -> int:
    return m.degree_exponent + 2 if m.kind == "power_plus_c" else m.power


def degree_max(m: MapDescriptor) -> int:
    """Maximal local degree d_max over target points."""
    if m.kind == "linear_ifs":
        return _ifs_degree(m, max)
    return _power_degree(m)


def degree_min(m: MapDescriptor) -> int:
    """Minimal local degree d_min over target points."""
    if m.kind == "linear_ifs":
        return _ifs_degree(m, min)
    return _power_degree(m)


def _ifs_degree(m: MapDescriptor, agg) -> int:
    # local degree is the number of branch windows containing y; evaluate at
    # window endpoints and midpoints, which is exhaustive for finitely many
    # interval windows
    probes = sorted({x for b in m.branches for x in
                     (b.window[0], b.window[1], 0.5 * (b.window[0] + b.window[1]))})
    counts = [sum(1 for b in m.branches if b.window[0] <= p <= b.window[1]) for p in probes]
    counts = [c for c in counts if c > 0]
    if not counts:
        raise DomainError("no branch window is nonempty")
    return agg(counts)


def evaluate(m: MapDescriptor, z: complex) -> complex:
    """Forward evaluation f(z); exact polynomial arithmetic for the power kinds."""
    if m.kind == "linear_ifs":
        x = float(np.real(z))
        for b in m.branches:
            lo, hi = b.image()
            if lo - 1e-12 <= x <= hi + 1e-12:
                return complex((x - b.offset) / b.ratio)
        raise DomainError(f"{x} is not in any branch image")
    if m.domain is not None and not m.domain.contains(z, closed=True, tol=1e-12):
        raise DomainError("point outside the covering domain")
    if m.kind == "power_plus_c":
        return z ** (m.degree_exponent + 2) + m.coefficient
    return z ** m.power


def conformal_derivative(m: MapDescriptor, z: complex) -> float:
    """|f'(z)| rescaled by the hyperbolic densities of U at f(z) and z.

    For the synthetic interval fixture the branch derivative 1/ratio is
    declared directly.
    """
    if m.kind == "linear_ifs":
        x = float(np.real(z))
        for b in m.branches:
            lo, hi = b.image()
            if lo - 1e-12 <= x <= hi + 1e-12:
                return 1.0 / b.ratio
        raise DomainError(f"{x} is not in any branch image")
    d = _power_degree(m)
    c = m.coefficient if m.kind == "power_plus_c" else 0j
    w = z ** d + c
    U = m.domain
    if not (U.contains(z) and U.contains(w)):
        raise DomainError("point or image outside the open annulus")
    euclid = d * abs(z) ** (d - 1)
    return float(euclid * density_of_modulus(U, abs(w)) / density_of_modulus(U, abs(z)))


def preimage_arrays(m: MapDescriptor, y, K: HyperbolicAnnulus | None):
    """Vectorized full preimage of an array of targets.

    Returns a list of (mask, points, hyperbolic derivative) triples, one per
    branch; `mask` marks the targets for which the branch exists.  For the
    power kinds every branch shares one root modulus and one derivative value
    per target.  Roots are filtered to the closed modulus band of K.
    """
    y = np.asarray(y, dtype=complex)
    if m.kind == "linear_ifs":
        x = np.real(y)
        out = []
        for b in m.branches:
            lo, hi = b.window
            mask = (x >= lo - 1e-12) & (x <= hi + 1e-12)
            pts = (b.ratio * x + b.offset).astype(complex)
            dfs = np.full(y.shape, 1.0 / b.ratio)
            out.append((mask, pts, dfs))
        return out

    d = _power_degree(m)
    c = m.coefficient if m.kind == "power_plus_c" else 0j
    w = y - c
    aw = np.abs(w)
    if np.any(aw == 0.0):
        raise RootError("target coincides with the critical value c")
    rmod = aw ** (1.0 / d)
    if K is not None:
        band_ok = (rmod >= K.rho_inner - MODULUS_BAND_TOL) & \
                  (rmod <= 1.0 / K.rho_inner + MODULUS_BAND_TOL)
    else:
        band_ok = np.ones(y.shape, dtype=bool)
    base = np.angle(w) / d
    U = m.domain
    # density is only needed at admitted roots; dummy modulus elsewhere keeps
    # the vectorized call inside the open annulus
    safe_rmod = np.where(band_ok, rmod, 1.0)
    df = d * rmod ** (d - 1) * density_of_modulus(U, np.abs(y)) / density_of_modulus(U, safe_rmod)
    out = []
    for j in range(d):
        pts = rmod * np.exp(1j * (base + 2.0 * np.pi * j / d))
        out.append((band_ok.copy(), pts, df))
    return out


def preimages(m: MapDescriptor, y: complex, K: HyperbolicAnnulus | None) -> PreimageSet:
    """Full preimage set of a single target point y inside K."""
    branches = preimage_arrays(m, np.asarray([y], dtype=complex), K)
    pts = [b[1][0] for b in branches if b[0][0]]
    dfs = [float(b[2][0]) for b in branches if b[0][0]]
    if not pts:
        raise EmptyPreimage(f"no admissible preimage of {y}")
    ps = PreimageSet(target=complex(y), points=np.asarray(pts, dtype=complex),
                     derivatives=np.asarray(dfs, dtype=float))
    if m.kind != "linear_ifs":
        resid = np.max(np.abs(np.asarray([evaluate(m, p) for p in ps.points]) - y))
        if resid > RESIDUAL_TOL * max(1.0, abs(y)):
            raise RootError(f"preimage residual {resid:.3e} exceeds tolerance")
    return ps


def branch_radius(m: MapDescriptor, x: complex, constants) -> float:
    """Branch-separation radius min{log((5 + a/Df)/(5 - a/Df)), delta_big}, a = alpha."""
    df = conformal_derivative(m, x)
    t = constants.alpha / df
    return min(float(np.log((5.0 + t) / (5.0 - t))), constants.delta_big)


def derivative_range(m: MapDescriptor, K: HyperbolicAnnulus | None,
                     resolution: tuple = (256, 256)):
    """(min, max) of the conformal derivative over preimages of a K-sampling grid."""
    if m.kind == "linear_ifs":
        dfs = [1.0 / b.ratio for b in m.branches]
        return min(dfs), max(dfs)
    n_r, n_t = resolution
    LK = K.log_radius
    u = np.linspace(-LK, LK, n_r)
    th = np.arange(n_t) * (2.0 * np.pi / n_t)
    nodes = np.exp(u[:, None] + 1j * th[None, :]).ravel()
    lo, hi = np.inf, -np.inf
    for mask, _pts, dfs in preimage_arrays(m, nodes, K):
        if np.any(mask):
            lo = min(lo, float(dfs[mask].min()))
            hi = max(hi, float(dfs[mask].max()))
    if not np.isfinite(lo):
        raise EmptyPreimage("sampling grid produced no admissible preimages")
    return lo, hi


def condition_number(m: MapDescriptor, K: HyperbolicAnnulus | None,
                     resolution: tuple = (256, 256)) -> float:
    """sup Df * sup(1/Df) over sampled preimages of K; always >= 1."""
    lo, hi = derivative_range(m, K, resolution)
    return hi / lo


def degree_area_check(m: MapDescriptor, K: HyperbolicAnnulus | None,
                      resolution: tuple = (256, 256)) -> bool:
    """Diagnostic: maximal degree must not exceed (sup Df)^2."""
    _lo, hi = derivative_range(m, K, resolution)
    return degree_max(m) <= hi * hi


def validate_map(m: MapDescriptor, K: HyperbolicAnnulus | None, beta: float,
                 resolution: tuple = (64, 64)) -> None:
    """Admissibility check for ensemble members: uniform expansion and area bound."""
    lo, hi = derivative_range(m, K, resolution)
    if lo < beta * (1.0 - 1e-9):
        raise ValidationError(
            f"expansion violated: min Df = {lo:.6g} < beta = {beta:.6g}")
    if degree_max(m) > hi * hi:
        raise ValidationError("degree/area bound violated")
