"""Hyperbolic geometry of concentric annulus domains.

The working domains are round annuli A_rho = {rho < |z| < 1/rho} carrying the
hyperbolic metric normalized so that the unit disk has ds = 2|dz|/(1-|z|^2).
With L = log(1/rho) the metric density is

    lambda(z) = pi / (2 L |z| cos(pi log|z| / (2 L))),

which is what the universal cover H -> A_rho pulls back from |dzeta|/Im zeta.
All structural constants of a compact pair K = closure(A_rho_K) inside
U = A_rho_U (core loop length, branch-separation radii, distortion modulus,
inclusion contraction factor) are derived from this density.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, GeometryError

DISTANCE_DECK_RANGE = 3  # windings searched when minimizing over deck transforms
BETA_SAFETY_MARGIN = 1e-6


@dataclass(frozen=True)
class HyperbolicAnnulus:
    """The annulus A_rho = {rho < |z| < 1/rho}, 0 < rho < 1.

    rho_inner = 0 encodes the punctured plane; such an instance is a valid
    placeholder but every metric query on it raises DomainError.
    """

    rho_inner: float

    def __post_init__(self):
        if not (0.0 <= self.rho_inner < 1.0):
            raise DomainError(f"rho_inner must lie in [0, 1), got {self.rho_inner}")

    @property
    def log_radius(self) -> float:
        """L = log(1/rho); the annulus spans log-modulus (-L, L)."""
        self._require_metric()
        return -math.log(self.rho_inner)

    def _require_metric(self):
        if self.rho_inner == 0.0:
            raise DomainError("metric queries are undefined for the punctured plane (rho = 0)")

    def contains(self, z, closed: bool = False, tol: float = 0.0):
        """Membership test via modulus bounds; closed=True includes the boundary."""
        self._require_metric()
        m = np.abs(z)
        lo, hi = self.rho_inner, 1.0 / self.rho_inner
        if closed:
            return (m >= lo - tol) & (m <= hi + tol)
        return (m > lo + tol) & (m < hi - tol)


@dataclass(frozen=True)
class DomainConstants:
    """Structural constants of a compact annulus K inside an annulus U.

    ell        -- infimum length of essential loops through K (hyperbolic units)
    alpha      -- tanh(ell/4)
    delta_big  -- solves tanh(delta_big/2) = alpha/7
    delta_prime-- solves tanh(delta_prime/2) = alpha/2
    beta       -- contraction factor of (Int K, d_IntK) -> (Int K, d_U), > 1
    diam_K     -- hyperbolic diameter of K measured in U
    """

    ell: float
    alpha: float
    delta_big: float
    delta_prime: float
    beta: float
    diam_K: float

    def as_dict(self) -> dict:
        return {
            "ell": self.ell,
            "alpha": self.alpha,
            "delta_big": self.delta_big,
            "delta_prime": self.delta_prime,
            "beta": self.beta,
            "diam_K": self.diam_K,
        }


def density_of_modulus(domain: HyperbolicAnnulus, modulus):
    """Hyperbolic density at |z| = modulus (rotation invariance makes this total)."""
    domain._require_metric()
    L = domain.log_radius
    m = np.asarray(modulus, dtype=float)
    inside = (m > domain.rho_inner) & (m < 1.0 / domain.rho_inner)
    if not np.all(inside):
        raise DomainError("modulus outside the open annulus")
    val = np.pi / (2.0 * L * m * np.cos(np.pi * np.log(m) / (2.0 * L)))
    if np.ndim(modulus) == 0:
        return float(val)
    return val


def hyperbolic_density(domain: HyperbolicAnnulus, z) -> float:
    """Density lambda(z) of the hyperbolic metric ds = lambda|dz| on A_rho."""
    return density_of_modulus(domain, np.abs(z))


def _lift_to_halfplane(domain: HyperbolicAnnulus, z):
    """One lift of z through the covering H -> A_rho (principal winding)."""
    L = domain.log_radius
    m = 2.0 * L
    z = np.asarray(z, dtype=complex)
    theta = np.pi * (np.log(np.abs(z)) + L) / m       # in (0, pi)
    lnr = -(np.pi / m) * np.angle(z)
    return np.exp(lnr + 1j * theta)


def hyperbolic_distance(domain: HyperbolicAnnulus, z1, z2) -> float:
    """Geodesic distance in A_rho.

    Lifts both points to the half-plane cover and minimizes the disk distance
    over deck transformations zeta -> exp(2 pi^2 k / m) zeta for |k| <= 3;
    more windings cannot be shorter at the separations that arise inside K.
    """
    domain._require_metric()
    z1 = np.asarray(z1, dtype=complex)
    z2 = np.asarray(z2, dtype=complex)
    if not (np.all(domain.contains(z1)) and np.all(domain.contains(z2))):
        raise DomainError("both points must lie in the open annulus")
    m = 2.0 * domain.log_radius
    w1 = _lift_to_halfplane(domain, z1)
    w2 = _lift_to_halfplane(domain, z2)
    best = None
    for k in range(-DISTANCE_DECK_RANGE, DISTANCE_DECK_RANGE + 1):
        s = math.exp(2.0 * math.pi**2 * k / m)
        q = np.abs(w1 - s * w2) ** 2 / (2.0 * w1.imag * s * w2.imag)
        d = np.arccosh(1.0 + q)
        best = d if best is None else np.minimum(best, d)
    if np.ndim(z1) == 0 and np.ndim(z2) == 0:
        return float(best)
    return best


def core_geodesic_length(domain: HyperbolicAnnulus) -> float:
    """Length of the core geodesic |z| = 1, which equals 2 pi^2 / log(1/rho^2)."""
    domain._require_metric()
    return 2.0 * math.pi**2 / (2.0 * domain.log_radius)


def epsilon_from_ell(ell: float, r) -> float:
    """Distortion modulus -6 log(1 - tanh(r/2)/tanh(ell/4)), defined for 0 <= r < ell/2."""
    alpha = math.tanh(ell / 4.0)
    r = np.asarray(r, dtype=float)
    if np.any(r < 0) or np.any(r >= ell / 2.0):
        raise DomainError("epsilon modulus requires 0 <= r < ell/2")
    t = np.tanh(r / 2.0) / alpha
    if np.any(t >= 1.0):
        raise DomainError("epsilon modulus argument too large (log of nonpositive value)")
    val = -6.0 * np.log1p(-t)
    if np.ndim(r) == 0:
        return float(val)
    return val


def epsilon_ell(constants: DomainConstants, r) -> float:
    """Distortion modulus for the domain pair that produced `constants`."""
    return epsilon_from_ell(constants.ell, r)


def distortion_sequence(constants: DomainConstants, n: int, beta: float) -> list:
    """Cumulative distortion constants c_1..c_n.

    log c_k is the sum of epsilon at radii delta_big * beta^{-j}, j < k; the
    increments decay geometrically so (1/n) log c_n -> 0.
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    if beta <= 1.0:
        raise DomainError("beta must exceed 1")
    radii = constants.delta_big * beta ** (-np.arange(n, dtype=float))
    increments = epsilon_from_ell(constants.ell, radii)
    return list(np.exp(np.cumsum(increments)))


def inclusion_contraction(domain_U: HyperbolicAnnulus, domain_K: HyperbolicAnnulus,
                          samples: int = 4095, margin: float = BETA_SAFETY_MARGIN) -> float:
    """Contraction factor beta of the inclusion (Int K, d_IntK) -> (Int K, d_U).

    Computed as the infimum over a radial sampling grid of the density ratio
    lambda_IntK / lambda_U (the ratio is rotation invariant), minus a safety
    margin because grid minimization overestimates the true infimum.
    """
    domain_U._require_metric()
    domain_K._require_metric()
    if domain_K.rho_inner <= domain_U.rho_inner:
        raise GeometryError("closure of K must be contained in U (need rho_K > rho_U)")
    LK = domain_K.log_radius
    # open interval, odd count so the symmetric minimum at u = 0 is a node
    u = np.linspace(-LK, LK, samples + 2)[1:-1]
    mods = np.exp(u)
    ratio = density_of_modulus(domain_K, mods) / density_of_modulus(domain_U, mods)
    beta = float(ratio.min()) - margin
    if beta <= 1.0:
        raise GeometryError(f"inclusion is not a strict contraction (beta = {beta:.6g})")
    return beta


def annulus_diameter(domain_U: HyperbolicAnnulus, domain_K: HyperbolicAnnulus,
                     n_radial: int = 25, n_angular: int = 49) -> float:
    """Hyperbolic diameter of K measured in the metric of U (coarse grid maximum)."""
    LK = domain_K.log_radius
    u = np.linspace(-LK, LK, n_radial)
    dth = np.linspace(0.0, np.pi, n_angular)
    U1, U2, T = np.meshgrid(u, u, dth, indexing="ij")
    z1 = np.exp(U1)
    z2 = np.exp(U2 + 1j * T)
    d = hyperbolic_distance(domain_U, z1, z2)
    return float(np.max(d))


def ell_for_pair(domain_U: HyperbolicAnnulus, domain_K: HyperbolicAnnulus) -> float:
    """Infimum length of essential loops through K.

    For the concentric pairs in scope K contains the unit circle, so the
    infimum is attained on the core geodesic of U.
    """
    if not (domain_K.rho_inner < 1.0 < 1.0 / domain_K.rho_inner):
        raise GeometryError("K must contain the unit circle")
    return core_geodesic_length(domain_U)


def domain_constants(domain_U: HyperbolicAnnulus, domain_K: HyperbolicAnnulus) -> DomainConstants:
    """Assemble every structural constant of the pair (K, U)."""
    ell = ell_for_pair(domain_U, domain_K)
    alpha = math.tanh(ell / 4.0)
    delta_big = 2.0 * math.atanh(alpha / 7.0)
    delta_prime = 2.0 * math.atanh(alpha / 2.0)
    beta = inclusion_contraction(domain_U, domain_K)
    diam = annulus_diameter(domain_U, domain_K)
    consts = DomainConstants(ell=ell, alpha=alpha, delta_big=delta_big,
                             delta_prime=delta_prime, beta=beta, diam_K=diam)
    # stated inequalities must hold for any admissible pair
    if not (delta_big < ell / 14.0 and delta_prime < ell / 4.0):
        raise GeometryError("inconsistent constants: delta bounds violated")
    return consts


def mixing_time(constants: DomainConstants) -> int:
    """Smallest n with 2 diam_K / beta^n <= delta_big."""
    n = math.log(2.0 * constants.diam_K / constants.delta_big) / math.log(constants.beta)
    return max(1, math.ceil(n))


def example_domains(k: float) -> tuple[HyperbolicAnnulus, HyperbolicAnnulus]:
    """The standard pair U = A_{k^2/2}, K = closure(A_{k/2}) for 0 < k < 1."""
    if not (0.0 < k < 1.0):
        raise DomainError("k must lie in (0, 1)")
    return HyperbolicAnnulus(k * k / 2.0), HyperbolicAnnulus(k / 2.0)
