"""Dimension from pressure zeros.

Three curves in s come out of an operator run: the lower and upper bracket
curves (1/n) log m_n(s) and (1/n) log M_n(s), and the cocycle pressure from
the anchored normalization.  All three are strictly decreasing.  The bracket
roots enclose the dimension conservatively from a finite-n run; the cocycle
root is the point estimate, since the anchored iteration converges to the
discretized operator's leading eigenvalue and is immune to the one-sided
finite-n bias of the raw bracket.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import transfer
from .errors import ContractionError, DegenerateBound, DomainError, NoSignChange, NumericError
from .transfer import Grid

DEFAULT_S_RANGE = (0.0, 2.2)
DEFAULT_TOL = 1e-6
MAX_BISECT = 60
PLANAR_CEILING = 2.0


@dataclass
class DimensionResult:
    """Zero of the pressure with its conservative enclosure."""

    s_crit: float
    s_lower: float
    s_upper: float
    n_used: int
    grid_shape: tuple
    diagnostics: dict = field(default_factory=dict)


def _bisect(curve, s_range, tol, label: str):
    """Root of a strictly decreasing curve by bisection.

    Sign change over s_range is required; monotonicity of every evaluated
    value is asserted along the way.  Once the interval is below tol the root
    is refined by one secant step inside it, which removes the tol-sized
    quantization of the plain midpoint (and is exact for linear curves).
    """
    lo, hi = s_range
    if not (hi > lo):
        raise DomainError("empty s range")
    seen = []

    def ev(s):
        v = curve(s)
        if not np.isfinite(v):
            raise NumericError(f"nonfinite {label} pressure at s = {s}")
        seen.append((s, v))
        return v

    flo, fhi = ev(lo), ev(hi)
    if flo < 0.0 or fhi > 0.0:
        raise NoSignChange(
            f"{label} pressure does not change sign on [{lo}, {hi}] "
            f"(values {flo:.4g}, {fhi:.4g})")
    a, b, fa, fb = lo, hi, flo, fhi
    for _ in range(MAX_BISECT):
        if b - a <= tol:
            break
        mid = 0.5 * (a + b)
        fm = ev(mid)
        if fm > 0.0:
            a, fa = mid, fm
        else:
            b, fb = mid, fm
    seen.sort(key=lambda t: t[0])
    vals = [v for _, v in seen]
    if any(vals[i + 1] > vals[i] + 1e-9 for i in range(len(vals) - 1)):
        raise NumericError(f"{label} pressure is not decreasing in s")
    if fa > fb:
        return a + (b - a) * fa / (fa - fb)
    return 0.5 * (a + b)


def solve_dimension(maps_seq, n: int, s_range=DEFAULT_S_RANGE, tol: float = DEFAULT_TOL,
                    grid: Grid | None = None, cocycle_steps: int | None = None,
                    compute_eta: bool = True) -> DimensionResult:
    """Locate the pressure zero for a (cycled) map sequence.

    s_lower / s_upper are the roots of the depth-n lower/upper bracket curves,
    ordered s_lower <= s_upper; s_crit is the root of the cocycle pressure and
    lies between them.
    """
    if grid is None:
        raise DomainError("solve_dimension needs an explicit grid")
    steps = cocycle_steps if cocycle_steps is not None else max(48, 2 * n)

    bracket_cache: dict = {}

    def brackets(s):
        if s not in bracket_cache:
            est = transfer.pressure_bracket(s, maps_seq, n, grid)
            bracket_cache[s] = est
        return bracket_cache[s]

    s_lower = _bisect(lambda s: brackets(s).lower, s_range, tol, "lower-bracket")
    s_upper = _bisect(lambda s: brackets(s).upper, s_range, tol, "upper-bracket")
    s_crit = _bisect(lambda s: transfer.cocycle_pressure(s, maps_seq, steps, grid)[0],
                     s_range, tol, "cocycle")

    est_at_root = transfer.pressure_bracket(s_crit, maps_seq, n, grid)
    eta = None
    if compute_eta:
        try:
            eta = transfer.contraction_rate(s_crit, maps_seq, trials=2,
                                            steps=min(40, steps), grid=grid)
        except ContractionError:
            eta = None
    diag = {
        "bracket_width_at_root": est_at_root.width,
        "eta_fit": eta,
        "clamped_points": est_at_root.clamped_points,
        "bracket_midpoint": 0.5 * (s_lower + s_upper),
        "planar_ceiling_ok": bool(s_crit <= PLANAR_CEILING + 1e-3),
    }
    return DimensionResult(s_crit=s_crit, s_lower=min(s_lower, s_crit),
                           s_upper=max(s_upper, s_crit), n_used=n,
                           grid_shape=grid.shape, diagnostics=diag)


def critical_exponents(maps_seq, n: int, s_range=DEFAULT_S_RANGE,
                       tol: float = DEFAULT_TOL, grid: Grid | None = None) -> tuple:
    """Lower/upper critical exponents of a (possibly nonstationary) sequence.

    The liminf/limsup of (1/k) log m_k and (1/k) log M_k are replaced by the
    running inf/sup over the tail window k > n/2 of a length-n run.
    """
    if grid is None:
        raise DomainError("critical_exponents needs an explicit grid")
    seq = transfer.materialize(maps_seq, n)
    window = range(max(1, n // 2), n + 1)

    trace_cache: dict = {}

    def curves(s):
        if s not in trace_cache:
            _, tr = transfer.iterate_sequence(s, seq, grid=grid)
            lo = min(tr.log_m[k - 1] / k for k in window)
            up = max(tr.log_M[k - 1] / k for k in window)
            trace_cache[s] = (lo, up)
        return trace_cache[s]

    s_lo = _bisect(lambda s: curves(s)[0], s_range, tol, "tail-lower")
    s_up = _bisect(lambda s: curves(s)[1], s_range, tol, "tail-upper")
    return s_lo, s_up


def dimension_bounds(ensemble_stats: dict) -> tuple:
    """A-priori enclosure of the almost-sure dimension from degree/dilation means.

    Expects keys E_log_dmin, E_log_dmax, E_log_sup_Df, E_log_sup_invDf; the
    returned interval must contain every pressure-zero estimate for the same
    ensemble.
    """
    den_lo = ensemble_stats["E_log_sup_Df"]
    den_up = -ensemble_stats["E_log_sup_invDf"]
    if den_lo <= 0.0 or den_up <= 0.0:
        raise DegenerateBound("nonpositive denominator in dimension bounds")
    lower = ensemble_stats["E_log_dmin"] / den_lo
    upper = ensemble_stats["E_log_dmax"] / den_up
    return lower, upper
