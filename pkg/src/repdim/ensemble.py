"""Random map ensembles: i.i.d. sequences z -> z^(N+2) + c.

Degrees follow a Poisson law (sampled by inversion, so sweeps with common
random numbers stay monotone-coupled across the rate parameter), coefficients
are area-uniform on a closed disk with |center| + radius < k^2/4, which keeps
every sampled map uniformly expanding on the working pair U = A_{k^2/2},
K = closure(A_{k/2}).  Randomness is counter-based: each (seed, replica,
index) owns an independent Philox stream, so replicas and sweep points are
reproducible and order-independent under parallel execution.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numpy.random import Generator, Philox

from . import maps as maps_mod
from . import transfer
from .errors import DomainError, ValidationError
from .geometry import domain_constants, example_domains
from .maps import power_plus_c
from .solver import DimensionResult, _bisect
from .transfer import Grid

BURN_IN = 20
POISSON_MAX = 400
DEFAULT_GRID = (64, 128)
STATS_RESOLUTION = (48, 48)


@dataclass(frozen=True)
class EnsembleSpec:
    """Law of the random family plus the Monte Carlo budget."""

    a: complex = 0j
    r: float = 0.0
    lam: float = 0.0
    k: float = 0.99
    seq_len: int = 160
    seed: int = 0
    replicas: int = 4

    def __post_init__(self):
        if self.r < 0 or self.lam < 0:
            raise DomainError("r and lambda must be nonnegative")
        if abs(self.a) + self.r >= self.k ** 2 / 4.0:
            raise DomainError(
                f"need |a| + r < k^2/4 = {self.k ** 2 / 4.0:.6g}, "
                f"got {abs(self.a) + self.r:.6g}")
        if self.seq_len < 1 or self.replicas < 1:
            raise DomainError("seq_len and replicas must be >= 1")

    def domains(self):
        return example_domains(self.k)

    def with_(self, **kw) -> "EnsembleSpec":
        cur = dict(a=self.a, r=self.r, lam=self.lam, k=self.k,
                   seq_len=self.seq_len, seed=self.seed, replicas=self.replicas)
        cur.update(kw)
        return EnsembleSpec(**cur)


def _stream(seed: int, replica: int, index: int) -> Generator:
    # 128-bit Philox key: (seed, replica << 40 | index) gives index-addressable
    # independent streams
    ctx = (np.uint64(replica) << np.uint64(40)) | np.uint64(index)
    return Generator(Philox(key=np.array([np.uint64(seed), ctx], dtype=np.uint64)))


def poisson_inverse(lam: float, u: float) -> int:
    """Poisson sample by CDF inversion (sequential search; lam is small in scope)."""
    if lam == 0.0:
        return 0
    p = math.exp(-lam)
    cdf = p
    n = 0
    while u > cdf and n < POISSON_MAX:
        n += 1
        p *= lam / n
        cdf += p
    return n


def sample_sequence(spec: EnsembleSpec, replica: int = 0, validate: bool = True) -> list:
    """Draw seq_len maps z -> z^(N+2) + c, deterministically from the seed."""
    U, K = spec.domains()
    beta = None
    if validate:
        beta = domain_constants(U, K).beta
    out = []
    for i in range(spec.seq_len):
        g = _stream(spec.seed, replica, i)
        u_deg, u_rad, u_ang = g.uniform(size=3)
        N = poisson_inverse(spec.lam, u_deg)
        c = spec.a + spec.r * math.sqrt(u_rad) * np.exp(2j * np.pi * u_ang)
        if abs(c) > abs(spec.a) + spec.r + 1e-12:
            raise ValidationError("sampled coefficient escaped the disk")
        m = power_plus_c(N, c, U)
        if validate:
            maps_mod.validate_map(m, K, beta, resolution=(24, 24))
        out.append(m)
    return out


def ensemble_statistics(spec: EnsembleSpec, resolution=STATS_RESOLUTION) -> dict:
    """Plug-in means of log degree and log dilation across the sampled family."""
    _, K = spec.domains()
    logs = {"E_log_dmin": [], "E_log_dmax": [], "E_log_sup_Df": [], "E_log_sup_invDf": []}
    for rep in range(spec.replicas):
        for m in sample_sequence(spec, rep, validate=False):
            lo, hi = maps_mod.derivative_range(m, K, resolution)
            logs["E_log_dmin"].append(math.log(maps_mod.degree_min(m)))
            logs["E_log_dmax"].append(math.log(maps_mod.degree_max(m)))
            logs["E_log_sup_Df"].append(math.log(hi))
            logs["E_log_sup_invDf"].append(math.log(1.0 / lo))
    return {k: float(np.mean(v)) for k, v in logs.items()}


def _replica_run(spec: EnsembleSpec, replica: int, s: float, grid: Grid):
    seq = sample_sequence(spec, replica, validate=False)
    _, trace = transfer.iterate_sequence(s, seq, grid=grid)
    return trace


def _default_grid(spec: EnsembleSpec, grid: Grid | None) -> Grid:
    if grid is not None:
        return grid
    _, K = spec.domains()
    return Grid.from_annulus(K, *DEFAULT_GRID)


def random_pressure(spec: EnsembleSpec, s: float, grid: Grid | None = None) -> transfer.PressureEstimate:
    """Cocycle pressure estimate with replica-based standard error.

    Each replica runs the anchored iteration along its own sampled sequence;
    the first BURN_IN normalization factors are discarded as the memory-loss
    transient.  The m/M bracket of the first replica's run is attached.
    """
    grid = _default_grid(spec, grid)
    means = []
    first_trace = None
    for rep in range(spec.replicas):
        trace = _replica_run(spec, rep, s, grid)
        b = min(BURN_IN, spec.seq_len - 1)
        means.append(float(np.mean(trace.log_p[b:])))
        if rep == 0:
            first_trace = trace
    lo, up = first_trace.bracket(spec.seq_len)
    std_err = float(np.std(means, ddof=1) / math.sqrt(len(means))) if len(means) > 1 else 0.0
    return transfer.PressureEstimate(
        s=s, n=spec.seq_len, lower=lo, upper=up,
        cocycle=float(np.mean(means)), std_error=std_err,
        clamped_points=first_trace.clamped_points)


def random_dimension(spec: EnsembleSpec, tol: float = 1e-3,
                     grid: Grid | None = None, s_range=(0.0, 2.2)) -> DimensionResult:
    """Zero of the replica-mean cocycle pressure, with per-replica dispersion.

    The same sampled sequences (common random numbers) are reused at every
    probed s, so the output is deterministic in the spec.  Per-replica roots
    are interpolated from the probe values collected during bisection.
    """
    grid = _default_grid(spec, grid)
    probes: dict = {}
    bracket_cache: dict = {}

    def _brackets_at(s):
        if s in probes:
            return probes[s][1]
        if s not in bracket_cache:
            bracket_cache[s] = _replica_run(spec, 0, s, grid).bracket(spec.seq_len)
        return bracket_cache[s]

    def mean_pressure(s):
        if s not in probes:
            vals, braks = [], None
            for rep in range(spec.replicas):
                trace = _replica_run(spec, rep, s, grid)
                b = min(BURN_IN, spec.seq_len - 1)
                vals.append(float(np.mean(trace.log_p[b:])))
                if rep == 0:
                    braks = trace.bracket(spec.seq_len)
            probes[s] = (np.asarray(vals), braks)
        return float(np.mean(probes[s][0]))

    s_crit = _bisect(mean_pressure, s_range, tol, "ensemble-cocycle")

    # enclosure from replica 0's depth-seq_len bracket curves; these bisections
    # only need the one replica, so they run it alone
    def lower_curve(s):
        return _brackets_at(s)[0]

    def upper_curve(s):
        return _brackets_at(s)[1]

    s_lower = _bisect(lower_curve, s_range, tol, "ensemble-lower")
    s_upper = _bisect(upper_curve, s_range, tol, "ensemble-upper")

    roots = _per_replica_roots(probes, spec.replicas)
    disp = float(np.std(roots, ddof=1)) if len(roots) > 1 else 0.0
    diag = {
        "replica_roots": roots,
        "dispersion": disp,
        "bracket_width_at_root": upper_curve(s_crit) - lower_curve(s_crit),
        "planar_ceiling_ok": bool(s_crit <= 2.0 + 1e-3),
    }
    return DimensionResult(s_crit=s_crit, s_lower=min(s_lower, s_crit),
                           s_upper=max(s_upper, s_crit), n_used=spec.seq_len,
                           grid_shape=grid.shape, diagnostics=diag)


def _per_replica_roots(probes: dict, replicas: int) -> list:
    ss = np.asarray(sorted(probes.keys()))
    roots = []
    for rep in range(replicas):
        vals = np.asarray([probes[s][0][rep] for s in ss])
        sign = vals > 0
        idx = None
        for i in range(len(ss) - 1):
            if sign[i] and not sign[i + 1]:
                idx = i
        if idx is None:
            roots.append(float("nan"))
            continue
        s0, s1 = ss[idx], ss[idx + 1]
        v0, v1 = vals[idx], vals[idx + 1]
        roots.append(float(s0 + (s1 - s0) * v0 / (v0 - v1)))
    return roots


@dataclass
class SweepResult:
    """Dimension estimates along one parameter axis, common random numbers."""

    axis: str
    samples: list = field(default_factory=list)   # (value, d, std_error, bracket_width)
    fit_degree: int = 3
    fit_coeffs: list = field(default_factory=list)
    fit_residual_rms: float = 0.0
    pooled_std_error: float = 0.0


_SWEEP_AXES = ("a_modulus", "r", "lambda")


def _spec_for(base: EnsembleSpec, axis: str, value: float) -> EnsembleSpec:
    if axis == "a_modulus":
        phase = np.exp(1j * np.angle(base.a)) if base.a != 0 else 1.0
        return base.with_(a=value * phase)
    if axis == "r":
        return base.with_(r=value)
    if axis == "lambda":
        return base.with_(lam=value)
    raise DomainError(f"unknown sweep axis {axis!r}; expected one of {_SWEEP_AXES}")


def _sweep_point(args):
    base, axis, value, tol, grid_shape = args
    spec = _spec_for(base, axis, value)
    _, K = spec.domains()
    grid = Grid.from_annulus(K, *grid_shape)
    res = random_dimension(spec, tol, grid)
    roots = [r for r in res.diagnostics["replica_roots"] if np.isfinite(r)]
    std_err = float(np.std(roots, ddof=1) / math.sqrt(len(roots))) if len(roots) > 1 else 0.0
    width = res.s_upper - res.s_lower
    return (float(value), res.s_crit, std_err, width)


def parameter_sweep(base: EnsembleSpec, axis: str, values, tol: float = 1e-3,
                    jobs: int = 1, grid_shape=DEFAULT_GRID) -> SweepResult:
    """Dimension along one axis with the same seed at every point.

    Common random numbers suppress Monte Carlo jitter between neighboring
    values; a low-degree polynomial fit residual is reported as the smoothness
    proxy.
    """
    for v in values:
        _spec_for(base, axis, v)  # validate every swept spec up front
    tasks = [(base, axis, float(v), tol, tuple(grid_shape)) for v in values]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            samples = list(ex.map(_sweep_point, tasks))
    else:
        samples = [_sweep_point(t) for t in tasks]
    samples.sort(key=lambda t: (t[0],))
    res = SweepResult(axis=axis, samples=samples)
    vals = np.asarray([s[0] for s in samples])
    ds = np.asarray([s[1] for s in samples])
    errs = np.asarray([s[2] for s in samples])
    deg = min(res.fit_degree, len(vals) - 1)
    if deg >= 1 and len(np.unique(vals)) > deg:
        coeffs = np.polyfit(vals, ds, deg)
        resid = ds - np.polyval(coeffs, vals)
        res.fit_coeffs = [float(c) for c in coeffs]
        res.fit_residual_rms = float(np.sqrt(np.mean(resid ** 2)))
    res.pooled_std_error = float(np.sqrt(np.mean(errs ** 2)))
    return res
