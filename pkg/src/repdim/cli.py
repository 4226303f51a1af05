"""Command-line front end.

Runs are fully determined by an INI-style config file (sections [domain],
[map], [numeric], [ensemble], [sweep], [output]) plus the package version;
unknown sections or keys are hard errors.  Results are written atomically
(temp file + rename) with the resolved config echoed into the payload, and
contain no timestamps, so identical configs produce byte-identical outputs.

Exit codes: 0 success, 2 config error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import configparser
import io
import json
import math
import os
import sys
import tempfile
from fractions import Fraction

import numpy as np

from . import __version__, boxcount, components, ensemble, geometry, maps, solver, transfer
from .errors import ConfigError, RepdimError

SCHEMA_VERSION = 1

_ALLOWED_KEYS = {
    "run": {"subcommand"},
    "domain": {"k", "rho_u", "rho_k"},
    "map": {"family", "n", "c_re", "c_im", "d", "ratios", "offsets", "windows"},
    "numeric": {"grid_radial", "grid_angular", "n", "s", "s_lo", "s_hi", "tol",
                "steps", "depth", "cap", "delta", "radii_top_div", "radii_decades",
                "radii_count", "base_re", "base_im"},
    "ensemble": {"a_re", "a_im", "r", "lambda", "k", "seq_len", "seed", "replicas"},
    "sweep": {"axis", "values"},
    "output": {"path", "format"},
}

_SUBCOMMANDS = ("pressure", "dimension", "random-dim", "sweep", "boxdim",
                "components", "diagnose")


def _number(text: str) -> float:
    text = text.strip()
    if "/" in text:
        return float(Fraction(text))
    return float(text)


class RunConfig:
    """Validated view of one run's configuration."""

    def __init__(self, path: str):
        cp = configparser.ConfigParser(interpolation=None)
        read = cp.read(path)
        if not read:
            raise ConfigError(f"cannot read config file {path!r}")
        self.sections = {}
        for sec in cp.sections():
            key = sec.lower()
            if key not in _ALLOWED_KEYS:
                raise ConfigError(f"unknown config section [{sec}]")
            body = {}
            for k, v in cp.items(sec):
                if k not in _ALLOWED_KEYS[key]:
                    raise ConfigError(f"unknown key {k!r} in section [{sec}]")
                body[k] = v
            self.sections[key] = body

    def get(self, section: str, key: str, default=None, cast=str):
        body = self.sections.get(section, {})
        if key not in body:
            if default is None:
                return None
            return default
        try:
            if cast is bool:
                return body[key].strip().lower() in ("1", "true", "yes")
            if cast is float:
                return _number(body[key])
            return cast(body[key])
        except (ValueError, ZeroDivisionError) as e:
            raise ConfigError(f"bad value for {section}.{key}: {body[key]!r}") from e

    def require(self, section: str, key: str, cast=str):
        val = self.get(section, key, cast=cast)
        if val is None:
            raise ConfigError(f"missing required key {section}.{key}")
        return val

    def echo(self) -> dict:
        return {sec: dict(sorted(body.items())) for sec, body in sorted(self.sections.items())}


def _domains(cfg: RunConfig):
    k = cfg.get("domain", "k", cast=float)
    rho_u = cfg.get("domain", "rho_u", cast=float)
    rho_k = cfg.get("domain", "rho_k", cast=float)
    if k is not None:
        if rho_u is not None or rho_k is not None:
            raise ConfigError("give either k or rho_U/rho_K, not both")
        return geometry.example_domains(k)
    if rho_u is None or rho_k is None:
        raise ConfigError("domain block needs k or both rho_U and rho_K")
    return geometry.HyperbolicAnnulus(rho_u), geometry.HyperbolicAnnulus(rho_k)


def _map_from_config(cfg: RunConfig, U):
    family = cfg.require("map", "family")
    if family == "power_plus_c":
        N = int(cfg.get("map", "n", default=0, cast=float))
        c = complex(cfg.get("map", "c_re", default=0.0, cast=float),
                    cfg.get("map", "c_im", default=0.0, cast=float))
        return maps.power_plus_c(N, c, U)
    if family == "circle_power":
        return maps.circle_power(int(cfg.require("map", "d", cast=float)), U)
    if family == "linear_ifs":
        ratios = [_number(t) for t in cfg.require("map", "ratios").split(",")]
        offsets = [_number(t) for t in cfg.require("map", "offsets").split(",")]
        if len(ratios) != len(offsets):
            raise ConfigError("ratios and offsets must have equal length")
        windows_text = cfg.get("map", "windows")
        if windows_text:
            wins = []
            for part in windows_text.split(";"):
                lo, hi = part.split(":")
                wins.append((_number(lo), _number(hi)))
            if len(wins) != len(ratios):
                raise ConfigError("windows must match the branch count")
        else:
            wins = [(0.0, 1.0)] * len(ratios)
        return maps.linear_ifs([maps.IFSBranch(r, o, tuple(w))
                                for r, o, w in zip(ratios, offsets, wins)])
    raise ConfigError(f"unknown map family {family!r}")


def _grid_for(cfg: RunConfig, m, K):
    n_r = int(cfg.get("numeric", "grid_radial", default=256, cast=float))
    n_t = int(cfg.get("numeric", "grid_angular", default=256, cast=float))
    if m.kind == "linear_ifs":
        return transfer.Grid.interval(n_r if cfg.get("numeric", "grid_radial") else 1)
    return transfer.Grid.from_annulus(K, n_r, n_t)


def _ensemble_spec(cfg: RunConfig, seed_override=None) -> ensemble.EnsembleSpec:
    spec = ensemble.EnsembleSpec(
        a=complex(cfg.get("ensemble", "a_re", default=0.0, cast=float),
                  cfg.get("ensemble", "a_im", default=0.0, cast=float)),
        r=cfg.get("ensemble", "r", default=0.0, cast=float),
        lam=cfg.get("ensemble", "lambda", default=0.0, cast=float),
        k=cfg.get("ensemble", "k", default=0.99, cast=float),
        seq_len=int(cfg.get("ensemble", "seq_len", default=160, cast=float)),
        seed=int(cfg.get("ensemble", "seed", default=0, cast=float)),
        replicas=int(cfg.get("ensemble", "replicas", default=4, cast=float)),
    )
    if seed_override is not None:
        spec = spec.with_(seed=int(seed_override))
    return spec


def _atomic_write(path: str, data: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".repdim-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(payload: dict, cfg: RunConfig, out_path, fmt: str, csv_rows=None, csv_header=None):
    body = {"schema_version": SCHEMA_VERSION, "package_version": __version__,
            "config": cfg.echo(), "result": payload}
    if fmt == "json":
        text = json.dumps(body, sort_keys=True, indent=2, default=_jsonable) + "\n"
    elif fmt == "csv":
        buf = io.StringIO()
        buf.write(f"# schema_version={SCHEMA_VERSION} package_version={__version__}\n")
        for sec, kv in body["config"].items():
            for k, v in kv.items():
                buf.write(f"# {sec}.{k}={v}\n")
        buf.write(",".join(csv_header) + "\n")
        for row in csv_rows:
            buf.write(",".join(_csv_cell(x) for x in row) + "\n")
        text = buf.getvalue()
    else:
        raise ConfigError(f"unknown output format {fmt!r}")
    if out_path:
        _atomic_write(out_path, text)
    else:
        sys.stdout.write(text)


def _csv_cell(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, complex):
        return {"re": x.real, "im": x.imag}
    raise TypeError(f"not JSON serializable: {type(x)}")


def _cmd_pressure(cfg: RunConfig, args):
    U, K = _domains(cfg)
    m = _map_from_config(cfg, U)
    grid = _grid_for(cfg, m, K)
    s = cfg.require("numeric", "s", cast=float)
    n = int(cfg.get("numeric", "n", default=8, cast=float))
    steps = int(cfg.get("numeric", "steps", default=max(48, 2 * n), cast=float))
    est = transfer.pressure_bracket(s, [m], n, grid, include_cocycle=True,
                                    cocycle_steps=steps)
    if args.format == "csv":
        _, trace = transfer.iterate_sequence(s, transfer.materialize([m], n), grid=grid)
        rows = [(k + 1, trace.log_m[k], trace.log_M[k], trace.log_p[k], trace.clamped_points)
                for k in range(n)]
        _emit({}, cfg, args.out, "csv", rows,
              ["step", "m_k_log", "M_k_log", "log_p_k", "clamped_points"])
    else:
        _emit({"s": est.s, "n": est.n, "lower": est.lower, "upper": est.upper,
               "cocycle": est.cocycle, "width": est.width,
               "clamped_points": est.clamped_points}, cfg, args.out, "json")
    return 0


def _cmd_dimension(cfg: RunConfig, args):
    U, K = _domains(cfg)
    m = _map_from_config(cfg, U)
    grid = _grid_for(cfg, m, K)
    n = int(cfg.get("numeric", "n", default=8, cast=float))
    s_range = (cfg.get("numeric", "s_lo", default=0.0, cast=float),
               cfg.get("numeric", "s_hi", default=2.2, cast=float))
    tol = cfg.get("numeric", "tol", default=1e-6, cast=float)
    res = solver.solve_dimension([m], n, s_range, tol, grid)
    _emit({"s_crit": res.s_crit, "s_lower": res.s_lower, "s_upper": res.s_upper,
           "n": res.n_used, "grid": list(res.grid_shape),
           "diagnostics": res.diagnostics}, cfg, args.out, args.format)
    return 0


def _cmd_random_dim(cfg: RunConfig, args):
    spec = _ensemble_spec(cfg, args.seed)
    tol = cfg.get("numeric", "tol", default=1e-3, cast=float)
    res = ensemble.random_dimension(spec, tol)
    roots = [r for r in res.diagnostics["replica_roots"] if not math.isnan(r)]
    std_err = (float(np.std(roots, ddof=1) / math.sqrt(len(roots)))
               if len(roots) > 1 else 0.0)
    payload = {"d": res.s_crit, "std_err": std_err, "s_lower": res.s_lower,
               "s_upper": res.s_upper, "dispersion": res.diagnostics["dispersion"],
               "replicas": spec.replicas, "seq_len": spec.seq_len, "seed": spec.seed}
    if args.format == "csv":
        _emit({}, cfg, args.out, "csv",
              [(spec.lam, res.s_crit, std_err, res.s_lower, res.s_upper)],
              ["axis_value", "d", "std_err", "s_lower", "s_upper"])
    else:
        _emit(payload, cfg, args.out, "json")
    return 0


def _cmd_sweep(cfg: RunConfig, args):
    spec = _ensemble_spec(cfg, args.seed)
    axis = cfg.require("sweep", "axis")
    values = [_number(t) for t in cfg.require("sweep", "values").split(",")]
    tol = cfg.get("numeric", "tol", default=1e-3, cast=float)
    res = ensemble.parameter_sweep(spec, axis, values, tol, jobs=args.jobs)
    rows = [(v, d, e, d - w / 2.0, d + w / 2.0) for v, d, e, w in res.samples]
    if args.format == "json":
        _emit({"axis": res.axis, "samples": res.samples,
               "fit_coeffs": res.fit_coeffs, "fit_residual_rms": res.fit_residual_rms,
               "pooled_std_error": res.pooled_std_error}, cfg, args.out, "json")
    else:
        _emit({}, cfg, args.out, "csv", rows,
              ["axis_value", "d", "std_err", "s_lower", "s_upper"])
    return 0


def _cmd_boxdim(cfg: RunConfig, args):
    U, K = _domains(cfg)
    m = _map_from_config(cfg, U)
    base = complex(cfg.get("numeric", "base_re", default=1.0, cast=float),
                   cfg.get("numeric", "base_im", default=0.0, cast=float))
    depth = int(cfg.get("numeric", "depth", default=18, cast=float))
    cap = int(cfg.get("numeric", "cap", default=boxcount.DEFAULT_CAP, cast=float))
    cloud = boxcount.backward_orbit([m], base, depth, cap, K)
    radii = boxcount.default_radii(
        cloud,
        top_divisor=cfg.get("numeric", "radii_top_div", default=8.0, cast=float),
        decades=cfg.get("numeric", "radii_decades", default=2.0, cast=float),
        count=int(cfg.get("numeric", "radii_count", default=12, cast=float)))
    bd = boxcount.box_dimension(cloud, radii)
    if args.format == "csv":
        rows = []
        x = np.log(1.0 / bd.radii)
        y = np.log(bd.counts)
        for i, (r, N) in enumerate(zip(bd.radii, bd.counts)):
            running = float(np.polyfit(x[: i + 1], y[: i + 1], 1)[0]) if i >= 1 else None
            rows.append((r, N, running))
        _emit({}, cfg, args.out, "csv", rows, ["r", "N_r", "running_slope"])
    else:
        _emit({"slope": bd.slope, "lower_surrogate": bd.lower_surrogate,
               "upper_surrogate": bd.upper_surrogate,
               "radii": list(bd.radii), "counts": list(bd.counts),
               "cloud_size": len(cloud), "depth": depth}, cfg, args.out, "json")
    return 0


def _cmd_components(cfg: RunConfig, args):
    U, K = _domains(cfg)
    m = _map_from_config(cfg, U)
    base = complex(cfg.get("numeric", "base_re", default=1.0, cast=float),
                   cfg.get("numeric", "base_im", default=0.0, cast=float))
    depth = int(cfg.get("numeric", "depth", default=12, cast=float))
    cloud = boxcount.backward_orbit([m], base, depth,
                                    int(cfg.get("numeric", "cap",
                                                default=boxcount.DEFAULT_CAP, cast=float)), K)
    delta = cfg.get("numeric", "delta", cast=float)
    if delta is None:
        delta = components.default_delta(cloud)
    decomp = components.decompose(cloud, m, delta, K)
    tol = cfg.get("numeric", "tol", default=1e-6, cast=float)
    n = int(cfg.get("numeric", "n", default=10, cast=float))
    selected, s_crit, roots, sub = components.critical_class(decomp, tol, n)
    edges = [[a, b] for a in range(len(decomp.classes))
             for b in range(len(decomp.classes)) if a != b and decomp.order[a, b]]
    _emit({"delta": delta,
           "components": int(decomp.n_components),
           "component_sizes": np.bincount(decomp.labels).tolist(),
           "class_membership": [list(c) for c in decomp.classes],
           "condensation_edges": edges,
           "class_s_crit": roots,
           "selected_class": int(selected),
           "s_crit": s_crit,
           "invariant_subcloud_size": int(len(sub))}, cfg, args.out, args.format)
    return 0


def _cmd_diagnose(cfg: RunConfig, args):
    U, K = _domains(cfg)
    consts = geometry.domain_constants(U, K)
    eps_delta = geometry.epsilon_ell(consts, consts.delta_big)
    c_seq = geometry.distortion_sequence(consts, 200, consts.beta)
    payload = {
        "rho": U.rho_inner,
        "rho_K": K.rho_inner,
        **consts.as_dict(),
        "checks": {
            "tanh_delta_big_vs_alpha_over_7": math.tanh(consts.delta_big / 2.0) - consts.alpha / 7.0,
            "tanh_delta_prime_vs_alpha_over_2": math.tanh(consts.delta_prime / 2.0) - consts.alpha / 2.0,
            "epsilon_at_delta_big": eps_delta,
            "epsilon_at_delta_big_expected": 6.0 * math.log(7.0 / 6.0),
            "epsilon_below_one": bool(eps_delta < 1.0),
            "mixing_steps_n0": geometry.mixing_time(consts),
            "distortion_log_c_limit": float(np.log(c_seq[-1])),
            "finite_measure_hint": bool(np.log(c_seq[-1]) - np.log(c_seq[-2]) < 1e-9),
        },
    }
    _emit(payload, cfg, args.out, args.format)
    return 0


_DISPATCH = {
    "pressure": _cmd_pressure,
    "dimension": _cmd_dimension,
    "random-dim": _cmd_random_dim,
    "sweep": _cmd_sweep,
    "boxdim": _cmd_boxdim,
    "components": _cmd_components,
    "diagnose": _cmd_diagnose,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="repdim",
                                description="Pressure-zero dimension of conformal repellers")
    p.add_argument("subcommand", choices=_SUBCOMMANDS)
    p.add_argument("--config", required=True, help="path to the INI run config")
    p.add_argument("--out", default=None, help="output path (default: stdout)")
    p.add_argument("--format", default=None, choices=("csv", "json"))
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig(args.config)
        declared = cfg.get("run", "subcommand")
        if declared is not None and declared != args.subcommand:
            raise ConfigError(
                f"config declares subcommand {declared!r} but {args.subcommand!r} was requested")
        if args.format is None:
            args.format = cfg.get("output", "format", default="json")
        if args.out is None:
            args.out = cfg.get("output", "path")
        return _DISPATCH[args.subcommand](cfg, args)
    except ConfigError as e:
        print(f"ConfigError: {e}", file=sys.stderr)
        return 2
    except RepdimError as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
