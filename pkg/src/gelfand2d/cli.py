"""Command-line front end.

    gelfand2d <command> --model exp|pow --k K [--p P] [options]

Commands: exponents, singular, trace, classify, stability, intersections,
oracle.  Options may also come from a ``--config`` file of ``key = value``
lines (``#`` starts a comment); flags given on the command line win.

Exit status: 0 on success, 1 on numerical failure (a JSON error record is
written to stderr), 2 on an input guard violation.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field, fields

import numpy as np

from . import bifurcation, intersections, model, stability
from .errors import GuardError, NumericalError
from .integrator import picard_solve

COMMANDS = ("exponents", "singular", "trace", "classify", "stability", "intersections", "oracle")
DEFAULT_FORMAT = {"exponents": "json", "singular": "csv", "trace": "csv", "classify": "json",
                  "stability": "json", "intersections": "json", "oracle": "json"}


@dataclass
class RunSpec:
    subcommand: str
    model: str = "exp"
    k: float = 1.0
    p: float | None = None
    format: str | None = None
    output: str | None = None
    beta: float | None = None
    gamma: float | None = None
    samples: int = 100
    t_min: float | None = None
    t_max: float | None = None
    beta_min: float | None = None
    beta_max: float | None = None
    n_grid: int = 4000
    s_min: float | None = None
    bands: int = 3
    tol: float = 1e-10
    options: dict = field(default_factory=dict)

    @property
    def config(self) -> model.ProblemConfig:
        if self.model == "pow":
            return model.ProblemConfig.power(self.k, self.p)
        return model.ProblemConfig.exponential(self.k)


_NUMERIC = {"k": float, "p": float, "beta": float, "gamma": float, "samples": int, "t_min": float,
            "t_max": float, "beta_min": float, "beta_max": float, "n_grid": int, "s_min": float,
            "bands": int, "tol": float}
_CONFIG_KEYS = set(_NUMERIC) | {"model", "format", "output"}


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gelfand2d", description=__doc__.split("\n")[0])
    ap.add_argument("subcommand", choices=COMMANDS)
    ap.add_argument("--model", choices=("exp", "pow"))
    ap.add_argument("--config", help="key = value file; command-line flags take precedence")
    ap.add_argument("--format", choices=("csv", "json"))
    ap.add_argument("--output", help="write the payload here instead of stdout")
    for name, typ in _NUMERIC.items():
        ap.add_argument("--" + name.replace("_", "-"), dest=name, type=typ)
    return ap


def _read_config(path: str) -> dict:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise GuardError("config", f"line {lineno}: expected 'key = value'")
            key, value = (x.strip() for x in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in _CONFIG_KEYS:
                raise GuardError("config", f"line {lineno}: unknown key {key!r}")
            if key in _NUMERIC:
                try:
                    value = _NUMERIC[key](value)
                except ValueError:
                    raise GuardError("config", f"line {lineno}: {key} = {value!r} is not a number")
            elif key == "model" and value not in ("exp", "pow"):
                raise GuardError("config", f"line {lineno}: model = {value!r} not in {{exp, pow}}")
            elif key == "format" and value not in ("csv", "json"):
                raise GuardError("config", f"line {lineno}: format = {value!r} not in {{csv, json}}")
            out[key] = value
    return out


def parse_run_spec(argv, config_path: str | None = None) -> RunSpec:
    """Build a RunSpec from tokens and an optional config file.

    Raises
    ------
    GuardError
        For unknown config keys, missing/invalid k or p; argparse usage
        errors exit with status 2 directly.
    """
    ns = _parser().parse_args(list(argv))
    merged = {}
    path = ns.config or config_path
    if path:
        merged.update(_read_config(path))
    for key, value in vars(ns).items():
        if key in ("subcommand", "config") or value is None:
            continue
        merged[key] = value
    if "k" not in merged:
        raise GuardError("nonexistence", "k missing", "nonexistence guard: --k is required (k > 0)")
    spec = RunSpec(subcommand=ns.subcommand, **merged)
    if spec.model == "pow" and spec.p is None:
        raise GuardError("exponent", "p missing",
                         "exponent guard violated: --p is required for --model pow (p > p_s = k+1)")
    spec.config  # enforce k > 0 and p > k+1 before any computation
    if spec.format is None:
        spec.format = DEFAULT_FORMAT[spec.subcommand]
    return spec


# -- formatting ------------------------------------------------------------------

def _clean(obj):
    if isinstance(obj, float):
        if math.isnan(obj):
            return "nan"
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    if isinstance(obj, (np.floating,)):
        return _clean(float(obj))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return [_clean(obj.real), _clean(obj.imag)]
    if isinstance(obj, np.ndarray):
        return [_clean(x) for x in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(x) for x in obj]
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def _json(payload) -> str:
    return json.dumps(_clean(payload), indent=2, sort_keys=False) + "\n"


def _cell(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return repr(x)
    return str(x)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for row in rows:
        wr.writerow([_cell(x) for x in row])
    return buf.getvalue()


def _r_or_flag(t):
    if t < -30.0:
        return "≈e"
    if not bool(model.r_representable(t)):
        return "≈0" if t > 0 else "≈e"
    return float(model.r_of_t(t))


# -- commands --------------------------------------------------------------------

def _cmd_exponents(spec):
    cfg = spec.config
    tab = model.exponent_table(cfg)
    payload = {"k": tab.k, "p_s": tab.p_s, "p_jl_minus": tab.p_jl_minus, "p_c": tab.p_c,
               "p_jl_plus": tab.p_jl_plus, "model": spec.model, "p": cfg.p,
               "eig_pair": list(tab.eig_pair), "hardy_coefficient": tab.hardy_coefficient,
               "oscillation": model.oscillation_predicate(cfg)}
    if spec.format == "json":
        return _json(payload)
    rows = [(key, payload[key]) for key in ("k", "p_s", "p_jl_minus", "p_c", "p_jl_plus",
                                            "hardy_coefficient", "oscillation")]
    lp, lm = tab.eig_pair
    rows += [("eig_plus_re", lp.real), ("eig_plus_im", lp.imag),
             ("eig_minus_re", lm.real), ("eig_minus_im", lm.imag)]
    return _csv(("key", "value"), rows)


def _cmd_singular(spec):
    cfg = spec.config
    info = model.singular_solution(cfg)
    t_min = -30.0 if spec.t_min is None else spec.t_min
    t_max = 30.0 if spec.t_max is None else spec.t_max
    t = np.linspace(t_min, t_max, max(2, spec.samples))
    res = np.abs(model.singular_residual_t(cfg, t))
    ustar = info.U_star_of_t(t)
    member, h1 = model.singular_h1_membership(cfg)
    if spec.format == "csv":
        return _csv(("t", "r", "U_star", "residual"),
                    [(ti, _r_or_flag(ti), ui, ri) for ti, ui, ri in zip(t, ustar, res)])
    payload = {"lambda_star": info.lambda_star, "h1_member": member,
               "h1_increment_ratio": h1.increment_ratio, "h1_limit": h1.limit,
               "max_residual": float(np.max(res))}
    if not cfg.is_power:
        payload["flux_defect"] = model.singular_flux_defect(cfg, t[::max(1, t.size // 20)])
    return _json(payload)


def _grid(spec, cfg, traj):
    if spec.beta_min is None and spec.beta_max is None:
        return bifurcation.beta_grid(cfg, traj, n=spec.n_grid)
    full = bifurcation.beta_grid(cfg, traj, n=2)
    lo = full[0] if spec.beta_min is None else spec.beta_min
    hi = full[-1] if spec.beta_max is None else spec.beta_max
    s_top, s_bottom = bifurcation.s_of_beta(cfg, np.array([lo, hi]))
    return bifurcation.beta_grid(cfg, traj, n=spec.n_grid, s_top=float(s_top),
                                 s_bottom=float(s_bottom))


def _curve(spec):
    cfg = spec.config
    traj = bifurcation.canonical_trajectory(cfg, spec.s_min)
    grid = _grid(spec, cfg, traj)
    s_needed = float(np.min(bifurcation.s_of_beta(cfg, grid)))
    if s_needed < traj.s_lo and traj.termination != "minus_one_event":
        traj = bifurcation.canonical_trajectory(cfg, s_needed - 1.0)
    return bifurcation.trace_curve(cfg, grid, traj)


def _curve_report(curve):
    return {"classification": curve.classification, "lambda_star": curve.lambda_star,
            "beta_star": curve.beta_star, "beta_peak": curve.beta_peak,
            "lambda_sup": curve.lambda_sup,
            "turning_points": [{"beta": b, "lambda": lam} for b, lam in curve.turning_points],
            "evidence": curve.evidence}


def _cmd_trace(spec):
    curve = _curve(spec)
    if spec.format == "json":
        return _json(_curve_report(curve))
    return _csv(("beta", "lambda", "alpha", "is_turning"),
                zip(curve.beta, curve.lam, curve.alpha, curve.is_turning))


def _cmd_classify(spec):
    curve = _curve(spec)
    report = _curve_report(curve)
    if spec.format == "json":
        return _json(report)
    rows = [(key, report[key]) for key in ("classification", "lambda_star", "beta_star",
                                           "lambda_sup")]
    rows = [(k, v.value if hasattr(v, "value") else v) for k, v in rows]
    rows += [("turning_points", len(curve.turning_points)),
             ("sign_changes", curve.evidence["sign_changes"])]
    return _csv(("key", "value"), rows)


def _cmd_stability(spec):
    rep = stability.morse_classification(spec.config, n_bands=spec.bands)
    if spec.format == "json":
        return _json(rep.as_dict())
    return _csv(("n", "epsilon", "Q"), rep.band_values)


def _cmd_intersections(spec):
    cfg = spec.config
    beta = 1.0 if spec.beta is None else spec.beta
    gamma = 2.0 if spec.gamma is None else spec.gamma
    lo = intersections.DEFAULT_WINDOW[0] if spec.t_min is None else spec.t_min
    hi = intersections.DEFAULT_WINDOW[1] if spec.t_max is None else spec.t_max
    traj = bifurcation.canonical_trajectory(cfg, spec.s_min)
    if traj.minus_one_event is not None:
        # both members must still be positive: stop just inside the first zero
        lo = max(lo, traj.minus_one_event + max(cfg.shift(beta), cfg.shift(gamma)) + 1e-9)
        if not lo < hi:
            raise GuardError("t-window", f"window lies beyond the zero of v(., {gamma!r})")
    res = intersections.intersection_count(cfg, beta, gamma, (lo, hi))
    sep = intersections.separation_check(cfg, beta, gamma, (lo, hi))
    verdict = "separated" if sep.separated else ("intersecting" if res.count else "unordered")
    if spec.format == "json":
        payload = {"count": res.count, "locations": res.locations_t,
                   "locations_r": [_r_or_flag(t) for t in res.locations_t], "verdict": verdict,
                   "half_period": res.half_period, "period": res.period,
                   "margin_order": sep.margin_order, "margin_singular": sep.margin_singular}
        if cfg.is_power:
            z = intersections.zero_before_e(cfg, beta)
            payload["zero_before_e"] = {"has_zero": z.has_zero, "t": z.t_event, "r": z.r0}
        return _json(payload)
    t = np.linspace(lo, hi, max(2, spec.samples))
    wb, _ = intersections.family_value(cfg, None, beta, t)
    wg, _ = intersections.family_value(cfg, None, gamma, t)
    return _csv(("t", "r_or_flag", "w_beta", "w_gamma", "diff"),
                [(ti, _r_or_flag(ti), b, g, g - b) for ti, b, g in zip(t, wb, wg)])


def _rel(a, b):
    d = abs(a - b)
    return d / abs(b) if b != 0 else (0.0 if d == 0 else math.inf)


def _cmd_oracle(spec):
    cfg = spec.config
    beta = (2.0 if not cfg.is_power else 1.0) if spec.beta is None else spec.beta
    sol = picard_solve(cfg, beta, r_stop=1.0, tol=spec.tol)
    t = sol.t
    s = t - cfg.shift(beta)
    traj = bifurcation.canonical_trajectory(cfg, min(spec.s_min or 0.0, float(np.min(s)) - 1.0))
    u, _ = traj.state(s)
    info = model.singular_solution(cfg)
    W = info.W_of_t(t)
    v_tr = W * u if cfg.is_power else W + u
    diff = float(np.max(np.abs(v_tr - sol.v)) / np.max(np.abs(sol.v)))
    payload = {"beta": beta, "v1_picard": float(sol.v[-1]), "v1_transformed": float(v_tr[-1]),
               "rel_diff_at_r1": _rel(float(v_tr[-1]), float(sol.v[-1])),
               "max_rel_diff": diff, "samples": int(t.size),
               "picard_contraction": sol.tolerances["contraction"]}
    if spec.format == "json":
        return _json(payload)
    return _csv(("key", "value"), payload.items())


_DISPATCH = {"exponents": _cmd_exponents, "singular": _cmd_singular, "trace": _cmd_trace,
             "classify": _cmd_classify, "stability": _cmd_stability,
             "intersections": _cmd_intersections, "oracle": _cmd_oracle}


def _error_record(exc) -> str:
    rec = {"error": type(exc).__name__, "message": str(exc)}
    for attr in ("guard", "inequality", "contraction", "needed_s", "recommended_s_min"):
        if hasattr(exc, attr):
            rec[attr] = getattr(exc, attr)
    return json.dumps(_clean(rec))


def run(spec: RunSpec, stdout=None, stderr=None) -> int:
    """Execute a parsed spec; returns the exit status."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        payload = _DISPATCH[spec.subcommand](spec)
    except GuardError as exc:
        stderr.write(f"gelfand2d: {exc}\n{_error_record(exc)}\n")
        return 2
    except (NumericalError, FloatingPointError, ArithmeticError) as exc:
        stderr.write(_error_record(exc) + "\n")
        return 1
    if spec.output:
        with open(spec.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(payload)
    else:
        stdout.write(payload)
    return 0


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        spec = parse_run_spec(argv)
    except GuardError as exc:
        sys.stderr.write(f"gelfand2d: {exc}\n{_error_record(exc)}\n")
        return 2
    except OSError as exc:
        sys.stderr.write(f"gelfand2d: cannot read config: {exc}\n")
        return 2
    return run(spec)


if __name__ == "__main__":
    sys.exit(main())
