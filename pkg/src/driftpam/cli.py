"""Command-line interface.

Subcommands: quenched, annealed, simulate, sweep, report.  All take a
JSON config (--config) describing the model and write deterministic
JSON/CSV artifacts (and SVG plots via `report`) into --out.

Exit codes: 0 success, 1 config error, 2 numerical failure, 3 I/O error.
"""

import argparse
import csv
import hashlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import annealed as ann
from . import quenched as qn
from . import simulate as sim
from .errors import BeyondCritical, ConfigError, DivergentFunctional, \
    NumericalFailure
from .model import ModelParams, PotentialModel, beta_cr, normalize, \
    sample_environment
from .report import svg_plot

SCHEMA_VERSION = 1

_TOP_KEYS = {"kappa", "h", "seed", "potential", "quenched", "annealed",
             "simulate", "sweep"}
_POT_KEYS = {"variant", "a", "q", "atoms", "weights", "b", "c", "states",
             "transition"}
_QUENCHED_KEYS = {"n_sites", "tol", "gap_tol", "n_beta", "alphas",
                  "variational"}
_ANNEALED_KEYS = {"p_grid", "method", "depth", "tol", "continuity"}
_SIMULATE_KEYS = {"t", "n_paths", "n_env", "p", "dt", "checks"}
_SWEEP_KEYS = {"parameter", "values", "p"}


def _check_keys(mapping, allowed, where, problems):
    for k in mapping:
        if k not in allowed:
            problems.append("unknown key %r in %s (allowed: %s)"
                            % (k, where, ", ".join(sorted(allowed))))


@dataclass(frozen=True)
class RunConfig:
    params: ModelParams
    model: PotentialModel
    seed: int
    raw: dict


def load_config(path):
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError("config file not found: %s" % path)
    except json.JSONDecodeError as e:
        raise ConfigError("config is not valid JSON: %s" % e)
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    problems = []
    _check_keys(raw, _TOP_KEYS, "top level", problems)
    pot = raw.get("potential")
    if not isinstance(pot, dict):
        problems.append("missing or non-object 'potential' section")
        pot = {}
    _check_keys(pot, _POT_KEYS, "potential", problems)
    for sec, allowed in (("quenched", _QUENCHED_KEYS),
                         ("annealed", _ANNEALED_KEYS),
                         ("simulate", _SIMULATE_KEYS),
                         ("sweep", _SWEEP_KEYS)):
        if sec in raw:
            if not isinstance(raw[sec], dict):
                problems.append("section %r must be an object" % sec)
            else:
                _check_keys(raw[sec], allowed, sec, problems)
    if "kappa" not in raw or "h" not in raw:
        problems.append("config requires 'kappa' and 'h'")
    if problems:
        raise ConfigError("; ".join(problems))
    params = ModelParams(float(raw["kappa"]), float(raw["h"]))
    kw = {}
    for key in ("a", "q", "b", "c"):
        if key in pot:
            kw[key] = float(pot[key])
    if "atoms" in pot:
        kw["atoms"] = tuple(float(x) for x in pot["atoms"])
    if "weights" in pot:
        kw["weights"] = tuple(float(x) for x in pot["weights"])
    if "states" in pot:
        kw["states"] = tuple(float(x) for x in pot["states"])
    if "transition" in pot:
        kw["transition"] = tuple(tuple(float(x) for x in row)
                                 for row in pot["transition"])
    model = normalize(PotentialModel(pot.get("variant", "two_point"), **kw))
    return RunConfig(params, model, int(raw.get("seed", 0)), raw)


def _config_digest(raw):
    return hashlib.sha256(
        json.dumps(raw, sort_keys=True).encode()).hexdigest()[:16]


def _header(cfg):
    return {
        "schema_version": SCHEMA_VERSION,
        "kappa": cfg.params.kappa,
        "h": cfg.params.h,
        "potential": {k: v for k, v in cfg.raw["potential"].items()},
        "seed": cfg.seed,
        "shift": cfg.model.shift,
        "config_sha256": _config_digest(cfg.raw),
    }


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2, default=_jsonable)
        fh.write("\n")


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, tuple):
        return list(x)
    raise TypeError(type(x))


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow(["%.12g" % v if isinstance(v, float) else v
                        for v in row])


def _write_result(outdir, name, obj, fmt):
    if fmt == "csv":
        rows = []

        def flat(prefix, v):
            if isinstance(v, dict):
                for k2, v2 in sorted(v.items()):
                    flat(prefix + "." + k2 if prefix else k2, v2)
            elif isinstance(v, (list, tuple)):
                rows.append((prefix, json.dumps(list(v))))
            else:
                rows.append((prefix, v))

        flat("", obj)
        _write_csv(os.path.join(outdir, name + ".csv"), ["key", "value"],
                   rows)
    else:
        _write_json(os.path.join(outdir, name + ".json"), obj)


def _lyap_dict(r):
    return {"value": r.value, "bracket": list(r.bracket),
            "residual": r.residual, "at_boundary": r.at_boundary,
            "shift": r.shift_applied, "method": r.method, "kind": r.kind}


# ---- subcommands -------------------------------------------------------

def cmd_quenched(cfg, outdir, fmt, threads):
    opts = cfg.raw.get("quenched", {})
    n_sites = int(opts.get("n_sites", 100_000))
    tol = float(opts.get("tol", 1e-10))
    gap_tol = float(opts.get("gap_tol", 1e-9))
    n_beta = int(opts.get("n_beta", 41))
    res = qn.lambda_quenched(cfg.model, cfg.params, seed=cfg.seed,
                             n_sites=n_sites, tol=tol, gap_tol=gap_tol)
    phase = qn.optimal_speed(cfg.model, cfg.params, result=res,
                             seed=cfg.seed, n_sites=n_sites, gap_tol=gap_tol)
    out = _header(cfg)
    out["lambda0"] = _lyap_dict(res)
    out["phase"] = {"case": phase.case, "speed": phase.speed,
                    "speed_interval": list(phase.speed_interval),
                    "limit_at_beta_cr": phase.limit_at_bcr,
                    "uncertainty": phase.uncertainty,
                    "widened": phase.widened}
    if opts.get("variational", False):
        out["lambda0_variational"] = qn.lambda_quenched_variational(
            cfg.model, cfg.params, seed=cfg.seed, n_sites=n_sites)
    # L curve
    bc = beta_cr(cfg.params, cfg.model)
    cap = bc.value if bc.exact else bc.upper
    grid = np.linspace(-cfg.params.kappa, 0.95 * cap, n_beta)
    rows = []
    for b in grid:
        try:
            est = qn.estimate_L(cfg.model, cfg.params, float(b),
                                n_sites=n_sites, seed=cfg.seed,
                                gap_tol=gap_tol)
            rows.append((float(b), est.mean_lower, est.mean_upper, est.mean,
                         est.stderr))
        except (DivergentFunctional, BeyondCritical):
            continue
    _write_csv(os.path.join(outdir, "L_curve.csv"),
               ["beta", "L_lower", "L_upper", "L_mid", "stderr"], rows)
    if "alphas" in opts:
        alphas = np.asarray(opts["alphas"], float)
        vals, edge = qn.legendre_lambda_star(cfg.model, cfg.params, alphas,
                                             seed=cfg.seed, n_sites=n_sites)
        _write_csv(os.path.join(outdir, "legendre.csv"),
                   ["alpha", "lambda_star", "at_grid_edge"],
                   [(float(a), float(v), int(e))
                    for a, v, e in zip(alphas, vals, edge)])
    _write_result(outdir, "quenched_result", out, fmt)
    return 0


def cmd_annealed(cfg, outdir, fmt, threads):
    opts = cfg.raw.get("annealed", {})
    p_grid = [float(p) for p in opts.get("p_grid", [0.5, 1.0, 2.0])]
    method = opts.get("method", "auto")
    depth = int(opts.get("depth", 4))
    tol = float(opts.get("tol", 1e-10))
    curve = ann.intermittency_scan(cfg.model, cfg.params, p_grid,
                                   method=method, depth=depth, seed=cfg.seed,
                                   tol=tol)
    out = _header(cfg)
    out["lambda0"] = curve.lambda0
    out["lambda_p"] = {("%g" % p): v
                       for p, v in zip(curve.ps, curve.lambdas)}
    out["monotone_in_p"] = curve.monotone
    out["p_lambda_p_convex"] = curve.p_lambda_p_convex
    out["first_intermittent_p"] = curve.first_intermittent_p
    if cfg.params.h == 1.0:
        md = {}
        for p in p_grid:
            if p == int(p) and p >= 1:
                md["%g" % p] = ann.lambda_annealed_maxdrift(
                    cfg.model, cfg.params, int(p), tol=tol).value
        out["maxdrift"] = md
    if opts.get("continuity", False):
        ps, gaps, lam0, shrink = ann.continuity_at_zero(
            cfg.model, cfg.params, method=method, depth=depth, seed=cfg.seed)
        out["continuity_at_zero"] = {"p": list(ps), "gap": list(gaps),
                                     "shrinking": shrink}
    rows = [(float(p), float(v), r.method, int(r.at_boundary))
            for p, v, r in zip(curve.ps, curve.lambdas, curve.results)]
    _write_csv(os.path.join(outdir, "lambda_p.csv"),
               ["p", "lambda_p", "method", "at_boundary"], rows)
    _write_result(outdir, "annealed_result", out, fmt)
    return 0


def cmd_simulate(cfg, outdir, fmt, threads):
    opts = cfg.raw.get("simulate", {})
    t = float(opts.get("t", 50.0))
    n_paths = int(opts.get("n_paths", 10_000))
    dt = opts.get("dt")
    dt = float(dt) if dt is not None else None
    m = sim.default_window(cfg.params, t) + 80
    env = sample_environment(cfg.model, cfg.seed, -m, m)
    out = _header(cfg)
    slope = sim.quenched_slope(env, cfg.params, t, dt=dt)
    out["quenched_slope"] = {"slope": slope.slope, "ci": slope.ci,
                             "drift": slope.drift,
                             "stationary": slope.stationary,
                             "advice": slope.advice}
    t_mc = min(t, 30.0)
    fk = sim.feynman_kac_mc(env, cfg.params, t_mc, n_paths=n_paths,
                            seed=cfg.seed)
    sol = sim.solve_pde(env, cfg.params, t_mc, dt=dt)
    out["feynman_kac"] = {"t": t_mc, "mc_mean": fk.mean,
                          "mc_stderr": fk.stderr, "pde_u0": sol.at(t_mc, 0)}
    v = sim.endpoint_field(env, cfg.params, t_mc, dt=dt)
    out["mass_identity"] = {"total_mass": v.mass(),
                            "pde_u0": sol.at(t_mc, 0),
                            "abs_diff": abs(v.mass() - sol.at(t_mc, 0))}
    if cfg.params.h < 1.0:
        lhs, rhs, diff = sim.time_reversal_check(env, cfg.params, 2,
                                                 min(t_mc, 10.0), dt=dt)
        out["time_reversal"] = {"lhs": lhs, "rhs": rhs, "abs_diff": diff}
    gs = sim.gibbs_speed(env, cfg.params, t, dt=dt)
    out["gibbs_speed"] = gs.mean_speed
    _write_csv(os.path.join(outdir, "gibbs_hist.csv"),
               ["speed_bin_left", "speed_bin_right", "mass"],
               [(float(a), float(b), float(mss)) for a, b, mss in
                zip(gs.bin_edges[:-1], gs.bin_edges[1:], gs.masses)])
    if "n_env" in opts:
        p = float(opts.get("p", 1.0))
        est = sim.annealed_moment(cfg.model, cfg.params, p, t_mc,
                                  n_env=int(opts["n_env"]), seed=cfg.seed)
        out["annealed_moment"] = {"p": p, "slope": est.mean,
                                  "stderr": est.stderr,
                                  "heavy_tail": est.heavy_tail}
    _write_result(outdir, "simulate_result", out, fmt)
    return 0


def cmd_sweep(cfg, outdir, fmt, threads):
    opts = cfg.raw.get("sweep", {})
    par = opts.get("parameter", "h")
    if par not in ("h", "kappa", "p"):
        raise ConfigError("sweep parameter must be 'h', 'kappa' or 'p'")
    values = [float(v) for v in opts.get("values", [])]
    if not values:
        raise ConfigError("sweep requires a nonempty 'values' list")
    p_mom = float(opts.get("p", 1.0))

    def point(v):
        params = cfg.params
        if par == "h":
            params = ModelParams(params.kappa, v)
        elif par == "kappa":
            params = ModelParams(v, params.h)
        p_eff = v if par == "p" else p_mom
        lam0 = qn.lambda_quenched(cfg.model, params, seed=cfg.seed).value
        try:
            lamp = ann.lambda_annealed(cfg.model, params, p_eff,
                                       seed=cfg.seed).value
        except ConfigError:
            lamp = float("nan")
        bc = beta_cr(params, cfg.model)
        return (v, lam0, lamp, bc.value if bc.exact else float("nan"))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            rows = list(ex.map(point, values))
    else:
        rows = [point(v) for v in values]
    _write_csv(os.path.join(outdir, "sweep.csv"),
               [par, "lambda0", "lambda_p(p=%g)" % p_mom
                if par != "p" else "lambda_p", "beta_cr"], rows)
    out = _header(cfg)
    out["sweep"] = {"parameter": par, "values": values,
                    "rows": [list(r) for r in rows]}
    _write_result(outdir, "sweep_result", out, fmt)
    return 0


def cmd_report(cfg, outdir, fmt, threads):
    made = []
    lpath = os.path.join(outdir, "L_curve.csv")
    if os.path.exists(lpath):
        rows = _read_csv(lpath)
        beta = [r["beta"] for r in rows]
        made.append(("L_curve.svg", svg_plot(
            [(beta, [r["L_lower"] for r in rows], "L lower"),
             (beta, [r["L_upper"] for r in rows], "L upper")],
            title="Crossing functional L(beta)", xlabel="beta",
            ylabel="L")))
    ppath = os.path.join(outdir, "lambda_p.csv")
    if os.path.exists(ppath):
        rows = _read_csv(ppath)
        made.append(("lambda_p.svg", svg_plot(
            [([r["p"] for r in rows], [r["lambda_p"] for r in rows],
              "lambda_p")],
            title="Annealed exponents", xlabel="p", ylabel="lambda_p")))
    gpath = os.path.join(outdir, "gibbs_hist.csv")
    if os.path.exists(gpath):
        rows = _read_csv(gpath)
        edges = [r["speed_bin_left"] for r in rows] + \
            [rows[-1]["speed_bin_right"]]
        made.append(("gibbs_hist.svg", svg_plot(
            [(edges, [r["mass"] for r in rows] + [rows[-1]["mass"]], "mass")],
            title="Gibbs speed histogram", xlabel="n/t", ylabel="mass",
            histogram=True)))
    spath = os.path.join(outdir, "sweep.csv")
    if os.path.exists(spath):
        rows = _read_csv(spath)
        keys = list(rows[0].keys())
        x = [r[keys[0]] for r in rows]
        made.append(("sweep.svg", svg_plot(
            [(x, [r[keys[1]] for r in rows], keys[1]),
             (x, [r[keys[2]] for r in rows], keys[2])],
            title="Parameter sweep", xlabel=keys[0], ylabel="exponent")))
    if not made:
        raise ConfigError("no CSV artifacts found in %s to plot" % outdir)
    for name, svg in made:
        with open(os.path.join(outdir, name), "w") as fh:
            fh.write(svg)
    return 0


def _read_csv(path):
    with open(path) as fh:
        rd = csv.DictReader(fh)
        rows = []
        for raw in rd:
            row = {}
            for k, v in raw.items():
                try:
                    row[k] = float(v)
                except (TypeError, ValueError):
                    row[k] = v
            rows.append(row)
    return rows


_COMMANDS = {"quenched": cmd_quenched, "annealed": cmd_annealed,
             "simulate": cmd_simulate, "sweep": cmd_sweep,
             "report": cmd_report}


def main(argv=None):
    ap = argparse.ArgumentParser(prog="driftpam",
                                 description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(_COMMANDS))
    ap.add_argument("--config", required=True)
    ap.add_argument("--out", required=True)
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--format", choices=("json", "csv"), default="json")
    args = ap.parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        os.makedirs(args.out, exist_ok=True)
        return _COMMANDS[args.command](cfg, args.out, args.format,
                                       max(args.threads, 1))
    except ConfigError as e:
        print("config error: %s" % e, file=sys.stderr)
        return 1
    except (NumericalFailure, DivergentFunctional, BeyondCritical) as e:
        print("numerical failure: %s" % e, file=sys.stderr)
        return 2
    except OSError as e:
        print("i/o error: %s" % e, file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
