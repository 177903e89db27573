"""Command-line front end: flat key=value configs, JSON/CSV artifacts.

Every subcommand reads an optional config file of `key = value` lines,
applies --seed/--out/--threads overrides, validates physical
preconditions before computing, and writes one JSON object (embedding
the fully resolved config, so each artifact is reproducible on its own)
plus a CSV for series-valued results.  Identical config and seed give
bitwise-identical outputs apart from the timestamp field.

Exit codes: 0 success, 2 validation/config error, 3 numerical failure,
4 budget exceeded.
"""

from __future__ import annotations

import argparse
import ast
import csv
import datetime
import json
import math
import os
import sys

import numpy as np

from .bumps import BoundaryTestFunction
from .errors import BudgetError, NumericalError, ValidationError
from .functionals import (finite_dim_conditioning_check,
                          free_prefactor_limit_gap, generating_C,
                          generating_tildeC, renorm_convergence_gap,
                          witten_4pt)
from .geometry import BulkPoint
from .interaction import (deviation_bound, expected_energy, fit_exponent,
                          sigma, source_at_sites, triviality_run)
from .kernels import (boundary_form, bulk_propagator, bulk_to_boundary,
                      corr_coefficients, spectral_params, splitting_residual)
from .lattice import LatticeSpec, build_model
from .positivity import (gaussian_functional, gram_reflection,
                         gram_stochastic, perturbed_rp_gram, reflection_scan,
                         renorm_negative_witness, unitarity_witness)

__all__ = ["main", "parse_config", "fit_exponent"]

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_BUDGET = 4


def parse_config(path: str | None) -> dict:
    """Flat `key = value` file; values through literal_eval, else strings."""
    cfg: dict = {}
    if path is None:
        return cfg
    if not os.path.exists(path):
        raise ValidationError(f"config file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValidationError(
                    f"{path}:{lineno}: expected key = value"
                )
            key, _, val = line.partition("=")
            key, val = key.strip(), val.strip()
            try:
                cfg[key] = ast.literal_eval(val)
            except (ValueError, SyntaxError):
                cfg[key] = val
    return cfg


def _source_from_config(cfg: dict, d: int) -> BoundaryTestFunction:
    """Bump sum from src_centers/src_widths/src_amps (semicolon lists)."""

    def listify(key, default):
        v = cfg.get(key, default)
        if isinstance(v, str):
            return [ast.literal_eval(tok) for tok in v.split(";") if tok.strip()]
        if isinstance(v, (int, float, tuple)):
            return [v]
        return list(v)

    centers = listify("src_centers", 0.0 if d == 1 else (0.0,) * d)
    widths = listify("src_widths", 0.4)
    amps = listify("src_amps", 1.0)
    n = max(len(centers), len(widths), len(amps))

    def pick(lst, i):
        return lst[i] if len(lst) > 1 else lst[0]

    f = None
    for i in range(n):
        c = pick(centers, i)
        c = (float(c),) if np.isscalar(c) else tuple(float(t) for t in c)
        if len(c) != d:
            raise ValidationError("source center has wrong dimension")
        b = BoundaryTestFunction.single(c, float(pick(widths, i)),
                                        float(pick(amps, i)))
        f = b if f is None else f + b
    return f


def _write_json(out_dir: str, command: str, config: dict, results: dict) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"{command}.json")
    payload = {
        "command": command,
        "config": {k: config[k] for k in sorted(config)},
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "results": results,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _write_csv(out_dir: str, command: str, header, rows) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"{command}.csv")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return path


def _limit_threads(n: int) -> None:
    try:
        from threadpoolctl import threadpool_limits
        threadpool_limits(limits=n)
    except ImportError:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS"):
            os.environ[var] = str(n)


# --- subcommand bodies -----------------------------------------------------

def _cmd_params(cfg):
    p = spectral_params(int(cfg.get("d", 1)), float(cfg.get("m2", 6.25)))
    return {
        "d": p.d, "m2": p.m2, "nu": p.nu,
        "delta_plus": p.delta_plus, "delta_minus": p.delta_minus,
        "gamma_plus": p.gamma_plus, "gamma_minus": p.gamma_minus, "c": p.c,
    }, None


def _cmd_kernel_eval(cfg):
    d, m2 = int(cfg.get("d", 1)), float(cfg.get("m2", 6.25))
    p = spectral_params(d, m2)
    u = np.geomspace(float(cfg.get("u_min", 1e-2)),
                     float(cfg.get("u_max", 1e2)),
                     int(cfg.get("n_u", 13)))
    gp = bulk_propagator(u, p, "+")
    gm = bulk_propagator(u, p, "-")
    z = float(cfg.get("z", 0.5))
    xs = np.linspace(-2.0, 2.0, int(cfg.get("n_x", 9)))
    hp = [float(bulk_to_boundary(z, (x,) + (0.0,) * (d - 1),
                                 (0.0,) * d, p, "+")) for x in xs]
    f = _source_from_config(cfg, d)
    res = {
        "params": _cmd_params(cfg)[0],
        "u": u.tolist(),
        "G_plus": np.asarray(gp).tolist(),
        "G_minus": np.asarray(gm).tolist(),
        "H_plus_height": z,
        "H_plus_x": xs.tolist(),
        "H_plus": hp,
        "alpha_plus_ff": boundary_form(f, f, p, "+"),
    }
    rows = list(zip(u.tolist(), np.asarray(gp).tolist(),
                    np.asarray(gm).tolist()))
    return res, (["u", "G_plus", "G_minus"], rows)


def _cmd_splitting_check(cfg):
    d, m2 = int(cfg.get("d", 2)), float(cfg.get("m2", -0.75))
    p = spectral_params(d, m2)
    pt = BulkPoint(float(cfg.get("z1", 0.7)),
                   (float(cfg.get("x1", -0.3)),) + (0.0,) * (d - 1))
    qt = BulkPoint(float(cfg.get("z2", 1.4)),
                   (float(cfg.get("x2", 0.8)),) + (0.0,) * (d - 1))
    resid = abs(splitting_residual(pt, qt, p))
    tol = float(cfg.get("tol", 1e-4))
    if not resid < tol:
        raise NumericalError(f"splitting residual {resid:.3e} above {tol:g}")
    return {"residual": resid, "tol": tol, "passed": True}, None


def _cmd_corr_check(cfg):
    d, m2 = int(cfg.get("d", 1)), float(cfg.get("m2", 0.0))
    p = spectral_params(d, m2)
    f = _source_from_config(cfg, d)
    zs = [float(z) for z in np.geomspace(float(cfg.get("z_max", 0.1)),
                                         float(cfg.get("z_min", 1e-3)),
                                         int(cfg.get("n_points", 5)))]
    gaps = [free_prefactor_limit_gap(f, p, z) for z in zs]
    coeffs = corr_coefficients(p)
    res = {
        "a_coefficients": list(coeffs.a),
        "overall_prefactor": coeffs.overall_prefactor,
        "z": zs,
        "relative_gap": gaps,
    }
    return res, (["z", "relative_gap"], list(zip(zs, gaps)))


def _build_lattice(cfg, z0=None):
    spec = LatticeSpec(
        z0=float(cfg.get("z0", 0.2) if z0 is None else z0),
        A=float(cfg.get("A", 5.0)),
        l=float(cfg.get("l", 4.0)),
        d=int(cfg.get("d", 1)),
        n_z=int(cfg.get("n_z", 32)),
        n_x=int(cfg.get("n_x", 32)),
        m2=float(cfg.get("m2", 6.25)),
        site_budget=int(cfg.get("site_budget", 4096)),
    )
    return build_model(spec)


def _cmd_scaling_fit(cfg):
    d, m2 = int(cfg.get("d", 1)), float(cfg.get("m2", 6.25))
    lam = float(cfg.get("lam", 0.1))
    p = spectral_params(d, m2)
    f = _source_from_config(cfg, d)
    A, l = float(cfg.get("A", 5.0)), float(cfg.get("l", 4.0))
    z0s = cfg.get("z0_list", [0.4, 0.2, 0.1, 0.05])
    if isinstance(z0s, str):
        z0s = [float(t) for t in z0s.split(";")]
    z0s = [float(z) for z in z0s]
    Es, sigs, gammas = [], [], []
    for z0 in z0s:
        model = _build_lattice(cfg, z0=z0)
        E = expected_energy(z0, f, p, lam, (A, l))
        s = sigma(z0, f, model, lam)
        b = deviation_bound(z0, f, p, lam, (A, l), model.c_kappa)
        Es.append(E)
        sigs.append(s)
        gammas.append(2.0 * b / E)
    span = 0.9 * abs(math.log10(max(z0s)) - math.log10(min(z0s)))
    fits = {}
    for name, vals in (("E", Es), ("sigma", sigs), ("gamma", gammas)):
        sl, se = fit_exponent(list(zip(z0s, vals)), min_decades=span)
        fits[name + "_slope"] = sl
        fits[name + "_slope_stderr"] = se
    res = {"z0": z0s, "E": Es, "sigma": sigs, "gamma": gammas, **fits}
    return res, (["z0", "E", "sigma", "gamma"],
                 list(zip(z0s, Es, sigs, gammas)))


def _cmd_triviality_run(cfg, seed):
    z0s = cfg.get("z0_list", [0.4, 0.2, 0.1, 0.05])
    if isinstance(z0s, str):
        z0s = [float(t) for t in z0s.split(";")]
    f = _source_from_config(cfg, int(cfg.get("d", 1)))
    rep = triviality_run(
        d=int(cfg.get("d", 1)),
        m2=float(cfg.get("m2", 6.25)),
        lam=float(cfg.get("lam", 0.1)),
        f=f,
        z0_list=[float(z) for z in z0s],
        A=float(cfg.get("A", 5.0)),
        l=float(cfg.get("l", 4.0)),
        n_z=int(cfg.get("n_z", 32)),
        n_x=int(cfg.get("n_x", 32)),
        n_samples=int(cfg.get("n_samples", 10000)),
        seed=seed,
        site_budget=int(cfg.get("site_budget", 4096)),
    )
    res = {k: (list(v) if isinstance(v, tuple) else v)
           for k, v in rep.__dict__.items()}
    header = ["z0", "E", "sigma", "gamma", "p_opt", "tail_log",
              "lower_bound", "envelope_log", "mc_log_ratio", "mc_log_ci"]
    rows = list(zip(rep.z0_list, rep.E_list, rep.sigma_list, rep.gamma_list,
                    rep.p_opt_list, rep.tail_log_list, rep.lower_bound_list,
                    rep.envelope_log_list, rep.mc_log_ratio_list,
                    rep.mc_log_ci_list))
    return res, (header, rows)


def _cmd_functional(cfg, seed):
    d = int(cfg.get("d", 1))
    p = spectral_params(d, float(cfg.get("m2", 6.25)))
    f = _source_from_config(cfg, d)
    model = _build_lattice(cfg)
    lam = float(cfg.get("lam", 0.1))
    n = int(cfg.get("n_samples", 10000))
    a = generating_C(f, model, p, lam, n, seed)
    b = generating_tildeC(p.c * f, model, p, lam, n, seed)
    gap = abs(a.log_value - b.log_value)
    joint_ci = a.mc.log_ci + b.mc.log_ci
    res = {
        "log_C": a.log_value,
        "log_C_prefactor": a.log_prefactor,
        "log_C_mc_ci": a.mc.log_ci,
        "log_tildeC_at_f_over_c": b.log_value,
        "log_tildeC_prefactor": b.log_prefactor,
        "log_tildeC_mc_ci": b.mc.log_ci,
        "duality_log_gap": gap,
        "duality_within_ci": bool(gap <= joint_ci),
    }
    return res, None


def _cmd_conditioning_check(cfg, seed):
    fvals = cfg.get("boundary_values", [0.4])
    if isinstance(fvals, (int, float)):
        fvals = [fvals]
    resid = finite_dim_conditioning_check(
        n_bulk=int(cfg.get("n_bulk", 2)),
        n_bdry=int(cfg.get("n_bdry", len(fvals))),
        coupling=float(cfg.get("coupling", 0.3)),
        f=[float(v) for v in fvals],
        seed=seed,
        n_quad=int(cfg.get("n_quad", 200)),
    )
    return {"residual": resid}, None


def _cmd_renorm_demo(cfg):
    d = int(cfg.get("d", 1))
    p = spectral_params(d, float(cfg.get("m2", 6.25)))
    f = _source_from_config(cfg, d)
    lam = float(cfg.get("lam", 0.5))
    box = (float(cfg.get("A", 5.0)), float(cfg.get("l", 4.0)))
    zs = [float(z) for z in np.geomspace(float(cfg.get("z_max", 0.1)),
                                         float(cfg.get("z_min", 1e-3)),
                                         int(cfg.get("n_points", 4)))]
    gaps = [renorm_convergence_gap(z0, f, p, lam, box) for z0 in zs]
    return ({"z0": zs, "relative_gap": gaps},
            (["z0", "relative_gap"], list(zip(zs, gaps))))


def _cmd_witten4(cfg):
    p = spectral_params(2, float(cfg.get("m2", 1.25)))
    r = float(cfg.get("corner", 2.0))
    wdt = float(cfg.get("src_widths", 0.12))
    amp = float(cfg.get("src_amps", 1.0))
    fs = [BoundaryTestFunction.single(c, wdt, amp)
          for c in [(r, r), (r, -r), (-r, r), (-r, -r)]]
    val, err = witten_4pt(fs, p, n_z=int(cfg.get("n_z", 40)),
                          n_x=int(cfg.get("n_x", 60)))
    return {"value": val, "self_convergence_error": err}, None


def _cmd_positivity(cfg, seed):
    d, m2 = int(cfg.get("d", 2)), float(cfg.get("m2", 1.25))
    p = spectral_params(d, m2)
    fam = [
        BoundaryTestFunction.single((0.5,) + (0.0,) * (d - 1), 0.2, 1.0),
        BoundaryTestFunction.single((1.5,) + (0.5,) * (d - 1), 0.3, -0.7),
        BoundaryTestFunction.single((-1.0,) + (1.0,) * (d - 1), 0.25, 0.4),
    ]
    stoch = gram_stochastic(gaussian_functional(p, "+"), fam)
    fam_rp = [
        BoundaryTestFunction.single((1.0,) + (0.0,) * (d - 1), 0.12, 1.0),
        BoundaryTestFunction.single((2.0,) + (0.0,) * (d - 1), 0.12, 0.75),
    ]
    refl = gram_reflection(gaussian_functional(p, "+"), fam_rp)
    witness = unitarity_witness()
    nus = [float(v) for v in np.linspace(0.9, 1.1, 9)]
    scan = reflection_scan(nus)
    model = _build_lattice({**cfg, "d": 1, "m2": 6.25,
                            "n_z": int(cfg.get("n_z", 16)),
                            "n_x": int(cfg.get("n_x", 16))})
    pos_sites = np.flatnonzero([s.x[0] > 0.0 for s in model.sites])
    rng = np.random.default_rng(seed)
    fam_lat = []
    for _ in range(3):
        g = np.zeros(model.n_sites)
        idx = rng.choice(pos_sites, size=4, replace=False)
        g[idx] = 0.5 * rng.normal(size=4)
        fam_lat.append(g)
    rp_free = perturbed_rp_gram(model, 0.0, fam_lat, 1, seed)
    rp_pert = perturbed_rp_gram(model, float(cfg.get("lam", 0.1)), fam_lat,
                                int(cfg.get("n_samples", 10000)), seed)
    neg = renorm_negative_witness(p, float(cfg.get("witness_lam", 50.0)))
    return {
        "free_stochastic": stoch.to_dict(),
        "free_reflection": refl.to_dict(),
        "unitarity_witness": witness.to_dict(),
        "reflection_scan_nu": nus,
        "reflection_scan_min_eigenvalue": scan,
        "lattice_rp_free": rp_free.to_dict(),
        "lattice_rp_perturbed": rp_pert.to_dict(),
        "renorm_negative_witness": neg.to_dict(),
    }, None


COMMANDS = {
    "params": lambda cfg, seed: _cmd_params(cfg),
    "kernel-eval": lambda cfg, seed: _cmd_kernel_eval(cfg),
    "splitting-check": lambda cfg, seed: _cmd_splitting_check(cfg),
    "corr-check": lambda cfg, seed: _cmd_corr_check(cfg),
    "scaling-fit": lambda cfg, seed: _cmd_scaling_fit(cfg),
    "triviality-run": _cmd_triviality_run,
    "functional": _cmd_functional,
    "conditioning-check": _cmd_conditioning_check,
    "renorm-demo": lambda cfg, seed: _cmd_renorm_demo(cfg),
    "witten4": lambda cfg, seed: _cmd_witten4(cfg),
    "positivity": _cmd_positivity,
}


def _summarize(command: str, results: dict) -> str:
    lines = [f"{command}:"]
    for key, val in results.items():
        if isinstance(val, float):
            lines.append(f"  {key} = {val:.6g}")
        elif isinstance(val, (bool, int, str)):
            lines.append(f"  {key} = {val}")
        elif isinstance(val, list) and val and isinstance(val[0], float):
            lines.append(
                f"  {key} = [{', '.join(f'{v:.4g}' for v in val[:6])}"
                + (", ...]" if len(val) > 6 else "]")
            )
        elif isinstance(val, dict) and "psd" in val:
            lines.append(
                f"  {key}: psd={val['psd']} "
                f"min_eig={val['min_eigenvalue']:.4g}"
            )
    return "\n".join(lines)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="adslab",
        description="Boundary-functional and shrinking-box experiments "
                    "for a scalar field on hyperbolic half-space.",
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", default=None,
                        help="flat key = value config file")
    parser.add_argument("--seed", type=int, default=None,
                        help="global seed (overrides the config)")
    parser.add_argument("--out", default="results",
                        help="output directory for JSON/CSV artifacts")
    parser.add_argument("--threads", type=int, default=1,
                        help="BLAS/quadrature thread cap (default 1 for "
                             "bitwise-stable baselines)")
    args = parser.parse_args(argv)

    try:
        cfg = parse_config(args.config)
        seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
        cfg["seed"] = seed
        _limit_threads(max(1, args.threads))
        results, table = COMMANDS[args.command](cfg, seed)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except BudgetError as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET

    json_path = _write_json(args.out, args.command, cfg, results)
    print(_summarize(args.command, results))
    print(f"wrote {json_path}")
    if table is not None:
        csv_path = _write_csv(args.out, args.command, table[0], table[1])
        print(f"wrote {csv_path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
