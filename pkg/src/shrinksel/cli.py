"""Command-line entry point for reproducible batch runs.

Subcommands: simulate, fit, select, evaluate, bench, shrinkmap. Every
command is config-file-first (JSON) with flag overrides, writes its fully
resolved configuration beside its outputs, and derives all randomness from
one master seed. Output files are written atomically. Exit codes: 0 on
success, 1 on internal failure, 2 on user/config errors.

Environment overrides exist for exactly two things: ``SHRINKSEL_OUTDIR``
(default output directory) and ``SHRINKSEL_JOBS`` (default worker count).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from .core import (Dataset, InvariantError, METHODS, PriorSpec,
                   atomic_write_text, load_draws, load_matrix_csv,
                   save_draws, save_matrix_csv)
from .samplers import McmcConfig, fit_horseshoe, fit_spike_slab, write_run_manifest
from .selection import S2mConfig, TWO_SIGMA_HAT, resolve_b, run_selector, \
    write_selection_report
from .shrinkage import (DEFAULT_A_GRID, DEFAULT_RHO_GRID, DEFAULT_TAU_GRID,
                        reverse_shrinkage_grid, write_grid_csv)
from .simulate import (ErrorReport, SimConfig, format_benchmark_table,
                       gen_design, gen_response, replicate_streams,
                       run_benchmark, score, write_benchmark_csv,
                       write_replicate_csv)

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2


class UsageError(Exception):
    """Bad flags or configuration supplied by the user."""


def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise UsageError(f"config file {path} must hold a JSON object")
    return cfg


def _pick(flag_value, config_section, key, default):
    if flag_value is not None:
        return flag_value
    if key in config_section:
        return config_section[key]
    return default


def _out_dir(args) -> str:
    out = args.out or os.environ.get("SHRINKSEL_OUTDIR") or "."
    os.makedirs(out, exist_ok=True)
    return out


def _jobs(args) -> int:
    if getattr(args, "jobs", None) is not None:
        return max(1, args.jobs)
    env = os.environ.get("SHRINKSEL_JOBS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"SHRINKSEL_JOBS={env!r} is not an integer") from None
    return 1


def _parse_strengths(raw, r):
    if raw is None:
        raise UsageError("strengths are required (flag --strengths or config)")
    if isinstance(raw, str):
        try:
            values = [float(v) for v in raw.split(",") if v.strip() != ""]
        except ValueError:
            raise UsageError(f"malformed strengths list {raw!r}") from None
    elif isinstance(raw, (int, float)):
        values = [float(raw)]
    else:
        values = [float(v) for v in raw]
    if len(values) == 1 and r > 1:
        values = values * r
    return tuple(values)


def _sim_config(args, config) -> SimConfig:
    sim = config.get("sim", {})
    r = int(_pick(args.r, sim, "r", 10))
    strengths = _pick(args.strengths, sim, "strengths",
                      sim.get("strength"))
    correlated = args.correlated
    if correlated is None:
        correlated = bool(sim.get("correlated", False))
    intercept = args.intercept
    if intercept is None:
        intercept = bool(sim.get("intercept", True))
    try:
        return SimConfig(
            n=int(_pick(args.n, sim, "n", 50)),
            p=int(_pick(args.p, sim, "p", 300)),
            r=r,
            strengths=_parse_strengths(strengths, r),
            correlated=correlated,
            cor_pairs=int(_pick(args.cor_pairs, sim, "cor_pairs", 2)),
            cor_target=float(_pick(args.cor_target, sim, "cor_target", 0.99)),
            noise_sd=float(_pick(args.noise_sd, sim, "noise_sd", 1.0)),
            intercept=intercept,
            seed=int(_pick(args.seed, sim, "seed", 0)),
            replicates=int(_pick(getattr(args, "replicates", None), sim,
                                 "replicates", 5)),
        )
    except InvariantError as exc:
        raise UsageError(str(exc)) from None


def _prior_config(args, config) -> PriorSpec:
    section = config.get("prior", {})
    family = _pick(getattr(args, "prior", None), section, "family", "horseshoe")
    tau_upper = _pick(getattr(args, "tau_upper", None), section, "tau_upper", 1.0)
    if isinstance(tau_upper, str):
        if tau_upper.lower() in ("none", "off"):
            tau_upper = None
        else:
            try:
                tau_upper = float(tau_upper)
            except ValueError:
                raise UsageError(f"bad tau_upper {tau_upper!r}") from None
    try:
        return PriorSpec(
            family=str(family),
            tau_upper=tau_upper,
            ig_shape=float(_pick(getattr(args, "ig_shape", None), section,
                                 "ig_shape", 1.5)),
            ig_scale=float(_pick(getattr(args, "ig_scale", None), section,
                                 "ig_scale", 1.5)),
            ss_beta_a=float(_pick(getattr(args, "ss_beta_a", None), section,
                                  "ss_beta_a", 1.0)),
            ss_beta_b=float(_pick(getattr(args, "ss_beta_b", None), section,
                                  "ss_beta_b", 15.0)),
        )
    except InvariantError as exc:
        raise UsageError(str(exc)) from None


def _mcmc_config(args, config, seed_default=0) -> McmcConfig:
    section = config.get("mcmc", {})
    try:
        return McmcConfig(
            iterations=int(_pick(getattr(args, "iterations", None), section,
                                 "iterations", 5000)),
            burn_in=int(_pick(getattr(args, "burn_in", None), section,
                              "burn_in", 2000)),
            thin=int(_pick(getattr(args, "thin", None), section, "thin", 1)),
            seed=int(_pick(getattr(args, "seed", None), section, "seed",
                           seed_default)),
        )
    except InvariantError as exc:
        raise UsageError(str(exc)) from None


def _selection_config(args, config) -> S2mConfig:
    section = config.get("selection", {})
    b = _pick(getattr(args, "b", None), section, "b", TWO_SIGMA_HAT)
    if isinstance(b, str) and b != TWO_SIGMA_HAT:
        try:
            b = float(b)
        except ValueError:
            raise UsageError(
                f"--b must be a positive number or {TWO_SIGMA_HAT!r}") from None
    try:
        return S2mConfig(
            b=b,
            credible_level=float(_pick(getattr(args, "level", None), section,
                                       "credible_level", 0.95)),
            kappa_threshold=float(_pick(getattr(args, "threshold", None),
                                        section, "kappa_threshold", 0.5)),
        )
    except InvariantError as exc:
        raise UsageError(str(exc)) from None


def _methods_list(args, config, default) -> list[str]:
    raw = _pick(getattr(args, "methods", None), config, "methods", default)
    if isinstance(raw, str):
        methods = [m.strip() for m in raw.split(",") if m.strip()]
    else:
        methods = [str(m) for m in raw]
    unknown = [m for m in methods if m not in METHODS]
    if unknown or not methods:
        raise UsageError(
            f"unknown method(s) {unknown}; valid methods: {', '.join(METHODS)}")
    return methods


def _write_resolved(out, command, payload) -> None:
    atomic_write_text(os.path.join(out, f"{command}_resolved.json"),
                      json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _sim_payload(cfg: SimConfig) -> dict:
    return {
        "n": cfg.n, "p": cfg.p, "r": cfg.r,
        "strengths": list(cfg.strengths),
        "correlated": cfg.correlated, "cor_pairs": cfg.cor_pairs,
        "cor_target": cfg.cor_target, "noise_sd": cfg.noise_sd,
        "intercept": cfg.intercept, "seed": cfg.seed,
        "replicates": cfg.replicates,
    }


def _prior_payload(prior: PriorSpec) -> dict:
    return {
        "family": prior.family, "tau_upper": prior.tau_upper,
        "ig_shape": prior.ig_shape, "ig_scale": prior.ig_scale,
        "ss_beta_a": prior.ss_beta_a, "ss_beta_b": prior.ss_beta_b,
    }


def _mcmc_payload(mcmc: McmcConfig) -> dict:
    return {"iterations": mcmc.iterations, "burn_in": mcmc.burn_in,
            "thin": mcmc.thin, "seed": mcmc.seed}


def _s2m_payload(cfg: S2mConfig) -> dict:
    return {"b": cfg.b, "credible_level": cfg.credible_level,
            "kappa_threshold": cfg.kappa_threshold}


def cmd_simulate(args) -> int:
    config = _load_config(args.config)
    cfg = _sim_config(args, config)
    out = _out_dir(args)
    x, truth = gen_design(cfg)
    resp_seq, _ = replicate_streams(cfg)[0]
    y = gen_response(x, truth, cfg.strengths, cfg.noise_sd, resp_seq)
    save_matrix_csv(x, os.path.join(out, "design.csv"))
    save_matrix_csv(np.asarray(y)[:, None], os.path.join(out, "response.csv"))
    atomic_write_text(os.path.join(out, "truth.txt"),
                      "\n".join(str(j) for j in sorted(truth)) + "\n")
    _write_resolved(out, "simulate", {"sim": _sim_payload(cfg)})
    print(f"wrote design.csv ({x.shape[0]}x{x.shape[1]}), response.csv, "
          f"truth.txt to {out}")
    return EXIT_OK


def cmd_fit(args) -> int:
    config = _load_config(args.config)
    if args.design is None or args.response is None:
        raise UsageError("--design and --response are required")
    prior = _prior_config(args, config)
    mcmc = _mcmc_config(args, config)
    out = _out_dir(args)
    x = load_matrix_csv(args.design)
    y = load_matrix_csv(args.response)
    if y.shape[1] != 1:
        raise UsageError(f"{args.response}: expected a single column")
    data = Dataset(y=y[:, 0], x=x)
    start = time.perf_counter()
    if prior.family == "horseshoe":
        draws = fit_horseshoe(data, prior, mcmc)
    else:
        draws = fit_spike_slab(data, prior, mcmc)
    wall = time.perf_counter() - start
    draws_path = os.path.join(out, "draws.csv")
    save_draws(draws, draws_path)
    write_run_manifest(os.path.join(out, "manifest.txt"), data, prior, mcmc, wall)
    _write_resolved(out, "fit", {"prior": _prior_payload(prior),
                                 "mcmc": _mcmc_payload(mcmc),
                                 "design": args.design,
                                 "response": args.response})
    print(f"wrote {draws.t} retained draws to {draws_path} "
          f"({wall:.1f}s)")
    return EXIT_OK


def cmd_select(args) -> int:
    config = _load_config(args.config)
    if args.draws is None:
        raise UsageError("--draws is required")
    methods = _methods_list(args, config, default="s2m")
    cfg = _selection_config(args, config)
    out = _out_dir(args)
    draws = load_draws(args.draws)
    results = []
    errors = {}
    for method in methods:
        try:
            results.append(run_selector(draws, method, cfg))
        except InvariantError as exc:
            errors[method] = str(exc)
            print(f"select: method {method} failed: {exc}", file=sys.stderr)
    resolved = resolve_b(draws, cfg)
    write_selection_report(results, os.path.join(out, "selection.csv"),
                           os.path.join(out, "selection.txt"),
                           cfg=cfg, resolved_b=resolved, errors=errors)
    _write_resolved(out, "select", {"selection": _s2m_payload(cfg),
                                    "methods": methods,
                                    "resolved_b": resolved,
                                    "draws": args.draws})
    for r in results:
        print(f"{r.method}: H={r.h_mode} "
              f"selected={sorted(r.selected)}")
    return EXIT_OK


def _read_truth_file(path) -> frozenset[int]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return frozenset(int(line.strip()) for line in fh if line.strip())
    except ValueError:
        raise UsageError(f"{path}: truth file must hold one integer per line") \
            from None


def cmd_evaluate(args) -> int:
    if args.selection is None or args.truth is None:
        raise UsageError("--selection and --truth are required")
    truth = _read_truth_file(args.truth)
    out = _out_dir(args)
    lines = ["method,masking,swamping"]
    with open(args.selection, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        try:
            m_pos = header.index("method")
            s_pos = header.index("selected")
        except ValueError:
            raise UsageError(
                f"{args.selection}: not a selection report") from None
        e_pos = header.index("error") if "error" in header else None
        for line in fh:
            cells = line.rstrip("\n").split(",")
            if len(cells) < len(header) or not cells[m_pos]:
                continue
            if e_pos is not None and cells[e_pos]:
                print(f"{cells[m_pos]}: skipped (selector failed: "
                      f"{cells[e_pos]})", file=sys.stderr)
                continue
            selected = {int(v) for v in cells[s_pos].split() if v}
            masking, swamping = score(selected, truth)
            lines.append(f"{cells[m_pos]},{masking},{swamping}")
            print(f"{cells[m_pos]}: masking={masking} swamping={swamping}")
    atomic_write_text(os.path.join(out, "evaluate.csv"), "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_bench(args) -> int:
    config = _load_config(args.config)
    cfg = _sim_config(args, config)
    prior = _prior_config(args, config)
    mcmc = _mcmc_config(args, config)
    s2m_cfg = _selection_config(args, config)
    default_methods = ("s2m,2m,cs,ht" if prior.family == "horseshoe"
                       else "s2m,2m,hppm,mpm")
    methods = _methods_list(args, config, default=default_methods)
    jobs = _jobs(args)
    out = _out_dir(args)
    setting = "cor" if cfg.correlated else "uncor"
    start = time.perf_counter()
    reports = run_benchmark(cfg, prior, methods, mcmc, s2m_cfg, jobs=jobs)
    wall = time.perf_counter() - start
    write_benchmark_csv(reports, setting, os.path.join(out, "benchmark.csv"))
    write_replicate_csv(reports, setting, os.path.join(out, "replicates.csv"))
    _write_resolved(out, "bench", {
        "sim": _sim_payload(cfg), "prior": _prior_payload(prior),
        "mcmc": _mcmc_payload(mcmc), "selection": _s2m_payload(s2m_cfg),
        "methods": methods, "jobs": jobs,
    })
    print(format_benchmark_table(reports, setting))
    print(f"done in {wall:.1f}s; table in {out}/benchmark.csv")
    return EXIT_OK


def _parse_grid(raw, default, name):
    if raw is None:
        return tuple(default)
    try:
        values = tuple(float(v) for v in raw.split(",") if v.strip() != "")
    except ValueError:
        raise UsageError(f"malformed {name} grid {raw!r}") from None
    if not values:
        raise UsageError(f"empty {name} grid")
    return values


def cmd_shrinkmap(args) -> int:
    rho = _parse_grid(args.rho, DEFAULT_RHO_GRID, "rho")
    tau = _parse_grid(args.tau, DEFAULT_TAU_GRID, "tau")
    a = _parse_grid(args.a, DEFAULT_A_GRID, "a")
    x2_values = args.x2 or [1.0]
    jobs = _jobs(args)
    out = _out_dir(args)
    written = []
    for x2 in x2_values:
        points = reverse_shrinkage_grid(rho, tau, a, x2=x2,
                                        tol=args.tol, jobs=jobs)
        path = os.path.join(out, f"shrink_grid_x2_{x2:g}.csv")
        write_grid_csv(points, path)
        n_blue = sum(p.reverse for p in points)
        n_fail = sum(p.error is not None for p in points)
        written.append(path)
        print(f"x2={x2:g}: {len(points)} points, {n_blue} reverse-shrinkage, "
              f"{n_fail} quadrature failures -> {path}")
    _write_resolved(out, "shrinkmap", {
        "rho": list(rho), "tau": list(tau), "a": list(a),
        "x2": list(x2_values), "tol": args.tol, "jobs": jobs,
        "files": written,
    })
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shrinksel",
        description="Shrinkage-prior variable selection toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--out", help="output directory "
                        "(default: $SHRINKSEL_OUTDIR or .)")

    sp = sub.add_parser("simulate", help="generate a synthetic dataset")
    common(sp)
    sp.add_argument("-n", type=int, default=None)
    sp.add_argument("-p", type=int, default=None)
    sp.add_argument("-r", type=int, default=None)
    sp.add_argument("--strengths", help="comma list (single value broadcasts)")
    sp.add_argument("--correlated", action="store_true", default=None)
    sp.add_argument("--uncorrelated", dest="correlated", action="store_false")
    sp.add_argument("--cor-pairs", dest="cor_pairs", type=int, default=None)
    sp.add_argument("--cor-target", dest="cor_target", type=float, default=None)
    sp.add_argument("--noise-sd", dest="noise_sd", type=float, default=None)
    sp.add_argument("--intercept", action="store_true", default=None)
    sp.add_argument("--no-intercept", dest="intercept", action="store_false")
    sp.add_argument("--seed", type=int, default=None)
    sp.set_defaults(func=cmd_simulate, replicates=None)

    sp = sub.add_parser("fit", help="run a Gibbs chain on a dataset")
    common(sp)
    sp.add_argument("--design", help="design CSV (headerless numeric)")
    sp.add_argument("--response", help="response CSV (single column)")
    sp.add_argument("--prior", choices=["horseshoe", "spike-slab"], default=None)
    sp.add_argument("--tau-upper", dest="tau_upper", default=None,
                    help="global-scale bound (number or 'none')")
    sp.add_argument("--ig-shape", dest="ig_shape", type=float, default=None)
    sp.add_argument("--ig-scale", dest="ig_scale", type=float, default=None)
    sp.add_argument("--ss-beta-a", dest="ss_beta_a", type=float, default=None)
    sp.add_argument("--ss-beta-b", dest="ss_beta_b", type=float, default=None)
    sp.add_argument("--iterations", type=int, default=None)
    sp.add_argument("--burn-in", dest="burn_in", type=int, default=None)
    sp.add_argument("--thin", type=int, default=None)
    sp.add_argument("--seed", type=int, default=None)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("select", help="apply selectors to a draw file")
    common(sp)
    sp.add_argument("--draws", help="draw CSV")
    sp.add_argument("--methods", help=f"comma list from {', '.join(METHODS)}")
    sp.add_argument("--b", default=None,
                    help=f"s2m gap threshold (number or {TWO_SIGMA_HAT!r})")
    sp.add_argument("--level", type=float, default=None,
                    help="credible level for cs")
    sp.add_argument("--threshold", type=float, default=None,
                    help="shrinkage-weight threshold for ht")
    sp.set_defaults(func=cmd_select)

    sp = sub.add_parser("evaluate", help="score a selection against truth")
    common(sp)
    sp.add_argument("--selection", help="selection.csv from the select command")
    sp.add_argument("--truth", help="truth file (one 1-based index per line)")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("bench", help="seeded replicate benchmark")
    common(sp)
    sp.add_argument("-n", type=int, default=None)
    sp.add_argument("-p", type=int, default=None)
    sp.add_argument("-r", type=int, default=None)
    sp.add_argument("--strengths", default=None)
    sp.add_argument("--correlated", action="store_true", default=None)
    sp.add_argument("--uncorrelated", dest="correlated", action="store_false")
    sp.add_argument("--cor-pairs", dest="cor_pairs", type=int, default=None)
    sp.add_argument("--cor-target", dest="cor_target", type=float, default=None)
    sp.add_argument("--noise-sd", dest="noise_sd", type=float, default=None)
    sp.add_argument("--intercept", action="store_true", default=None)
    sp.add_argument("--no-intercept", dest="intercept", action="store_false")
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--replicates", type=int, default=None)
    sp.add_argument("--prior", choices=["horseshoe", "spike-slab"], default=None)
    sp.add_argument("--tau-upper", dest="tau_upper", default=None)
    sp.add_argument("--iterations", type=int, default=None)
    sp.add_argument("--burn-in", dest="burn_in", type=int, default=None)
    sp.add_argument("--thin", type=int, default=None)
    sp.add_argument("--methods", default=None)
    sp.add_argument("--b", default=None)
    sp.add_argument("--level", type=float, default=None)
    sp.add_argument("--threshold", type=float, default=None)
    sp.add_argument("--jobs", type=int, default=None)
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("shrinkmap", help="reverse-shrinkage classification grid")
    common(sp)
    sp.add_argument("--x2", type=float, action="append",
                    help="smaller MLE value; repeat for several grids")
    sp.add_argument("--rho", help="comma list of correlation values")
    sp.add_argument("--tau", help="comma list of prior scales")
    sp.add_argument("--a", help="comma list of MLE ratios (> 1)")
    sp.add_argument("--tol", type=float, default=1e-6,
                    help="quadrature relative error target")
    sp.add_argument("--jobs", type=int, default=None)
    sp.set_defaults(func=cmd_shrinkmap)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except (UsageError, InvariantError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # internal failure
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
