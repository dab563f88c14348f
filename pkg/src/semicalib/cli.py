"""Command-line driver: emulate, validate, synth, calibrate, project.

Every command writes ``run.manifest`` (JSON) into its output directory with
the resolved configuration and SHA-256 hashes of its inputs.  Passing that
manifest back through ``--config`` reproduces the outputs byte for byte.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .bases import build_kr, build_kv
from .calibration import (CalibrationProblem, McmcConfig, Priors, chain_diagnostics, read_chain,
                          run_mcmc, write_chain)
from .data import InputError, read_ensemble, read_grid, read_observation, write_ensemble, write_grid
from .emulator import (EmulatorFitError, cross_validate, fit_emulator, load_emulator,
                       save_emulator, write_cv_report)
from .gp import FitError
from .projection import (density_table, fit_projection, project_posterior,
                         volume_change_from_fields, write_density_table)
from .synthetic import make_scenario, rank_by_centroid_distance, toy_ensemble, toy_grid, write_scenario

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3

# argparse dests that name input files (hashed into the manifest)
INPUT_KEYS = ("ensemble", "future_ensemble", "observation", "grid", "emulator", "chain",
              "volume_change", "resume")
# dests that do not affect outputs
VOLATILE_KEYS = ("config", "out", "command", "func", "workers")


def _sha256(path) -> str:
    path = Path(path)
    if not path.exists():
        raise InputError(f"file not found: {path}")
    h = hashlib.sha256(path.read_bytes())
    hdr = Path(str(path) + ".hdr")
    if path.suffix == ".bin" and hdr.exists():
        h.update(hdr.read_bytes())
    return h.hexdigest()


def _write_manifest(out: Path, args) -> None:
    config = {k: v for k, v in sorted(vars(args).items()) if k not in VOLATILE_KEYS}
    inputs = {k: _sha256(config[k]) for k in INPUT_KEYS if config.get(k)}
    manifest = {"command": args.command, "version": __version__, "config": config,
                "input_sha256": inputs}
    (out / "run.manifest").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def load_config(path) -> dict:
    """``key = value`` lines (``#`` comments) or a previous ``run.manifest``."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"config file not found: {path}")
    text = path.read_text()
    if text.lstrip().startswith("{"):
        return dict(json.loads(text)["config"])
    out = {}
    for ln, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{path}:{ln}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _require(args, *keys):
    for k in keys:
        if not getattr(args, k, None):
            raise InputError(f"missing required setting '{k}'")


def cmd_emulate(args) -> int:
    _require(args, "ensemble")
    design, ens = read_ensemble(args.ensemble)
    out = _out_dir(args)
    em = fit_emulator(ens, design, J_w=args.J_w, J_u=args.J_u)
    save_emulator(out / "emulator.bundle", em)
    lines = ["component index zeta kappa phi extra"]
    for k, g in enumerate(em.w_emulators):
        lines.append(f"w {k + 1} {float(g.cov.zeta)!r} {float(g.cov.kappa)!r} "
                     f"{','.join(repr(float(x)) for x in g.cov.phi)} -")
    for k, g in enumerate(em.u_emulators):
        lines.append(f"u {k + 1} {float(g.cov.zeta)!r} {float(g.cov.kappa)!r} "
                     f"{','.join(repr(float(x)) for x in g.cov.phi)} dof={g.info.get('dof')}")
    lines.append(f"lpca_iterations {len(em.lpca.loglik_trace)}")
    lines.append(f"ppca_iterations {len(em.ppca.loglik_trace)}")
    lines.append(f"ppca_sigma_e2 {float(em.ppca.sigma_e2)!r}")
    (out / "fit_report.txt").write_text("\n".join(lines) + "\n")
    _write_manifest(out, args)
    return EXIT_OK


def cmd_validate(args) -> int:
    _require(args, "ensemble")
    design, ens = read_ensemble(args.ensemble)
    out = _out_dir(args)
    report = cross_validate(ens, design, args.holdout_frac, args.seed, J_w=args.J_w, J_u=args.J_u)
    write_cv_report(out / "cv_report.txt", report, out / "cv_runs.txt")
    _write_manifest(out, args)
    return EXIT_OK


def cmd_synth(args) -> int:
    out = _out_dir(args)
    if args.toy_runs:
        grid = toy_grid()
        design, ens, fut = toy_ensemble(args.toy_runs, seed=args.seed, grid=grid)
        write_ensemble(out / "ensemble.txt", design, ens)
        write_ensemble(out / "future_ensemble.txt", design, fut)
        write_grid(out / "grid.txt", grid)
    else:
        _require(args, "ensemble", "grid")
        design, ens = read_ensemble(args.ensemble)
        grid = read_grid(args.grid)
    if grid.p != ens.p:
        raise InputError("grid and ensemble sizes differ")
    truth = args.truth_index
    if truth is None or truth < 0:
        ranking = rank_by_centroid_distance(design)
        truth = int(ranking[int(args.truth_rank_frac * (len(ranking) - 1))])
    sc = make_scenario(ens, design, truth, args.seed, grid, frac=args.frac, sill=args.sill,
                       range_km=args.grf_range, nugget=args.nugget)
    write_scenario(out, sc, {"frac": args.frac, "sill": args.sill, "range_km": args.grf_range,
                             "nugget": args.nugget})
    _write_manifest(out, args)
    return EXIT_OK


def _run_chain(job):
    problem, cfg, resume = job
    return run_mcmc(problem, config=cfg, resume_from=resume)


def cmd_calibrate(args) -> int:
    _require(args, "emulator", "ensemble", "observation", "grid")
    em = load_emulator(args.emulator)
    _, ens = read_ensemble(args.ensemble)
    obs = read_observation(args.observation)
    grid = read_grid(args.grid)
    out = _out_dir(args)
    kr = build_kr(grid, obs.positive_cells, n_knots=args.knots, range_km=args.kernel_range,
                  J_r=args.J_r)
    kv = build_kv(ens.presence, obs.presence, threshold=args.kv_threshold)
    priors = Priors(sigma_v2=(args.sigma_v2_shape, args.sigma_v2_scale),
                    sigma_r2=(args.sigma_r2_shape, args.sigma_r2_scale),
                    sigma_eps2=(args.sigma_eps2_shape, args.sigma_eps2_scale),
                    kappa_shape=args.kappa_shape, kappa_ratio=args.kappa_ratio)
    problem = CalibrationProblem(em, obs, kr, kv, priors, mode=args.mode)
    jobs = []
    for c in range(args.chains):
        ck = str(out / (f"checkpoint_{c + 1}.json" if args.chains > 1 else "checkpoint.json"))
        cfg = McmcConfig(n_iter=args.n_iter, burn_in=args.burn_in, thin=args.thin,
                         seed=args.seed + c, checkpoint_every=args.checkpoint_every,
                         checkpoint_path=ck if args.checkpoint_every else None)
        jobs.append((problem, cfg, args.resume if args.chains == 1 else None))
    if args.chains > 1:
        with ProcessPoolExecutor(max_workers=args.workers or None) as pool:
            chains = list(pool.map(_run_chain, jobs))
    else:
        chains = [_run_chain(jobs[0])]
    diag = {}
    for c, chain in enumerate(chains):
        name = f"chain_{c + 1}" if args.chains > 1 else "chain"
        write_chain(out / f"{name}.txt", chain)
        entry = {"mode": chain.mode, "seed": chain.seed, "n_iter": chain.n_iter,
                 "kept": int(chain.samples.shape[0]), "acceptance": chain.acceptance_rates,
                 "step_sizes": chain.step_sizes}
        if chain.samples.shape[0] >= 1000:
            entry["summary"] = chain_diagnostics(chain)["parameters"]
        diag[name] = entry
    (out / "diagnostics.json").write_text(json.dumps(diag, indent=2, sort_keys=True) + "\n")
    _write_manifest(out, args)
    return EXIT_OK


def _read_vector(path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise InputError(f"file not found: {path}")
    return np.array(path.read_text().split(), dtype=float)


def cmd_project(args) -> int:
    _require(args, "ensemble", "chain")
    design, ens = read_ensemble(args.ensemble)
    if args.volume_change:
        y = _read_vector(args.volume_change)
    else:
        _require(args, "future_ensemble", "grid")
        _, fut = read_ensemble(args.future_ensemble)
        area = read_grid(args.grid).cell_area_km2
        y = np.array([volume_change_from_fields(a, b, area) for a, b in zip(ens.values, fut.values)])
    out = _out_dir(args)
    proj = fit_projection(design, y, units=args.units)
    cols, samples = read_chain(args.chain)
    idx = [i for i, c in enumerate(cols) if c.startswith("theta")]
    if len(idx) != design.d:
        raise InputError("chain and design dimensions differ")
    post = project_posterior(samples[:, idx], proj, args.include_noise, seed=args.seed)
    write_density_table(out / "projection_posterior", density_table(post, args.n_grid, args.units))
    if args.prior_draws:
        rng = np.random.default_rng(args.seed + 1)
        prior = project_posterior(rng.uniform(size=(args.prior_draws, design.d)), proj,
                                  args.include_noise, seed=args.seed + 2)
        write_density_table(out / "projection_prior", density_table(prior, args.n_grid, args.units))
    _write_manifest(out, args)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _bool(s) -> bool:
    if isinstance(s, bool):
        return s
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {s}")


def _optional_int(s):
    return None if s in (None, "None", "") else int(s)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="semicalib",
                                     description="Semi-continuous emulation and calibration")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True):
        p.add_argument("--config", help="key = value file or a previous run.manifest")
        p.add_argument("--out", default="out", help="output directory")
        if seed:
            p.add_argument("--seed", type=int, default=0)
        return p

    def dims(p):
        p.add_argument("--J-w", dest="J_w", type=int, default=10)
        p.add_argument("--J-u", dest="J_u", type=int, default=20)

    p = common(sub.add_parser("emulate", help="fit the semi-continuous emulator"))
    p.add_argument("--ensemble")
    dims(p)
    p.set_defaults(func=cmd_emulate)

    p = common(sub.add_parser("validate", help="hold-out validation of the emulator"))
    p.add_argument("--ensemble")
    p.add_argument("--holdout-frac", type=float, default=0.1)
    dims(p)
    p.set_defaults(func=cmd_validate)

    p = common(sub.add_parser("synth", help="synthetic-truth observation"))
    p.add_argument("--ensemble")
    p.add_argument("--grid")
    p.add_argument("--toy-runs", type=int, default=0,
                   help="generate a dome-simulator ensemble of this size instead of reading one")
    p.add_argument("--truth-index", type=_optional_int, default=None)
    p.add_argument("--truth-rank-frac", type=float, default=0.25,
                   help="position in the far-to-near centroid ranking when no index is given")
    p.add_argument("--frac", type=float, default=0.3)
    p.add_argument("--sill", type=float, default=4.0)
    p.add_argument("--grf-range", type=float, default=400.0)
    p.add_argument("--nugget", type=float, default=0.01)
    p.set_defaults(func=cmd_synth)

    p = common(sub.add_parser("calibrate", help="MCMC calibration of the input setting"))
    for k in ("emulator", "ensemble", "observation", "grid", "resume"):
        p.add_argument(f"--{k}")
    p.add_argument("--mode", choices=("full", "binary-only", "prior"), default="full")
    p.add_argument("--J-r", dest="J_r", type=int, default=10)
    p.add_argument("--knots", type=int, default=40)
    p.add_argument("--kernel-range", type=float, default=400.0)
    p.add_argument("--kv-threshold", type=float, default=0.5)
    p.add_argument("--n-iter", type=int, default=150_000)
    p.add_argument("--burn-in", type=int, default=30_000)
    p.add_argument("--thin", type=int, default=1)
    p.add_argument("--chains", type=int, default=1)
    p.add_argument("--workers", type=int, default=0)
    p.add_argument("--checkpoint-every", type=int, default=0)
    pr = Priors()
    for name, (a, b) in (("sigma_v2", pr.sigma_v2), ("sigma_r2", pr.sigma_r2),
                         ("sigma_eps2", pr.sigma_eps2)):
        p.add_argument(f"--{name.replace('_', '-')}-shape", dest=f"{name}_shape", type=float, default=a)
        p.add_argument(f"--{name.replace('_', '-')}-scale", dest=f"{name}_scale", type=float, default=b)
    p.add_argument("--kappa-shape", type=float, default=pr.kappa_shape)
    p.add_argument("--kappa-ratio", type=float, default=pr.kappa_ratio)
    p.set_defaults(func=cmd_calibrate)

    p = common(sub.add_parser("project", help="posterior projection of volume change"))
    for k in ("ensemble", "future_ensemble", "grid", "chain", "volume_change"):
        p.add_argument(f"--{k.replace('_', '-')}", dest=k)
    p.add_argument("--include-noise", type=_bool, default=True)
    p.add_argument("--units", default="m^3")
    p.add_argument("--n-grid", type=int, default=512)
    p.add_argument("--prior-draws", type=int, default=0)
    p.set_defaults(func=cmd_project)
    return parser


def parse_args(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        cfg = load_config(args.config)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = set(cfg) - known - {"command"}
        if unknown:
            raise InputError(f"unknown config keys: {sorted(unknown)}")
        sub.set_defaults(**{k: (v if isinstance(v, str) or v is None else v)
                            for k, v in cfg.items() if k in known})
        args = parser.parse_args(argv)
    return args


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
        return args.func(args)
    except (InputError, FileNotFoundError) as exc:
        print(f"semicalib: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (np.linalg.LinAlgError, FitError, EmulatorFitError, FloatingPointError,
            ArithmeticError) as exc:
        print(f"semicalib: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
