"""Command-line entry point: simulate, elicit, fit, summarize.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numerical failure. Messages go to stderr; results go to files (``elicit``
prints its few numbers to stdout).
"""

import argparse
from concurrent.futures import ProcessPoolExecutor
import json
import logging
import os
from pathlib import Path
import sys
import time

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig
from .data import atomic_write, fmt, load_csv, parse_numeric, preprocess, read_table, save_csv, write_table
from .errors import FilterDivergenceError, InputError, SamplerError
from .evaluate import MIN_DIAGNOSTIC_DRAWS, diagnostics, mad_mse, summarize
from .priors import elicit_inclusion_prior, elicit_slab_precision
from .sampler import DrawsStore, McmcConfig, ModelSpec, run_chain
from .simulate import SimRecipe, simulate_trivariate, simulate_univariate_sparse

log = logging.getLogger("sparsedlm")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _write_json(path, obj):
    atomic_write(path, lambda fh: fh.write(json.dumps(obj, indent=2, sort_keys=True) + "\n"))


def _write_report(path, items):
    atomic_write(path, lambda fh: fh.writelines(f"{k}={v}\n" for k, v in items.items()))


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(cfg, out):
    s = cfg.simulate
    if s.kind == "univariate_sparse":
        data, truth = simulate_univariate_sparse(V=s.V, W_over_V=s.W_over_V, kappa=s.kappa, phi=s.ar_coef,
                                                 pi_mix=s.pi_mix, T=s.T, seed=cfg.seed, mixture=s.mixture)
        # row t = 0 holds the initial state; its innovation is recorded as 0
        write_table(out / "truth.csv", {
            "t": np.arange(s.T + 1), "theta": truth.theta,
            "w": np.r_[0.0, truth.w], "outlier": np.r_[0, truth.outlier.astype(int)],
        })
        meta = {"kind": s.kind, "V": truth.V, "W": truth.W, "kappa": truth.kappa, "ar_coef": truth.phi,
                "pi_mix": truth.pi_mix, "mixture": truth.mixture, "lambda_theta": truth.lambda_theta,
                "seed": cfg.seed}
    else:
        kw = {k: getattr(s, k) for k in ("T", "signal_noise_ratio", "lambda_theta", "scan_interval",
                                          "microtime_dt", "shared_obs_regressor")}
        if s.phi is not None:
            kw["phi"] = np.asarray(s.phi, dtype=float)
        if s.alpha is not None:
            kw["alpha"] = np.asarray(s.alpha, dtype=float)
        data, truth = simulate_trivariate(SimRecipe(seed=cfg.seed, **kw))
        m = truth.phi.shape[0]
        cols = {"t": np.arange(s.T + 1)}
        for i in range(m):
            cols[f"alpha_{i + 1}"] = truth.theta[:, i]
        for i in range(m):
            cols[f"theta_{i + 1}"] = truth.theta[:, m + i]
        write_table(out / "truth.csv", cols)
        meta = {"kind": s.kind, "phi": truth.phi.tolist(), "alpha": truth.alpha.tolist(),
                "lambda_y": truth.lambda_y.tolist(), "lambda_theta": truth.lambda_theta.tolist(),
                "loglik": truth.loglik, "seed": cfg.seed}
    save_csv(data, out / "dataset.csv")
    _write_json(out / "truth.meta.json", meta)
    log.info("wrote dataset and truth for seed %d to %s", cfg.seed, out)


# ---------------------------------------------------------------------------
# elicit


def cmd_elicit(cfg, args):
    e = cfg.elicit
    tau0 = e.tau0 if args.tau0 is None else args.tau0
    quantile = e.target_quantile if args.quantile is None else args.quantile
    if quantile is not None and args.tau0 is None:
        tau0 = None
    rate_d = e.rate_d if args.rate_d is None else args.rate_d
    gp = elicit_slab_precision(target_quantile=quantile if quantile is not None else -1.0,
                               prob=e.prob if args.prob is None else args.prob, rate_d=rate_d, tau0=tau0)
    bp = elicit_inclusion_prior(e.a if args.a is None else args.a, e.b if args.b is None else args.b)
    tau0_used = (gp.shape - 1.0) / gp.rate
    lines = [
        f"slab_precision={gp}",
        f"tau0={tau0_used:.4f}",
        f"c={gp.shape:.4f}",
        f"d={gp.rate:.4f}",
        f"inclusion_prior={bp}",
        f"inclusion_mean={bp.mean:.4f}",
        f"inclusion_sd={bp.sd:.4f}",
    ]
    print("\n".join(lines))


# ---------------------------------------------------------------------------
# fit


def build_spec(cfg, data):
    mo = cfg.model
    return ModelSpec(
        y=data.series,
        x_obs=data.regressors,
        x_trans=data.regressors,
        trend=mo.trend,
        structure=None if mo.structure is None else np.asarray(mo.structure, dtype=bool),
        slab=mo.slab(),
        hierarchy=mo.hierarchy(),
        obs_prior=mo.obs_prior(),
        fixed_lambda_theta=mo.fixed_lambda_theta,
        trend_prior_var=mo.trend_prior_var,
        state_prior_var=mo.state_prior_var,
    )


def build_mcmc(cfg):
    mc = cfg.mcmc
    return McmcConfig(n_iter=mc.n_iter, burn_in=mc.burn_in, thin=mc.thin, seed=cfg.seed, n_chains=mc.n_chains,
                      phi_mask=frozenset((i - 1, j - 1) for i, j in mc.phi_mask), store_states=mc.store_states)


def _chain_job(args):
    spec, mcfg, chain = args
    return run_chain(spec, mcfg, chain=chain)


def run_all_chains(spec, mcfg):
    """Chains run in worker processes when more than one CPU is available."""
    jobs = [(spec, mcfg, c) for c in range(mcfg.n_chains)]
    workers = min(mcfg.n_chains, os.cpu_count() or 1)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            stores = list(pool.map(_chain_job, jobs))
    else:
        stores = [_chain_job(j) for j in jobs]
    return DrawsStore.merge(stores)


def load_fit_data(cfg, out):
    path = Path(cfg.data.path) if cfg.data.path else out / "dataset.csv"
    data = load_csv(path, series=cfg.data.series)
    if cfg.data.detrend or cfg.data.standardize:
        data = preprocess(data, k=cfg.data.detrend_k, detrend=cfg.data.detrend, scale=cfg.data.standardize)
    return path, data


def cmd_fit(cfg, out):
    start = time.perf_counter()
    path, data = load_fit_data(cfg, out)
    spec = build_spec(cfg, data)
    mcfg = build_mcmc(cfg)
    draws = run_all_chains(spec, mcfg)
    wall = time.perf_counter() - start

    write_table(out / "draws.csv", draws.scalar_columns())
    m, k = spec.m, spec.n_trend
    cols = {"t": np.arange(spec.T + 1)}
    for i in range(k):
        cols[f"alpha_{i + 1}"] = draws.state_mean[:, i]
    for i in range(m):
        cols[f"theta_{i + 1}"] = draws.state_mean[:, k + i]
    write_table(out / "states_mean.csv", cols)
    omega = draws.omega.mean(axis=0)
    write_table(out / "omega_mean.csv", {"t": np.arange(1, spec.T + 1),
                                         **{f"omega_{i + 1}": omega[:, i] for i in range(m)}})
    save_csv(data, out / "fit_data.csv")
    manifest = {
        "command": "fit",
        "version": __version__,
        "seed": cfg.seed,
        "n_chains": mcfg.n_chains,
        "config_sha256": cfg.digest(),
        "config": cfg.to_dict(),
        "data_path": str(path),
        "n_draws": int(draws.n_draws),
        "wall_time_s": round(wall, 3),
        "zero_regressor": sorted([i + 1, j + 1] for i, j in draws.zero_regressor),
    }
    _write_json(out / "manifest.json", manifest)
    log.info("fit: %d draws in %.1f s", draws.n_draws, wall)


# ---------------------------------------------------------------------------
# summarize


def read_draws(path):
    header, rows = read_table(path)
    if not rows:
        raise InputError(f"{path}: no draws")
    arr = parse_numeric(path, header, rows)
    return {name: arr[:, k] for k, name in enumerate(header)}


def cmd_summarize(cfg, out):
    draws = read_draws(out / "draws.csv")
    summary = summarize(draws)
    write_table(out / "summary.csv", summary.to_columns())

    names = [n for n in draws if n not in ("chain", "iteration")]
    n = len(draws["iteration"])
    write_table(out / "draws_long.csv", {
        "parameter": np.repeat(names, n),
        "draw": np.tile(np.arange(1, n + 1), len(names)),
        "value": np.concatenate([draws[k] for k in names]),
    })

    report = {"n_draws": n}
    diag_cols = {"parameter": [], "ess": [], "n": [], "acf_1": [], "acf_5": [], "acf_10": []}
    cum_cols = {"parameter": [], "length": [], "q025": [], "q50": [], "q975": []}
    if n >= MIN_DIAGNOSTIC_DRAWS:
        for name, d in diagnostics(draws).items():
            diag_cols["parameter"].append(name)
            diag_cols["ess"].append(d.ess)
            diag_cols["n"].append(d.n)
            for lag in (1, 5, 10):
                diag_cols[f"acf_{lag}"].append(d.acf[lag] if lag < len(d.acf) else np.nan)
            for length, q in zip(d.lengths, d.cumulative_q):
                cum_cols["parameter"].append(name)
                cum_cols["length"].append(int(length))
                for key, val in zip(("q025", "q50", "q975"), q):
                    cum_cols[key].append(val)
        report["diagnostics"] = "computed"
    else:
        log.warning("only %d draws; diagnostics need %d and were skipped", n, MIN_DIAGNOSTIC_DRAWS)
        report["diagnostics"] = "skipped"
    write_table(out / "diagnostics.csv", diag_cols)
    write_table(out / "cumulative_quantiles.csv", cum_cols)

    states = out / "states_mean.csv"
    fit_data = out / "fit_data.csv"
    if states.exists() and fit_data.exists():
        data = load_csv(fit_data)
        header, rows = read_table(states)
        sm = parse_numeric(states, header, rows)
        cols = {h: sm[:, k] for k, h in enumerate(header)}
        m = data.m
        alpha = np.array([cols[f"alpha_{i + 1}"][-1] if f"alpha_{i + 1}" in cols else 0.0 for i in range(m)])
        theta = np.column_stack([cols[f"theta_{i + 1}"] for i in range(m)])
        report.update(mad_mse(data, alpha, theta).as_dict())
    for row in summary.rows:
        report[f"mean_{row.name}"] = fmt(row.mean)
        if row.name.startswith("phi_"):
            report[f"p_zero_{row.name}"] = fmt(row.p_zero)
    _write_report(out / "report.txt", {k: fmt(v) if not isinstance(v, str) else v for k, v in report.items()})
    log.info("summarize: %d parameters over %d draws", len(summary.rows), n)


# ---------------------------------------------------------------------------
# entry point


def make_parser():
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--chains", type=int, help="override mcmc.n_chains")
    common.add_argument("--out-dir", help="override the output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="sparsedlm", description="Sparse dynamic linear models for effective connectivity.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("simulate", parents=[common], help="simulate a dataset and its truth")
    el = sub.add_parser("elicit", parents=[common], help="print the elicited priors")
    el.add_argument("--tau0", type=float)
    el.add_argument("--quantile", type=float, help="elicit tau0 from this value of the slab quantile")
    el.add_argument("--prob", type=float)
    el.add_argument("--rate-d", type=float)
    el.add_argument("--a", type=float)
    el.add_argument("--b", type=float)
    sub.add_parser("fit", parents=[common], help="run the Gibbs sampler")
    sub.add_parser("summarize", parents=[common], help="posterior summaries and diagnostics")
    return parser


def resolve_config(args):
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.chains is not None:
        cfg.mcmc.n_chains = args.chains
    if args.out_dir is not None:
        cfg.out_dir = args.out_dir
    return cfg.validate()


def main(argv=None):
    try:
        args = make_parser().parse_args(argv)
    except UsageError as exc:
        print(f"sparsedlm: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        out = Path(cfg.out_dir)
        if args.command == "simulate":
            cmd_simulate(cfg, out)
        elif args.command == "elicit":
            cmd_elicit(cfg, args)
        elif args.command == "fit":
            cmd_fit(cfg, out)
        else:
            cmd_summarize(cfg, out)
    except ConfigError as exc:
        print(f"sparsedlm: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SamplerError, FilterDivergenceError, FloatingPointError) as exc:
        print(f"sparsedlm: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InputError, OSError) as exc:
        print(f"sparsedlm: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
