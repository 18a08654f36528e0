"""Command-line interface.

Subcommands cover the pipeline end to end::

    clamr simulate   write a synthetic dataset (plus truth and region spec)
    clamr replicate  run a replication study and write the summary table
    clamr pretrain   calibrate rho, screen features by Bayes factor
    clamr fit        run the sampler, write draws, point estimate, PSM
    clamr summarize  region shares, predictive draws, WAIC, diagnostics

Exit codes: 0 success, 2 bad input (schema, config, unknown columns),
3 sampler failure, 4 lineage mismatch between run artifacts.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, runio
from .errors import ClamrError, ConvergenceError, DomainError, LineageError
from .gibbs import concat_draws, run_chains
from .influence import calibrate_rho, pretrain_select
from .model import (
    CenterPriorSpec,
    Dataset,
    build_config,
    default_center_hyperparams,
    validate_mr_spec,
)
from .partition import Partition, compute_psm, point_estimate
from .summarize import delta_summary, diagnostics, posterior_predictive, waic
from .synth import FitSettings, SimScenario, replicate_study, scenario_mr_specs, simulate

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_SAMPLER = 3
EXIT_LINEAGE = 4


class _InputError(Exception):
    """Bad user input; maps to exit code 2."""


def _fail_input(message: str) -> None:
    raise _InputError(message)


def _add_mcmc_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--iterations", type=int, default=5000)
    parser.add_argument("--burn-in", type=int, default=1000, dest="burn_in")
    parser.add_argument("--thin", type=int, default=5)
    parser.add_argument("--chains", type=int, default=1)
    parser.add_argument("--seed", type=int, default=0)


def _add_model_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--omega", type=float, default=None,
                        help="prior region mass (overrides the spec file)")
    parser.add_argument("--gamma", type=float, default=None)
    parser.add_argument("--L", type=int, default=None, dest="L")
    parser.add_argument("--variance-mode", choices=("application", "simulation"),
                        default=None, dest="variance_mode")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clamr",
        description="Bayesian mixture clustering with meaningful-region center priors.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="write one synthetic dataset")
    p_sim.add_argument("--scenario", choices=("misspecified", "well_specified", "no_mr"),
                       default="misspecified")
    p_sim.add_argument("--n", type=int, default=500)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--out", required=True, help="output directory")

    p_rep = sub.add_parser("replicate", help="run a replication study")
    p_rep.add_argument("--scenario", choices=("misspecified", "well_specified", "no_mr"),
                       default="misspecified")
    p_rep.add_argument("--sizes", default="500", help="comma-separated sample sizes")
    p_rep.add_argument("--reps", type=int, default=20)
    p_rep.add_argument("--methods", default="clamr,bgmm,kmeans,hca")
    p_rep.add_argument("--epsilon", type=float, default=0.1)
    p_rep.add_argument("--loss", choices=("vi", "binder"), default="vi")
    p_rep.add_argument("--out", required=True, help="output CSV path")
    _add_mcmc_flags(p_rep)
    p_rep.add_argument("--omega", type=float, default=0.95)
    p_rep.add_argument("--gamma", type=float, default=1.0)
    p_rep.add_argument("--L", type=int, default=10, dest="L")
    p_rep.add_argument("--variance-mode", choices=("application", "simulation"),
                       default="simulation", dest="variance_mode")

    p_pre = sub.add_parser("pretrain", help="calibrate rho and screen features")
    p_pre.add_argument("data", help="CSV dataset")
    p_pre.add_argument("mrspec", help="region-spec JSON")
    p_pre.add_argument("--out", required=True, help="output directory")
    p_pre.add_argument("--epsilon", type=float, default=0.1)
    p_pre.add_argument("--threshold", type=float, default=20.0)
    p_pre.add_argument("--mc-samples", type=int, default=10000, dest="mc_samples")
    _add_mcmc_flags(p_pre)
    _add_model_flags(p_pre)

    p_fit = sub.add_parser("fit", help="run the sampler and write a run directory")
    p_fit.add_argument("data", help="CSV dataset")
    p_fit.add_argument("mrspec", help="region-spec JSON")
    p_fit.add_argument("--out", required=True, help="output directory")
    p_fit.add_argument("--features", default=None,
                       help="comma-separated feature subset to fit")
    p_fit.add_argument("--sampler", choices=("clamr", "bgmm"), default="clamr")
    p_fit.add_argument("--loss", choices=("vi", "binder"), default="vi")
    p_fit.add_argument("--rho", type=float, default=None,
                       help="shared rho override (else spec overrides, else 1.0)")
    _add_mcmc_flags(p_fit)
    _add_model_flags(p_fit)

    p_sum = sub.add_parser("summarize", help="summarize a fit run directory")
    p_sum.add_argument("rundir", help="directory written by 'clamr fit'")
    p_sum.add_argument("--out", default=None, help="output directory (default: rundir)")
    p_sum.add_argument("--predictive-samples", type=int, default=500,
                       dest="predictive_samples")
    p_sum.add_argument("--seed", type=int, default=0)
    p_sum.add_argument("--loss", choices=("vi", "binder"), default="vi")
    return parser


# ---------------------------------------------------------------------------
# Shared pieces


def _load_dataset(path: str) -> Dataset:
    try:
        return runio.dataset_from_csv(path)
    except FileNotFoundError:
        _fail_input(f"dataset not found: {path}")


def _load_spec_for_data(args, data: Dataset):
    """Parse the spec file, align it to the data columns, apply flag overrides.

    Returns (specs, options) with specs ordered like the data columns.
    """
    try:
        parsed = runio.mrspec_from_json(args.mrspec)
    except FileNotFoundError:
        _fail_input(f"region spec not found: {args.mrspec}")
    by_name = {spec.feature_name: spec for spec in parsed["specs"]}
    missing = [name for name in data.feature_names if name not in by_name]
    if missing:
        _fail_input(
            "region spec covers no column named "
            + ", ".join(repr(m) for m in missing)
        )
    extra = [name for name in by_name if name not in data.feature_names]
    if extra:
        print(
            f"note: spec features without data columns are ignored: {', '.join(extra)}",
            file=sys.stderr,
        )
    specs = [validate_mr_spec(by_name[name]) for name in data.feature_names]
    options = {
        "omega": parsed["omega"] if args.omega is None else args.omega,
        "gamma": parsed["gamma"] if args.gamma is None else args.gamma,
        "L": parsed["L"] if args.L is None else args.L,
        "variance_mode": parsed["variance_mode"]
        if args.variance_mode is None
        else args.variance_mode,
        "xi": parsed["xi"],
        "tau2": parsed["tau2"],
        "rho": parsed["rho"],
    }
    return specs, options


def _subset_features(data: Dataset, names_arg: str | None) -> Dataset:
    if names_arg is None:
        return data
    wanted = [name.strip() for name in names_arg.split(",") if name.strip()]
    if not wanted:
        _fail_input("--features must name at least one column")
    unknown = [name for name in wanted if name not in data.feature_names]
    if unknown:
        _fail_input(f"--features names unknown columns: {', '.join(unknown)}")
    idx = [data.feature_names.index(name) for name in wanted]
    return Dataset(
        values=data.values[:, idx],
        missing=data.missing[:, idx],
        feature_names=tuple(wanted),
    )


def _build_run_config(specs, options, args, rhos):
    overrides = []
    for spec, rho in zip(specs, rhos):
        name = spec.feature_name
        if name in options["xi"] or name in options["tau2"]:
            defaults = [default_center_hyperparams(r, options["omega"]) for r in spec.regions]
            xi = options["xi"].get(name, tuple(d[0] for d in defaults))
            tau2 = options["tau2"].get(name, tuple(d[1] for d in defaults))
            overrides.append(CenterPriorSpec(xi=xi, tau2=tau2, rho=rho))
        else:
            overrides.append(None)
    return build_config(
        specs,
        omega=options["omega"],
        gamma=options["gamma"],
        L=options["L"],
        variance_mode=options["variance_mode"],
        rhos=rhos,
        center_priors=overrides,
        iterations=args.iterations,
        burn_in=args.burn_in,
        thin=args.thin,
        chains=args.chains,
        seed=args.seed,
    )


def _resolve_rhos(specs, options, args, data, calibrate: bool, mc_samples: int = 10000):
    """Per-feature rho: spec override, then --rho/calibration, then 1.0."""
    flag_rho = getattr(args, "rho", None)
    rhos = []
    cache: dict[int, float] = {}
    for spec in specs:
        name = spec.feature_name
        if name in options["rho"]:
            rhos.append(options["rho"][name])
        elif flag_rho is not None:
            rhos.append(flag_rho)
        elif calibrate and spec.K >= 2:
            if spec.K not in cache:
                cache[spec.K] = calibrate_rho(
                    K=spec.K,
                    gamma=options["gamma"],
                    L=options["L"],
                    n=data.n,
                    epsilon=args.epsilon,
                    mc_samples=mc_samples,
                )
            rhos.append(cache[spec.K])
        else:
            rhos.append(1.0)
    return rhos


def _config_snapshot(args, options, rhos, specs) -> dict:
    return {
        "command": args.command,
        "sampler": getattr(args, "sampler", "clamr"),
        "iterations": args.iterations,
        "burn_in": args.burn_in,
        "thin": args.thin,
        "chains": args.chains,
        "seed": args.seed,
        "loss": getattr(args, "loss", None),
        "mr_specs": runio.mrspec_to_json_dict(
            specs,
            omega=options["omega"],
            gamma=options["gamma"],
            L=options["L"],
            variance_mode=options["variance_mode"],
        ),
        "rho": {spec.feature_name: rho for spec, rho in zip(specs, rhos)},
    }


# ---------------------------------------------------------------------------
# Subcommands


def cmd_simulate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    data, truth = simulate(SimScenario(kind=args.scenario, n=args.n, seed=args.seed))
    runio.dataset_to_csv(data, out / "data.csv")
    runio.labels_to_csv(truth.labels, out / "truth.csv")
    runio.mrspec_to_json(
        scenario_mr_specs(args.scenario),
        out / "mrspec.json",
        variance_mode="simulation",
    )
    print(f"wrote {out / 'data.csv'} ({data.n} rows, {data.p} features)")
    return EXIT_OK


def cmd_replicate(args) -> int:
    sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    if not sizes or args.reps < 1:
        _fail_input("need at least one size and a positive --reps")
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    settings = FitSettings(
        iterations=args.iterations,
        burn_in=args.burn_in,
        thin=args.thin,
        chains=args.chains,
        L=args.L,
        gamma=args.gamma,
        omega=args.omega,
        variance_mode=args.variance_mode,
        loss=args.loss,
    )
    result = replicate_study(
        kind=args.scenario,
        sizes=sizes,
        reps=args.reps,
        methods=methods,
        settings=settings,
        base_seed=args.seed,
        epsilon=args.epsilon,
    )
    rows = result.aggregate()
    with open(args.out, "w") as fh:
        fh.write("scenario,n,method,reps,mean_ari,sd_ari,mean_blocks,sd_blocks\n")
        for row in rows:
            fh.write(
                f"{row['scenario']},{row['n']},{row['method']},{row['reps']},"
                f"{row['mean_ari']!r},{row['sd_ari']!r},"
                f"{row['mean_blocks']!r},{row['sd_blocks']!r}\n"
            )
    for row in rows:
        print(
            f"{row['scenario']} n={row['n']} {row['method']}: "
            f"ARI {row['mean_ari']:.3f} ({row['sd_ari']:.3f}), "
            f"blocks {row['mean_blocks']:.2f} ({row['sd_blocks']:.2f})"
        )
    return EXIT_OK


def cmd_pretrain(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    data = _load_dataset(args.data)
    specs, options = _load_spec_for_data(args, data)
    rhos = _resolve_rhos(specs, options, args, data, calibrate=True,
                         mc_samples=args.mc_samples)
    config = _build_run_config(specs, options, args, rhos)
    all_draws = run_chains(config, data, sampler="clamr")
    pooled = concat_draws(all_draws)
    selected, bf = pretrain_select(pooled, epsilons=args.epsilon, threshold=args.threshold)
    report = {
        "threshold": args.threshold,
        "epsilon": args.epsilon,
        "features": [
            {
                "name": spec.feature_name,
                "K": spec.K,
                "rho": rhos[j],
                "bayes_factor": None if np.isinf(bf[j]) else float(bf[j]),
                "bayes_factor_is_infinite": bool(np.isinf(bf[j])),
                "selected": j in selected,
            }
            for j, spec in enumerate(specs)
        ],
        "selected": [specs[j].feature_name for j in selected],
    }
    with open(out / "pretrain.json", "w") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    snapshot = _config_snapshot(args, options, rhos, specs)
    snapshot["epsilon"] = args.epsilon
    snapshot["threshold"] = args.threshold
    manifest = runio.build_manifest(
        "pretrain", snapshot, {"data": args.data, "mrspec": args.mrspec}, __version__
    )
    runio.write_manifest(manifest, out / "manifest.json")
    for entry in report["features"]:
        shown = "inf" if entry["bayes_factor_is_infinite"] else f"{entry['bayes_factor']:.3f}"
        mark = " *" if entry["selected"] else ""
        print(f"{entry['name']}: BF {shown}{mark}")
    print(f"selected: {', '.join(report['selected']) or '(none)'}")
    return EXIT_OK


def cmd_fit(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    data = _subset_features(_load_dataset(args.data), args.features)
    specs, options = _load_spec_for_data(args, data)
    rhos = _resolve_rhos(specs, options, args, data, calibrate=False)
    config = _build_run_config(specs, options, args, rhos)
    snapshot = _config_snapshot(args, options, rhos, specs)
    if args.features:
        snapshot["features"] = list(data.feature_names)
    manifest = runio.build_manifest(
        "fit", snapshot, {"data": args.data, "mrspec": args.mrspec}, __version__
    )
    all_draws = run_chains(config, data, sampler=args.sampler)
    pooled = concat_draws(all_draws)
    estimate, expected_loss = point_estimate(
        pooled.c + 1, loss=args.loss, candidates="draws"
    )
    psm = compute_psm(pooled.c + 1)
    for draws in all_draws:
        runio.draws_to_ndjson(
            draws, out / f"draws_chain{draws.chain_id:03d}.ndjson", manifest["run_id"]
        )
    runio.labels_to_csv(estimate.labels, out / "point_estimate.csv")
    runio.matrix_to_csv(psm, out / "psm.csv")
    runio.write_manifest(manifest, out / "manifest.json")
    print(
        f"run {manifest['run_id'][:12]}: {config.chains} chain(s), "
        f"{pooled.n_retained} retained draws, point estimate has "
        f"{estimate.n_blocks} clusters (expected {args.loss} loss {expected_loss:.4f})"
    )
    return EXIT_OK


def cmd_summarize(args) -> int:
    rundir = Path(args.rundir)
    out = Path(args.out) if args.out else rundir
    out.mkdir(parents=True, exist_ok=True)
    manifest = runio.read_manifest(rundir / "manifest.json")
    chain_files = sorted(rundir.glob("draws_chain*.ndjson"))
    if not chain_files:
        raise LineageError(f"{rundir}: no draws files")
    estimate_path = rundir / "point_estimate.csv"
    if not estimate_path.exists():
        raise LineageError(f"{rundir}: point_estimate.csv not found")
    all_draws = []
    for path in chain_files:
        try:
            draws, run_id = runio.draws_from_ndjson(path)
        except DomainError as exc:
            raise LineageError(str(exc)) from exc
        runio.check_lineage(manifest, run_id, str(path))
        all_draws.append(draws)
    labels = []
    with open(estimate_path) as fh:
        next(fh)
        for line in fh:
            if line.strip():
                labels.append(int(line.strip().split(",")[1]))
    c_star = Partition.from_labels(labels)
    pooled = concat_draws(all_draws)
    if len(c_star) != pooled.n:
        raise LineageError(
            f"point estimate covers {len(c_star)} rows but draws cover {pooled.n}"
        )

    delta = delta_summary(pooled, c_star)
    report = diagnostics(all_draws, c_star, loss=args.loss)
    predictive, pred_idx = posterior_predictive(
        pooled, n_samples=args.predictive_samples, seed=args.seed
    )

    region_labels = {
        feat["name"]: [r["label"] or str(i + 1) for i, r in enumerate(feat["regions"])]
        for feat in manifest["config"]["mr_specs"]["features"]
    }

    def region_name(feature: str, k: int) -> str:
        labels = region_labels.get(feature)
        if pooled.sampler == "clamr" and labels and 1 <= k <= len(labels):
            return labels[k - 1]
        return str(k)

    names = pooled.feature_names
    summary = {
        "run_id": manifest["run_id"],
        "n_clusters": c_star.n_blocks,
        "cluster_sizes": c_star.block_sizes().tolist(),
        "delta": [
            {
                "cluster": m + 1,
                "feature": names[j],
                "modal_region": region_name(names[j], int(delta.s_star[m, j])),
                "modal_share": float(delta.delta_star[m, j]),
                "shares": [float(v) for v in delta.delta_bar[m, j, : delta.K[j]]],
            }
            for m in range(delta.n_blocks)
            for j in range(pooled.p)
        ],
        "rhat_nmax": report.rhat_nmax,
        "rhat_loglik": report.rhat_loglik,
        "min_pairwise_rand": report.min_pairwise_rand,
        "predictive_draws_used": pred_idx.tolist(),
    }
    data_path = Path(manifest["inputs"]["data"]["path"])
    if data_path.exists() and runio.sha256_file(data_path) == manifest["inputs"]["data"]["sha256"]:
        data = runio.dataset_from_csv(data_path)
        wanted = manifest["config"].get("features")
        if wanted:
            idx = [data.feature_names.index(nm) for nm in wanted]
            data = Dataset(
                values=data.values[:, idx],
                missing=data.missing[:, idx],
                feature_names=tuple(wanted),
            )
        w, lppd, p_eff = waic(pooled, data)
        summary["waic"] = {"waic": w, "lppd": lppd, "p_waic": p_eff}
    else:
        print("note: original data unavailable or changed; skipping WAIC", file=sys.stderr)

    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")

    with open(out / "traces.csv", "w") as fh:
        fh.write("chain,draw,nmax,rand_to_estimate,loglik\n")
        for ci, (nmax, rand, ll) in enumerate(
            zip(report.nmax, report.rand_to_ref, report.loglik)
        ):
            for t in range(len(nmax)):
                fh.write(f"{ci},{t},{int(nmax[t])},{float(rand[t])!r},{float(ll[t])!r}\n")

    with open(out / "predictive.csv", "w") as fh:
        fh.write("draw,row,feature,value\n")
        for si in range(predictive.shape[0]):
            for i in range(pooled.n):
                for j in range(pooled.p):
                    fh.write(f"{pred_idx[si]},{i + 1},{names[j]},{predictive[si, i, j]!r}\n")

    print(
        f"summary for run {manifest['run_id'][:12]}: {c_star.n_blocks} clusters; "
        f"rhat(nmax) {summary['rhat_nmax']}, "
        f"waic {summary.get('waic', {}).get('waic', 'n/a')}"
    )
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "replicate": cmd_replicate,
    "pretrain": cmd_pretrain,
    "fit": cmd_fit,
    "summarize": cmd_summarize,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except _InputError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT
    except LineageError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_LINEAGE
    except ConvergenceError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_SAMPLER
    except ClamrError as err:
        # validation errors on inputs (bad specs, bad dims, bad values)
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT
    except FileNotFoundError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
