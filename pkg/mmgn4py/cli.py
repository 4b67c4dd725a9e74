"""Command line interface for mmgn4py.

Subcommands:

- ``generate`` makes synthetic ground truth and observations,
- ``solve`` fits factors to observations,
- ``evaluate`` compares factors with ground truth or held-out labels,
- ``sweep`` runs an experiment described by a YAML file,
- ``ingest`` converts a ratings file into 1-bit observations.

Exit status is 0 on success, 2 for usage errors and 1 for other errors.
"""

__all__ = ['main', 'build_parser']

import argparse
import json
import logging
import os
import sys
from typing import Any, Dict, List, Optional

from . import __version__, experiment, ingest, metrics, obsdata, synth
from .detail import io
from .experiment import ConfigError
from .linkfun import LinkModel
from .objective import FactorPair
from .solver import InnerParams, SolverConfig, select_rank, solve

_log = logging.getLogger(__name__)

_TRUTH_FILES = {"binary": "truth.mmgn", "csv": "truth.csv"}
_OBS_FILE = "observations.csv"
_MANIFEST = "manifest.json"


class UsageError(Exception):
    """Class for exceptions raised for inconsistent command line options.
    """
    pass


def _fraction(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("invalid number: {0!r}".format(text))
    if not 0 < value <= 1:
        raise argparse.ArgumentTypeError("fraction must be in (0, 1], got {0}".format(value))
    return value


def _positive(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("invalid number: {0!r}".format(text))
    if not value > 0:
        raise argparse.ArgumentTypeError("value must be positive, got {0}".format(value))
    return value


def _int_list(text: str) -> List[int]:
    """Parse "1,2,5" or "1-5" into list of integers."""
    try:
        if "-" in text and "," not in text:
            low, high = text.split("-", 1)
            return list(range(int(low), int(high) + 1))
        return [int(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("invalid list of integers: {0!r}".format(text))


def _float_list(text: str) -> List[float]:
    try:
        return [float(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("invalid list of numbers: {0!r}".format(text))


def _write_json(data: Dict[str, Any], path: Optional[str]) -> None:
    text = json.dumps(data, indent=2, sort_keys=True)
    if path is None:
        print(text)
    else:
        with open(path, "w") as file:
            file.write(text + "\n")


def _add_model_options(parser: argparse.ArgumentParser, default: str = "probit") -> None:
    parser.add_argument("--model", choices=["probit", "logistic"], default=default,
                        help="Link model, default: %(default)s.")
    parser.add_argument("--sigma", type=_positive, default=1.0,
                        help="Noise scale of link model, default: %(default)s.")


def _add_solver_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--tol", type=_positive, default=1e-4,
                        help="Tolerance on relative change of likelihood, default: %(default)s.")
    parser.add_argument("--max-iter", type=int, default=1000,
                        help="Maximum number of outer iterations, default: %(default)s.")
    parser.add_argument("--inner-tol", type=_positive, default=1e-6,
                        help="Tolerance of inner LSQR solver, default: %(default)s.")
    parser.add_argument("--init", choices=["spectral", "random"], default="spectral",
                        help="Initialization method, default: %(default)s.")
    parser.add_argument("--seed", type=int, default=0, help="Random seed, default: %(default)s.")


def _model(args: argparse.Namespace) -> LinkModel:
    return LinkModel(args.model, args.sigma)


def _solver_config(args: argparse.Namespace, rank: int) -> SolverConfig:
    return SolverConfig(rank=rank, tol=args.tol, max_outer_iter=args.max_iter,
                        inner=InnerParams(tol=args.inner_tol), init=args.init, seed=args.seed)


def _generate(params: Dict[str, Any], outdir: str) -> Dict[str, Any]:
    """Generate data set from parameters and return its manifest."""
    seeds = experiment.derive_seeds(params["seed"], 0, 0)
    model = LinkModel(params["model"], params["sigma"])
    truth = synth.make_truth(params["truth"], params["m"], params["n"], params["rank_star"],
                             seeds.truth, nu=params.get("nu"))
    omega = synth.sample_omega(params["m"], params["n"], params["rho"], seeds.omega)
    obs = synth.sample_labels(truth, omega, model, seeds.labels)

    os.makedirs(outdir, exist_ok=True)
    truth_file = _TRUTH_FILES[params["truth_format"]]
    synth.write_truth(truth, os.path.join(outdir, truth_file))
    obsdata.write_triplets(obs, os.path.join(outdir, _OBS_FILE))
    _log.info("generated %dx%d truth with spikiness %.4f and %d observations in %s",
              params["m"], params["n"], truth.spikiness, obs.size, outdir)

    manifest = dict(version=__version__, command="generate", parameters=params,
                    seeds=seeds._asdict(), spikiness=truth.spikiness,
                    observations=obs.size,
                    files=dict(truth=truth_file, observations=_OBS_FILE))
    _write_json(manifest, os.path.join(outdir, _MANIFEST))
    return manifest


def cmd_generate(args: argparse.Namespace) -> int:
    """Implementation of ``generate`` subcommand."""
    if args.replay:
        with open(args.replay) as file:
            manifest = json.load(file)
        params = manifest["parameters"]
        outdir = args.output or os.path.dirname(os.path.abspath(args.replay))
    else:
        if args.truth == "spiky" and args.nu is None:
            raise UsageError("--nu is required for spiky ground truth")
        params = dict(truth=args.truth, m=args.m, n=args.n or args.m, rank_star=args.rank_star,
                      nu=args.nu, model=args.model, sigma=args.sigma, rho=args.rho,
                      seed=args.seed, truth_format=args.truth_format)
        outdir = args.output or "."
    _generate(params, outdir)
    return 0


def cmd_solve(args: argparse.Namespace) -> int:
    """Implementation of ``solve`` subcommand."""
    obs = obsdata.read_triplets(args.observations, m=args.m, n=args.n)
    model = _model(args)
    result: Dict[str, Any] = dict(version=__version__, model=str(model),
                                  observations=obs.size, m=obs.m, n=obs.n)
    if args.rank is not None:
        report = solve(obs, model, _solver_config(args, args.rank))
    else:
        selection = select_rank(obs, model, args.ranks, split_fraction=args.split_fraction,
                                seed=args.seed, config=_solver_config(args, min(args.ranks)),
                                jobs=args.jobs)
        report = selection.report
        assert report is not None
        result["chosen_rank"] = selection.chosen_rank
        result["per_rank_validation_ll"] = [dict(rank=rank, log_likelihood=ll)
                                            for rank, ll in selection.per_rank_validation_ll]
    result.update(report.to_dict())
    result["storage_numbers"] = metrics.storage_numbers(obs, report.factors.rank)

    os.makedirs(args.output, exist_ok=True)
    io.write_factors(report.factors.u, report.factors.v, os.path.join(args.output, "factors.mmgn"))
    _write_json(result, os.path.join(args.output, "report.json"))
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    """Implementation of ``evaluate`` subcommand."""
    factors = FactorPair(*io.read_factors(args.factors))
    model = _model(args)
    runtime = 0.0
    if args.report:
        with open(args.report) as file:
            runtime = float(json.load(file).get("runtime_seconds", 0.0))

    if args.truth:
        truth = synth.read_truth(args.truth, compute_rank=False)
        report = metrics.evaluate(factors, truth, model, runtime_seconds=runtime,
                                  value_edges=args.groups)
        result = report.to_dict()
    else:
        if args.groups is not None:
            raise UsageError("--groups needs --truth")
        heldout, ratings = obsdata.read_triplets(args.heldout, m=factors.m, n=factors.n,
                                                 with_ratings=True)
        accuracy = metrics.sign_accuracy(factors, heldout, ratings)
        result = dict(sign_accuracy=accuracy.overall, runtime_seconds=runtime,
                      heldout=heldout.size)
        if accuracy.by_rating:
            result["by_rating"] = {repr(key): val for key, val in accuracy.by_rating.items()}
    _write_json(result, args.output)
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    """Implementation of ``sweep`` subcommand."""
    config = experiment.load_config(args.config)
    outdir = args.output or config.output
    os.makedirs(outdir, exist_ok=True)
    results = experiment.run_sweep(config, jobs=args.jobs)
    medians = experiment.summarize(results)
    experiment.write_long_csv(config, results, os.path.join(outdir, "sweep_long.csv"))
    experiment.write_medians_csv(config, medians, os.path.join(outdir, "sweep_medians.csv"))
    failed = sum(1 for res in results if res.error is not None)
    summary = dict(version=__version__, config=config.to_dict(),
                   slopes=experiment.sweep_slopes(config, medians),
                   replicates=len(results), failed=failed)
    _write_json(summary, os.path.join(outdir, "sweep_summary.json"))
    if failed:
        _log.warning("%d of %d replicates failed", failed, len(results))
    return 0


def cmd_ingest(args: argparse.Namespace) -> int:
    """Implementation of ``ingest`` subcommand."""
    table = ingest.read_ratings(args.ratings, delimiter=args.delimiter)
    data = ingest.binarize(table)
    pair = ingest.holdout_split(data.obs, args.test_fraction, args.seed)

    os.makedirs(args.output, exist_ok=True)
    obsdata.write_triplets(pair.train, os.path.join(args.output, "train.csv"),
                           ratings=data.ratings[pair.train_index])
    obsdata.write_triplets(pair.validation, os.path.join(args.output, "test.csv"),
                           ratings=data.ratings[pair.validation_index])
    summary: Dict[str, Any] = dict(version=__version__, ratings=table.size,
                                   users=table.num_users, items=table.num_items,
                                   average=data.average, train=pair.train.size,
                                   test=pair.validation.size,
                                   user_ids=table.user_ids.tolist(),
                                   item_ids=table.item_ids.tolist())
    if args.fit:
        fit = ingest.fit_ratings(data, model=_model(args), ranks=args.ranks,
                                 test_fraction=args.test_fraction, seed=args.seed,
                                 config=_solver_config(args, min(args.ranks)),
                                 replicates=args.replicates)
        summary["fit"] = dict(best_ranks=fit.best_ranks, overall=fit.overall,
                              by_rating={repr(k): v for k, v in fit.by_rating.items()},
                              per_rank_accuracy=[{str(k): v for k, v in acc.items()}
                                                 for acc in fit.per_rank_accuracy],
                              runtime_seconds=fit.runtime_seconds)
    _write_json(summary, os.path.join(args.output, "ingest.json"))
    return 0


def build_parser() -> argparse.ArgumentParser:
    """Make argument parser for all subcommands."""
    parser = argparse.ArgumentParser(prog="mmgn4py",
                                     description="1-bit matrix completion with "
                                     "majorization-minimization Gauss-Newton method.")
    parser.add_argument("--version", action="version", version="%(prog)s " + __version__)
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="Print more messages, use twice for debug output.")
    parser.add_argument("-q", "--quiet", action="store_true", help="Print errors only.")
    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND")
    subparsers.required = True

    gen = subparsers.add_parser("generate", help="Generate synthetic data set.")
    gen.add_argument("--truth", choices=["nonspiky", "spiky"], default="nonspiky",
                     help="Ground truth generator, default: %(default)s.")
    gen.add_argument("--m", type=int, default=200, help="Number of rows, default: %(default)s.")
    gen.add_argument("--n", type=int, default=None, help="Number of columns, default: same as m.")
    gen.add_argument("--rank-star", type=int, default=1,
                     help="Rank of ground truth, default: %(default)s.")
    gen.add_argument("--nu", type=_positive, default=None,
                     help="Degrees of freedom for spiky ground truth.")
    _add_model_options(gen)
    gen.add_argument("--rho", type=_fraction, default=0.8,
                     help="Fraction of observed entries, default: %(default)s.")
    gen.add_argument("--seed", type=int, default=0, help="Master seed, default: %(default)s.")
    gen.add_argument("--truth-format", choices=sorted(_TRUTH_FILES), default="binary",
                     help="Ground truth file format, default: %(default)s.")
    gen.add_argument("--replay", metavar="MANIFEST", default=None,
                     help="Regenerate data set described by a manifest file.")
    gen.add_argument("--output", default=None, help="Output directory.")
    gen.set_defaults(func=cmd_generate)

    slv = subparsers.add_parser("solve", help="Fit low-rank factors to observations.")
    slv.add_argument("observations", help="Triplet CSV file.")
    slv.add_argument("--m", type=int, default=None, help="Number of rows.")
    slv.add_argument("--n", type=int, default=None, help="Number of columns.")
    _add_model_options(slv)
    group = slv.add_mutually_exclusive_group(required=True)
    group.add_argument("--rank", type=int, default=None, help="Fixed rank.")
    group.add_argument("--ranks", type=_int_list, default=None,
                       help="Candidate ranks for validation selection, e.g. 1-5 or 1,2,4.")
    slv.add_argument("--split-fraction", type=float, default=0.2,
                     help="Validation fraction for rank selection, default: %(default)s.")
    _add_solver_options(slv)
    slv.add_argument("--jobs", type=int, default=1,
                     help="Number of concurrent candidate fits, default: %(default)s.")
    slv.add_argument("--output", default=".", help="Output directory, default: %(default)s.")
    slv.set_defaults(func=cmd_solve)

    evl = subparsers.add_parser("evaluate", help="Evaluate fitted factors.")
    evl.add_argument("factors", help="Factors file written by solve.")
    group = evl.add_mutually_exclusive_group(required=True)
    group.add_argument("--truth", default=None, help="Ground truth file.")
    group.add_argument("--heldout", default=None, help="Held-out triplet CSV file.")
    _add_model_options(evl)
    evl.add_argument("--groups", type=_float_list, default=None,
                     help="Comma-separated value group edges, e.g. --groups=-2.5,2.5.")
    evl.add_argument("--report", default=None, help="Solver report, runtime is copied from it.")
    evl.add_argument("--output", default=None, help="Output JSON file, default: standard output.")
    evl.set_defaults(func=cmd_evaluate)

    swp = subparsers.add_parser("sweep", help="Run experiment sweep.")
    swp.add_argument("config", help="Experiment YAML file.")
    swp.add_argument("--jobs", type=int, default=1,
                     help="Number of worker processes, default: %(default)s.")
    swp.add_argument("--output", default=None, help="Output directory, overrides configuration.")
    swp.set_defaults(func=cmd_sweep)

    ing = subparsers.add_parser("ingest", help="Convert ratings file to 1-bit observations.")
    ing.add_argument("ratings", help="Delimited ratings file.")
    ing.add_argument("--delimiter", default="::", help="Field delimiter, default: %(default)s.")
    ing.add_argument("--test-fraction", type=float, default=0.05,
                     help="Fraction of held-out ratings, default: %(default)s.")
    ing.add_argument("--fit", action="store_true", help="Fit models and report test accuracy.")
    ing.add_argument("--ranks", type=_int_list, default=list(range(1, 11)),
                     help="Candidate ranks for --fit, default: 1-10.")
    ing.add_argument("--replicates", type=int, default=1,
                     help="Number of random splits for --fit, default: %(default)s.")
    _add_model_options(ing, default="logistic")
    _add_solver_options(ing)
    ing.add_argument("--output", default=".", help="Output directory, default: %(default)s.")
    ing.set_defaults(func=cmd_ingest)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Entry point of ``mmgn4py`` command.

    Parameters
    ----------
    argv : `list` [ `str` ], optional
        Command line arguments, ``sys.argv[1:]`` by default.

    Returns
    -------
    status : `int`
        Exit status.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2

    level = logging.WARNING
    if args.quiet:
        level = logging.ERROR
    elif args.verbose == 1:
        level = logging.INFO
    elif args.verbose > 1:
        level = logging.DEBUG
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        parser.print_usage(sys.stderr)
        _log.error("%s", exc)
        return 2
    except (OSError, ValueError, KeyError, io.FormatError, ingest.RatingsFormatError) as exc:
        _log.error("%s", exc)
        return 1
