"""Command-line front end: ``choice-rank {simulate,rank,theory,ingest,experiment,verify}``.

Exit codes: 0 success, 2 invalid input, 3 numerical failure (including a
failed ``verify`` check), 4 I/O error. Every run writes its resolved
configuration to stderr as one JSON line.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import harness, preflib, theory, verify
from .choice_models import NoiseFamily, ParametricChoiceModel, PartworthVector, TabularChoiceModel, mnl_model
from .errors import ChoiceRankError, ConvergenceError, NumericalError
from .rankers import ALGORITHMS, ranking, top_k
from .sampling import ChoiceDataset, SamplingConfig, simulate_dataset

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage errors are validation errors
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    """``2,3,5`` or a range ``2-8``."""
    try:
        out: list[int] = []
        for part in text.split(","):
            if "-" in part.strip()[1:]:
                lo, hi = part.split("-", 1)
                out.extend(range(int(lo), int(hi) + 1))
            elif part.strip():
                out.append(int(part))
        return out
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers or ranges, got {text!r}") from None


def _threads(args: argparse.Namespace) -> int:
    if getattr(args, "threads", None):
        return max(1, args.threads)
    env = os.environ.get("CHOICE_RANK_THREADS", "")
    return max(1, int(env)) if env.isdigit() else 1


def _add_model_flags(p: argparse.ArgumentParser, required: bool = True) -> None:
    g = p.add_mutually_exclusive_group(required=required)
    g.add_argument("--mnl-weights", type=_floats, help="positive MNL weights, comma separated")
    g.add_argument("--partworths", type=_floats, help="partworths for a random utility model")
    g.add_argument("--tabular", type=Path, help="tabular choice model file")
    p.add_argument("--noise", choices=[f.value for f in NoiseFamily], default="gumbel", help="noise for --partworths")


def _model(args: argparse.Namespace):
    if args.mnl_weights is not None:
        return mnl_model(args.mnl_weights)
    if args.partworths is not None:
        return ParametricChoiceModel(PartworthVector(np.array(args.partworths)), NoiseFamily(args.noise))
    return TabularChoiceModel.load(args.tabular)


def _echo(args: argparse.Namespace, **extra) -> None:
    cfg = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items() if k != "func"}
    cfg.update(extra)
    print(json.dumps({"config": cfg}, sort_keys=True, default=str), file=sys.stderr)


def _write(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def cmd_simulate(args: argparse.Namespace) -> int:
    model = _model(args)
    config = SamplingConfig(model.n, args.m, args.p, args.R, args.seed, args.allow_large)
    threads = _threads(args)
    _echo(args, n=model.n, threads=threads, round_seeds=f"SeedSequence({args.seed}, spawn_key=(r,))")
    data = simulate_dataset(model, config, threads=threads)
    _write(data.dumps(), args.out)
    if args.verbose:
        print(f"{len(data)} observations", file=sys.stderr)
    return EXIT_OK


def cmd_rank(args: argparse.Namespace) -> int:
    if args.tabular is not None:
        data = TabularChoiceModel.load(args.tabular)
    else:
        data = ChoiceDataset.load(args.data)
    _echo(args, n=data.n)
    try:
        scores = ALGORITHMS[args.algorithm](data)
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    order = ranking(scores)
    rank_of = np.empty(data.n, dtype=np.int64)
    rank_of[order - 1] = np.arange(1, data.n + 1)
    rows = ["item,score,rank"] + [f"{i + 1},{s:.17g},{rank_of[i]}" for i, s in enumerate(scores)]
    _write("\n".join(rows) + "\n", args.out)
    if args.K is not None:
        top_k(scores, args.K)  # validates K
        print(" ".join(str(i) for i in order[: args.K]))
    return EXIT_OK


def cmd_theory(args: argparse.Namespace) -> int:
    model = _model(args)
    _echo(args, n=model.n)
    closed = isinstance(model, TabularChoiceModel) or model.is_mnl
    rng = np.random.default_rng(args.seed)
    rows = ["m,K,delta_K,factor_one,factor_two,bound_exact,bound_approx"]
    for m in args.m:
        if closed:
            scores = theory.borda_scores_exact(model, m)
        else:
            scores = theory.borda_scores_mc(model, m, args.mc_menus, args.mc_draws, rng)
        for K in args.K:
            rep = theory.gap_report(scores, K, h=args.h, index_rule=args.index_rule)
            exact = theory.exact_recovery_bound(scores, K, m) if rep.positive_gap else math.inf
            approx = math.inf
            if rep.delta_K_h is not None and rep.delta_K_h > 0:
                approx = theory.approx_recovery_bound(scores, K, args.h, m, args.index_rule)
            rows.append(
                f"{m},{K},{rep.delta_K:.17g},{rep.factor_one:.17g},{rep.factor_two:.17g},{exact:.17g},{approx:.17g}"
            )
    _write("\n".join(rows) + "\n", args.out)
    if args.verbose:
        print(f"{len(rows) - 1} rows", file=sys.stderr)
    return EXIT_OK


def cmd_ingest(args: argparse.Namespace) -> int:
    corpus = preflib.load_rankings(args.input)
    threads = _threads(args)
    _echo(args, n=corpus.n, total_rankings=corpus.total_rankings, threads=threads,
          note="items missing from a ballot form one bottom tie")
    table = preflib.empirical_choice_probs(corpus, args.m, threads=threads)
    if args.out_model:
        table.save(args.out_model)
    if args.out_truth:
        preflib.ground_truth_ordering(corpus).save(args.out_truth)
    if not args.out_model:
        sys.stdout.write(table.dumps())
    return EXIT_OK


def cmd_experiment(args: argparse.Namespace) -> int:
    config = harness.ExperimentConfig.load(args.config)
    threads = _threads(args) if (args.threads or os.environ.get("CHOICE_RANK_THREADS")) else config.threads
    if threads != config.threads:
        config = harness.ExperimentConfig(**{**config.__dict__, "threads": threads})
    trial_seeds = [harness.derive_seed(config.seed, 0, m) for m in config.m_values]
    _echo(args, resolved=config.dumps(), trial0_seeds=trial_seeds)
    result = harness.run_config(config)
    _write(result.to_csv(), args.out)
    if args.verbose:
        print(f"{len(result.rows)} rows", file=sys.stderr)
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    _echo(args)
    results = verify.run_checks(mutate_kl=args.mutate_kl)
    for r in results:
        print(r.line())
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_NUMERICAL if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="choice-rank", description="Top-K ranking from discrete choice data.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--threads", type=int, default=None, help="worker cap (default: $CHOICE_RANK_THREADS or 1)")
        p.add_argument("--verbose", action="store_true", help="print a row counter to stderr")

    p = sub.add_parser("simulate", help="sample a choice dataset")
    _add_model_flags(p)
    p.add_argument("--m", type=int, required=True, help="menu size")
    p.add_argument("--p", type=float, required=True, help="per-round offer probability of each menu")
    p.add_argument("--R", type=int, required=True, help="number of rounds")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--allow-large", action="store_true", help="lift the R*C(n,m) guard")
    p.add_argument("--out", type=Path, help="output file (default stdout)")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("rank", help="score items with one ranker")
    p.add_argument("--algorithm", choices=sorted(ALGORITHMS), required=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", type=Path, help="dataset file")
    src.add_argument("--tabular", type=Path, help="tabular model file, read as exact probabilities")
    p.add_argument("--K", type=int, help="also print the top-K items, best first")
    p.add_argument("--out", type=Path, help="scores CSV (default stdout)")
    common(p)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("theory", help="gaps, complexity factors and sample-size bounds")
    _add_model_flags(p)
    p.add_argument("--m", type=_ints, required=True, help="menu sizes, e.g. 2-8 or 2,4")
    p.add_argument("--K", type=_ints, required=True)
    p.add_argument("--h", type=int, default=0, help="slack for the approximate-recovery bound")
    p.add_argument("--index-rule", choices=["K-h", "K-h-1"], default="K-h")
    p.add_argument("--mc-menus", type=int, default=2000, help="menus per item for non-MNL noise")
    p.add_argument("--mc-draws", type=int, default=20, help="choices per sampled menu")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path)
    common(p)
    p.set_defaults(func=cmd_theory)

    p = sub.add_parser("ingest", help="turn a ranking corpus into a tabular model and ground truth")
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--out-model", type=Path)
    p.add_argument("--out-truth", type=Path)
    common(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("experiment", help="run a top-K recovery experiment from a config file")
    p.add_argument("--config", type=Path, required=True)
    p.add_argument("--out", type=Path)
    common(p)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("verify", help="run the identity self-checks")
    p.add_argument("--mutate-kl", action="store_true", help=argparse.SUPPRESS)
    common(p)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ChoiceRankError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
