import argparse
import logging
import os
import sys

from .checker import explain_proof, read_proof, write_proof
from .config import DEFAULT_CONFIG_NAME, MODES, configure_logging, load_config
from .deepening import MODE_DEEPENING, prove_iterative_deepening
from .errors import UctProverError
from .learning import (
    KIND_POLICY,
    KIND_VALUE,
    MODEL_KINDS,
    evaluate_model,
    export_examples,
    import_examples,
    load_model,
    save_model,
    train,
)
from .orchestrator import (
    Corpus,
    SPLIT_TEST,
    SPLIT_TRAIN,
    evaluate_baselines,
    format_results,
    format_table,
    rl_loop,
    run_corpus,
    split_corpus,
)
from .problem import load_problem
from .search import Models, Prover, problem_seed
from .tableau import TableauState

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_NOT_PROVED = 1
EXIT_ERROR = 2


def _search_options(parser):
    parser.add_argument("--mode", choices=MODES + (MODE_DEEPENING,), help="search strategy")
    parser.add_argument("--budget", type=int, help="inference budget per problem")
    parser.add_argument("--playouts", type=int, help="playouts per bigstep")
    parser.add_argument("--seed", type=int, help="master seed")
    parser.add_argument("--workers", type=int, help="parallel worker processes")


def build_parser():
    parser = argparse.ArgumentParser(prog="uctprover", description="Monte-Carlo guided connection tableau prover")
    parser.add_argument("--config", help=f"YAML configuration file (default: ./{DEFAULT_CONFIG_NAME} if present)")
    parser.add_argument("--log-level", help="override general.logging.level")
    commands = parser.add_subparsers(dest="command", required=True)

    command = commands.add_parser("prove", help="prove one problem file")
    command.add_argument("problem")
    _search_options(command)
    command.add_argument("--policy", help="policy model file")
    command.add_argument("--value", help="value model file")
    command.add_argument("--proof", help="write the proof to this file")

    command = commands.add_parser("run", help="prove every problem of a corpus, JSON lines on stdout")
    command.add_argument("corpus")
    _search_options(command)
    command.add_argument("--policy", help="policy model file")
    command.add_argument("--value", help="value model file")
    command.add_argument("--output", help="write the results here instead of stdout")

    command = commands.add_parser("baseline", help="compare iterative deepening, bare and uct search")
    command.add_argument("corpus")
    _search_options(command)
    command.add_argument("--test-frac", type=float, help="fraction of problems held out as test set")

    command = commands.add_parser("loop", help="run the prove/train loop")
    command.add_argument("corpus")
    _search_options(command)
    command.add_argument("--iters", type=int, default=3, help="number of iterations")
    command.add_argument("--test-frac", type=float, help="fraction of problems held out as test set")
    command.add_argument("--directory", help="experiment directory (default: keyed by the config digest)")
    command.add_argument("--policy", help="policy model used instead of the trained one in the last iteration")
    command.add_argument("--value", help="value model used instead of the trained one in the last iteration")

    command = commands.add_parser("split", help="print the train/test assignment of a corpus")
    command.add_argument("corpus")
    command.add_argument("--test-frac", type=float, required=True)
    command.add_argument("--seed", type=int)

    command = commands.add_parser("check", help="verify a proof file against a problem")
    command.add_argument("problem")
    command.add_argument("proof")

    command = commands.add_parser("export-data", help="run a corpus once and write its training examples")
    command.add_argument("corpus")
    command.add_argument("--out", required=True, help="output directory")
    _search_options(command)
    command.add_argument("--policy", help="policy model file")
    command.add_argument("--value", help="value model file")

    command = commands.add_parser("train", help="train a linear model on an example file")
    command.add_argument("examples")
    command.add_argument("--kind", choices=MODEL_KINDS, required=True)
    command.add_argument("--out", required=True, help="model file to write")
    command.add_argument("--test", help="held-out example file to report the RMSE on")
    command.add_argument("--regularization", type=float)
    return parser


def _config(args):
    path = args.config
    if path is None and os.path.exists(DEFAULT_CONFIG_NAME):
        path = DEFAULT_CONFIG_NAME
    config = load_config(path)
    overrides = {
        "log_level": args.log_level,
        "mode": getattr(args, "mode", None) if getattr(args, "mode", None) != MODE_DEEPENING else None,
        "budget": getattr(args, "budget", None),
        "playouts": getattr(args, "playouts", None),
        "seed": getattr(args, "seed", None),
        "workers": getattr(args, "workers", None),
        "test_fraction": getattr(args, "test_frac", None),
        "regularization": getattr(args, "regularization", None),
    }
    return config.replace(**overrides)


def _models(args):
    policy = load_model(args.policy) if getattr(args, "policy", None) else None
    value = load_model(args.value) if getattr(args, "value", None) else None
    return Models(policy, value)


def _corpus(args, config):
    corpus = Corpus.load(args.corpus)
    if config.test_fraction:
        corpus = split_corpus(corpus, config.test_fraction, config.seed)
    return corpus


def command_prove(args, config):
    problem = load_problem(args.problem)
    seed = problem_seed(config.seed, problem.name)
    if args.mode == MODE_DEEPENING:
        result = prove_iterative_deepening(problem, config, seed)
        substitution = []
    else:
        prover = Prover(problem, config, _models(args), seed)
        result = prover.run()
        substitution = []
        if result.proved:
            replay = TableauState(problem)
            for action in result.actions:
                replay.apply_action(action)
            substitution = replay.describe_substitution()
    print(f"% {problem.name}: {result.status} ({result.inferences} inferences, "
          f"{result.playouts} playouts, {result.bigsteps} bigsteps)")
    if result.proved:
        if args.proof:
            write_proof(args.proof, problem, result.actions, substitution)
        else:
            for action in result.actions:
                print(action)
        return EXIT_OK
    return EXIT_NOT_PROVED


def command_run(args, config):
    corpus = _corpus(args, config)
    run = run_corpus(corpus, _models(args), config, collect=False,
                     solver=MODE_DEEPENING if args.mode == MODE_DEEPENING else "search")
    text = format_results(run.results)
    if args.output:
        with open(args.output, "w") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK if run.solved() == len(run.results) else EXIT_NOT_PROVED


def command_baseline(args, config):
    table = evaluate_baselines(_corpus(args, config), config)
    sys.stdout.write(format_table(table))
    return EXIT_OK


def command_loop(args, config):
    models = _models(args)
    reports = rl_loop(_corpus(args, config), args.iters, config, args.directory, models.policy, models.value)
    for report in reports:
        print(f"iteration {report.iteration} ({report.mode}): {report.solved['total']}/{report.attempted['total']} "
              f"proved ({report.solved[SPLIT_TRAIN]} train, {report.solved[SPLIT_TEST]} test)")
    return EXIT_OK


def command_split(args, config):
    corpus = split_corpus(Corpus.load(args.corpus), args.test_frac, config.seed)
    for entry in corpus:
        print(f"{entry.split}\t{entry.problem}\t{entry.path}")
    return EXIT_OK


def command_check(args, config):
    problem = load_problem(args.problem)
    diagnostic = explain_proof(problem, read_proof(args.proof))
    if diagnostic is None:
        print(f"% {problem.name}: proof verified")
        return EXIT_OK
    print(f"% {problem.name}: proof rejected: {diagnostic}")
    return EXIT_NOT_PROVED


def command_export_data(args, config):
    run = run_corpus(_corpus(args, config), _models(args), config)
    os.makedirs(args.out, exist_ok=True)
    export_examples(run.policy_examples, os.path.join(args.out, f"{KIND_POLICY}.examples"))
    export_examples(run.value_examples, os.path.join(args.out, f"{KIND_VALUE}.examples"))
    print(f"% {len(run.policy_examples)} policy and {len(run.value_examples)} value examples written to {args.out}")
    return EXIT_OK


def command_train(args, config):
    examples = import_examples(args.examples, args.kind)
    model = train(examples, config.regularization, config.max_epochs, config.tolerance)
    save_model(model, args.out)
    print(f"train RMSE {evaluate_model(model, examples):.6f} on {len(examples)} examples")
    if args.test:
        held_out = import_examples(args.test, args.kind)
        print(f"test RMSE {evaluate_model(model, held_out):.6f} on {len(held_out)} examples")
    return EXIT_OK


COMMANDS = {
    "prove": command_prove,
    "run": command_run,
    "baseline": command_baseline,
    "loop": command_loop,
    "split": command_split,
    "check": command_check,
    "export-data": command_export_data,
    "train": command_train,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        config = _config(args)
        configure_logging(config)
        return COMMANDS[args.command](args, config)
    except UctProverError as e:
        logger.error("%s", e)
        return EXIT_ERROR
    except OSError as e:
        logger.error("%s", e)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
