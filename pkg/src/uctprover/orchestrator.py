"""
Corpus runs, the prove/collect/train loop and the baseline comparison.

All artifacts of a loop live in one experiment directory keyed by the config digest.
Problems are the unit of parallelism; each gets its own seed, so the worker count
never changes results.
"""
import csv
import glob
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import List

from .bridge import train_external
from .config import (
    MODE_BARE,
    MODE_UCT,
    MODE_UCT_POLICY,
    MODE_UCT_POLICY_VALUE,
    MODE_UCT_VALUE,
    RunConfig,
)
from .deepening import MODE_DEEPENING, prove_iterative_deepening
from .errors import ConfigurationError, TrainingError, UctProverError
from .learning import (
    KIND_POLICY,
    KIND_VALUE,
    export_examples,
    import_examples,
    save_model,
    train,
)
from .problem import load_problem
from .search import STATUS_ERROR, Models, ProofResult, collect_examples, problem_seed, prove
from .tableau import ACTION_STRIDE, MAX_LITERALS

logger = logging.getLogger(__name__)

SPLIT_TRAIN = "train"
SPLIT_TEST = "test"
PROBLEM_PATTERNS = ("*.p", "*.cnf", "*.tptp")

BASELINE_COLUMNS = (MODE_DEEPENING, MODE_BARE, MODE_UCT)


@dataclass(frozen=True)
class CorpusEntry:
    problem: str
    path: str
    split: str = SPLIT_TRAIN


@dataclass(frozen=True)
class Corpus:
    """
    Ordered problem list with a train/test assignment.

    Attributes:
        entries (tuple): CorpusEntry per problem, in corpus order.
        seed (int): Master seed the split was drawn with.
        split_active (bool): True once split_corpus assigned a test set.
    """
    entries: tuple
    seed: int = 0
    split_active: bool = False

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def in_split(self, split):
        return [entry for entry in self.entries if entry.split == split]

    @classmethod
    def from_paths(cls, paths):
        entries = [CorpusEntry(os.path.splitext(os.path.basename(path))[0], path) for path in paths]
        names = [entry.problem for entry in entries]
        if len(set(names)) != len(names):
            raise ConfigurationError("problem ids in a corpus must be unique")
        return cls(tuple(entries))

    @classmethod
    def load(cls, location):
        """
        A corpus is a directory of problem files (sorted by name) or a text file
        listing one problem path per line, relative to the list file.
        """
        if os.path.isdir(location):
            paths = sorted({path for pattern in PROBLEM_PATTERNS
                            for path in glob.glob(os.path.join(location, pattern))})
            return cls.from_paths(paths)
        try:
            with open(location, "r") as handle:
                lines = [line.strip() for line in handle]
        except OSError as e:
            raise ConfigurationError(f"cannot read corpus {location}: {e}") from None
        base = os.path.dirname(os.path.abspath(location))
        paths = [os.path.join(base, line) for line in lines if line and not line.startswith("#")]
        return cls.from_paths(paths)


def split_corpus(corpus, test_fraction, seed=0):
    """
    Assign round(test_fraction * n) problems to the test split.

    Problems are ranked by a hash of (seed, problem id); the lowest ranks go to test.
    """
    if not len(corpus):
        raise ConfigurationError("cannot split an empty corpus")
    if not 0.0 < test_fraction < 1.0:
        raise ConfigurationError("test fraction must lie strictly between 0 and 1")
    count = int(round(test_fraction * len(corpus)))
    ranked = sorted(corpus.entries, key=lambda entry: (problem_seed(seed, entry.problem), entry.problem))
    test = {entry.problem for entry in ranked[:count]}
    entries = tuple(CorpusEntry(entry.problem, entry.path, SPLIT_TEST if entry.problem in test else SPLIT_TRAIN)
                    for entry in corpus.entries)
    logger.info("Split %d problems into %d train / %d test", len(entries), len(entries) - count, count)
    return Corpus(entries, seed, True)


@dataclass
class CorpusRun:
    results: List[ProofResult]
    policy_examples: list = field(default_factory=list)
    value_examples: list = field(default_factory=list)

    def solved(self, split=None, corpus=None):
        if split is None:
            return sum(result.proved for result in self.results)
        members = {entry.problem for entry in corpus.in_split(split)}
        return sum(result.proved for result in self.results if result.problem in members)


_worker_models = Models()
_worker_config = None


def _limit_memory(megabytes):
    if not megabytes:
        return
    try:
        import resource
    except ImportError:
        logger.warning("Memory limit requested but not supported on this platform")
        return
    limit = int(megabytes) * 1024 * 1024
    resource.setrlimit(resource.RLIMIT_AS, (limit, limit))


def _init_worker(models, config):
    global _worker_models, _worker_config
    _worker_models = models
    _worker_config = config
    _limit_memory(config.memory_limit_mb)


def _run_entry(task):
    entry, solver, iteration, collect = task
    config = _worker_config
    seed = problem_seed(config.seed, entry.problem)
    mode = MODE_DEEPENING if solver == MODE_DEEPENING else config.mode
    try:
        problem = load_problem(entry.path)
        if solver == MODE_DEEPENING:
            result = prove_iterative_deepening(problem, config, seed)
        else:
            result = prove(problem, _worker_models, config, seed)
    except (UctProverError, OSError, MemoryError, RecursionError) as e:
        logger.error("Problem %s failed: %s", entry.problem, e)
        return ProofResult(entry.problem, mode, seed, STATUS_ERROR, error=str(e)), [], []
    result.problem = entry.problem
    policy, value = [], []
    if collect:
        policy, value = collect_examples(result.history, result, entry.problem, iteration, config.discount)
    result.history = []
    return result, policy, value


def run_corpus(corpus, models=None, config=None, iteration=0, solver="search", collect=True):
    """
    Prove every problem of the corpus.

    :param models: Models pair handed to every search.
    :param solver: "search" for MCTS in ``config.mode`` or "deepening" for the baseline.
    :param collect: Collect training examples; test-split problems never contribute.
    :return: CorpusRun with results in corpus order.
    """
    global _worker_models, _worker_config
    models = models or Models()
    config = config or RunConfig()
    tasks = [(entry, solver, iteration, collect and entry.split == SPLIT_TRAIN) for entry in corpus.entries]
    if config.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=config.workers, initializer=_init_worker,
                                 initargs=(models, config)) as executor:
            outcomes = list(executor.map(_run_entry, tasks))
    else:
        saved = _worker_models, _worker_config
        _worker_models, _worker_config = models, config
        try:
            outcomes = [_run_entry(task) for task in tasks]
        finally:
            _worker_models, _worker_config = saved
    run = CorpusRun([result for result, _, _ in outcomes])
    for _, policy, value in outcomes:
        run.policy_examples.extend(policy)
        run.value_examples.extend(value)
    logger.info("Corpus run: %d/%d proved, %d policy and %d value examples", run.solved(), len(run.results),
                len(run.policy_examples), len(run.value_examples))
    return run


def format_results(results):
    return "".join(json.dumps(result.to_record()) + "\n" for result in results)


def write_results(results, path):
    """One JSON object per line, in corpus order."""
    with open(path, "w") as handle:
        handle.write(format_results(results))


@dataclass
class IterationReport:
    iteration: int
    mode: str
    solved: dict
    attempted: dict
    inferences: int
    errors: int
    examples: dict = field(default_factory=dict)
    models: dict = field(default_factory=dict)
    results: str = None
    config: dict = field(default_factory=dict)
    encoding: dict = field(default_factory=lambda: {"action_stride": ACTION_STRIDE, "max_literals": MAX_LITERALS})

    CSV_FIELDS = ("iteration", "mode", "solved_train", "solved_test", "solved_total",
                  "attempted_total", "inferences", "errors", "policy_model", "value_model")

    def to_row(self):
        return {
            "iteration": self.iteration,
            "mode": self.mode,
            "solved_train": self.solved[SPLIT_TRAIN],
            "solved_test": self.solved[SPLIT_TEST],
            "solved_total": self.solved["total"],
            "attempted_total": self.attempted["total"],
            "inferences": self.inferences,
            "errors": self.errors,
            "policy_model": self.models.get(KIND_POLICY) or "",
            "value_model": self.models.get(KIND_VALUE) or "",
        }


def _report(iteration, mode, corpus, run):
    solved, attempted = {}, {}
    for split in (SPLIT_TRAIN, SPLIT_TEST):
        members = {entry.problem for entry in corpus.in_split(split)}
        solved[split] = sum(r.proved for r in run.results if r.problem in members)
        attempted[split] = len(members)
    solved["total"] = solved[SPLIT_TRAIN] + solved[SPLIT_TEST]
    attempted["total"] = attempted[SPLIT_TRAIN] + attempted[SPLIT_TEST]
    return IterationReport(iteration=iteration, mode=mode, solved=solved, attempted=attempted,
                           inferences=sum(r.inferences for r in run.results),
                           errors=sum(r.status == STATUS_ERROR for r in run.results))


def write_reports(reports, path):
    """
    Write the CSV table to ``path`` and every report field, the run configuration
    included, as JSON lines to the same name with a ``.jsonl`` suffix.
    """
    with open(path, "w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=IterationReport.CSV_FIELDS, lineterminator="\n")
        writer.writeheader()
        for report in reports:
            writer.writerow(report.to_row())
    with open(os.path.splitext(path)[0] + ".jsonl", "w") as handle:
        for report in reports:
            handle.write(json.dumps(asdict(report), sort_keys=True) + "\n")


def _guided_mode(mode, policy, value):
    """The requested mode reduced to the models that are actually available."""
    wants_policy = mode in (MODE_UCT_POLICY, MODE_UCT_POLICY_VALUE) and policy is not None
    wants_value = mode in (MODE_UCT_VALUE, MODE_UCT_POLICY_VALUE) and value is not None
    if wants_policy and wants_value:
        return MODE_UCT_POLICY_VALUE
    if wants_policy:
        return MODE_UCT_POLICY
    if wants_value:
        return MODE_UCT_VALUE
    return mode if mode == MODE_BARE else MODE_UCT


class _ExampleStore:
    """Per-iteration example files; training reads the concatenation of a window of them."""

    def __init__(self, directory, window=0):
        self.directory = directory
        self.window = window
        os.makedirs(directory, exist_ok=True)

    def path(self, kind, iteration):
        return os.path.join(self.directory, f"{kind}-{iteration:03d}.examples")

    def add(self, kind, iteration, examples):
        path = self.path(kind, iteration)
        export_examples(examples, path)
        return path

    def load(self, kind, before):
        first = max(0, before - self.window) if self.window else 0
        examples = []
        for iteration in range(first, before):
            path = self.path(kind, iteration)
            if os.path.exists(path):
                examples.extend(import_examples(path, kind))
        return examples


def _train_kind(kind, examples, config, model_dir, iteration):
    if not examples:
        logger.warning("No %s examples before iteration %d; keeping the previous %s model", kind, iteration, kind)
        return None, None
    if config.bridge_command:
        workdir = os.path.join(model_dir, f"bridge-{iteration:03d}")
        model = train_external(examples, kind, config.bridge_command, workdir, config.bridge_settings)
    else:
        model = train(examples, config.regularization, config.max_epochs, config.tolerance)
    path = os.path.join(model_dir, f"{kind}-{iteration:03d}.model")
    save_model(model, path)
    return model, path


def rl_loop(corpus, iterations, config, directory=None, policy_override=None, value_override=None):
    """
    Prove, collect and retrain for ``iterations`` rounds.

    Iteration 0 is unguided (uct mode). Every later iteration trains the models its
    mode needs on the examples of all earlier iterations, then runs guided. When
    overrides are given they replace the trained models in the last iteration.

    :return: List of IterationReport; the CSV table is rewritten after every iteration.
    :raises TrainingError: After the reports so far have been written.
    """
    if iterations < 1:
        raise ConfigurationError("the loop needs at least one iteration")
    directory = directory or os.path.join(config.output, config.digest())
    model_dir = os.path.join(directory, "models")
    os.makedirs(model_dir, exist_ok=True)
    with open(os.path.join(directory, "config.yml"), "w") as handle:
        handle.write(config.dump())
    store = _ExampleStore(os.path.join(directory, "examples"), config.window)
    report_path = os.path.join(directory, "report.csv")
    logger.info("Experiment directory %s", directory)

    reports = []
    policy = value = None
    for iteration in range(iterations):
        model_paths = {}
        try:
            if iteration > 0 and config.uses_policy:
                trained, path = _train_kind(KIND_POLICY, store.load(KIND_POLICY, iteration), config,
                                            model_dir, iteration)
                if trained is not None:
                    policy, model_paths[KIND_POLICY] = trained, path
            if iteration > 0 and config.uses_value:
                trained, path = _train_kind(KIND_VALUE, store.load(KIND_VALUE, iteration), config,
                                            model_dir, iteration)
                if trained is not None:
                    value, model_paths[KIND_VALUE] = trained, path
        except TrainingError:
            write_reports(reports, report_path)
            raise
        if iteration == iterations - 1 and iteration > 0:
            if policy_override is not None:
                policy, model_paths[KIND_POLICY] = policy_override, "override"
            if value_override is not None:
                value, model_paths[KIND_VALUE] = value_override, "override"

        mode = MODE_UCT if iteration == 0 else _guided_mode(config.mode, policy, value)
        run_config = config.replace(mode=mode)
        run = run_corpus(corpus, Models(policy, value), run_config, iteration)
        results_path = os.path.join(directory, f"results-{iteration:03d}.jsonl")
        write_results(run.results, results_path)

        report = _report(iteration, mode, corpus, run)
        report.models = model_paths
        report.results = results_path
        report.config = run_config.to_mapping()
        report.examples = {KIND_POLICY: store.add(KIND_POLICY, iteration, run.policy_examples),
                           KIND_VALUE: store.add(KIND_VALUE, iteration, run.value_examples)}
        reports.append(report)
        write_reports(reports, report_path)
        logger.info("Iteration %d (%s): %d train / %d test proved", iteration, mode,
                    report.solved[SPLIT_TRAIN], report.solved[SPLIT_TEST])
    return reports


def evaluate_baselines(corpus, config):
    """
    Solved counts of iterative deepening, bare and uct search at equal budgets.

    :return: Mapping row name ("train", "test", "total") to a mapping column to count.
    """
    table = {SPLIT_TRAIN: {}, SPLIT_TEST: {}, "total": {}}
    for column in BASELINE_COLUMNS:
        if column == MODE_DEEPENING:
            run = run_corpus(corpus, None, config, solver=MODE_DEEPENING, collect=False)
        else:
            run = run_corpus(corpus, None, config.replace(mode=column), collect=False)
        for split in (SPLIT_TRAIN, SPLIT_TEST):
            table[split][column] = run.solved(split, corpus)
        table["total"][column] = table[SPLIT_TRAIN][column] + table[SPLIT_TEST][column]
    return table


def format_table(table):
    """Plain-text comparison table, one row per split."""
    header = ["split"] + list(BASELINE_COLUMNS)
    rows = [header] + [[row] + [str(table[row][column]) for column in BASELINE_COLUMNS]
                       for row in (SPLIT_TRAIN, SPLIT_TEST, "total")]
    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
    return "\n".join("  ".join(cell.rjust(width) for cell, width in zip(row, widths)) for row in rows) + "\n"
