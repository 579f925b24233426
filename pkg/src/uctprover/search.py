"""
Monte-Carlo tree search over connection tableaux.

One mutable TableauState per search: descents apply actions and rewind with trail
marks; the tree only stores actions and statistics.
"""
import logging
import math
import time
from dataclasses import dataclass, field
from typing import List, NamedTuple

import numpy as np

from .checker import check_proof
from .config import (
    LEAF_BINARY,
    LEAF_CONSTANT,
    MODE_BARE,
    SELECTION_PUCT,
    RunConfig,
)
from .errors import ConfigurationError, UnsoundProofError
from .features import MODE_VALUE, policy_features, state_features
from .learning import (
    KIND_POLICY,
    KIND_VALUE,
    Origin,
    TrainingExample,
    policy_priors,
    policy_target,
    value_estimate,
    value_target,
)
from .syntax import fnv1a_64
from .tableau import TableauState

logger = logging.getLogger(__name__)

STATUS_PROVED = "proved"
STATUS_BUDGET = "budget_exhausted"
STATUS_DEAD_ROOT = "dead_root"
STATUS_ERROR = "error"

NODE_OPEN = "open"
NODE_PROVED = "proved"
NODE_DEAD = "dead_end"


class Models(NamedTuple):
    policy: object = None
    value: object = None


class SearchNode:
    """
    Statistics of one tableau reached from the root by a fixed action sequence.

    ``children`` is None until the node is expanded; afterwards it follows the
    order of ``applicable_actions``.
    """

    __slots__ = ("action", "visits", "reward", "prior", "children", "status", "value")

    def __init__(self, action=None, prior=1.0):
        self.action = action
        self.visits = 0
        self.reward = 0.0
        self.prior = prior
        self.children = None
        self.status = NODE_OPEN
        self.value = 0.0

    @property
    def expanded(self):
        return self.children is not None

    @property
    def encoding(self):
        return -1 if self.action is None else self.action.encoding

    def mean_reward(self):
        return self.reward / self.visits if self.visits else 0.0

    def __repr__(self):
        return f"<SearchNode {self.action} n={self.visits} w={self.reward:.3f} p={self.prior:.3f} {self.status}>"


class BigstepRecord(NamedTuple):
    """Training material captured when a bigstep is committed."""
    position: int
    state_vector: object
    policy_vectors: tuple
    visits: tuple


@dataclass
class ProofResult:
    problem: str
    mode: str
    seed: int
    status: str
    actions: list = field(default_factory=list)
    inferences: int = 0
    playouts: int = 0
    bigsteps: int = 0
    depth: int = None
    wall_time: float = None
    error: str = None
    history: List[BigstepRecord] = field(default_factory=list, repr=False, compare=False)

    @property
    def proved(self):
        return self.status == STATUS_PROVED

    def to_record(self):
        """JSON-lines record; optional fields are omitted when unset."""
        record = {
            "problem": self.problem,
            "mode": self.mode,
            "seed": self.seed,
            "status": self.status,
            "inferences": self.inferences,
            "playouts": self.playouts,
            "bigsteps": self.bigsteps,
        }
        if self.depth is not None:
            record["depth"] = self.depth
        if self.wall_time is not None:
            record["wall_time"] = round(self.wall_time, 6)
            record["ips"] = round(self.inferences / self.wall_time, 1) if self.wall_time > 0 else None
        if self.error is not None:
            record["error"] = self.error
        record["proof"] = [str(action) for action in self.actions]
        return record


def heuristic_value(state, base=0.95):
    """``base`` to the number of open goals; 1 for a closed tableau."""
    return base ** state.open_goal_count


def uct_score(child, parent_visits, exploration):
    if child.visits == 0:
        return math.inf
    return child.reward / child.visits \
        + exploration * child.prior * math.sqrt(math.log(parent_visits) / child.visits)


def puct_score(child, parent_visits, exploration):
    exploit = child.reward / child.visits if child.visits else 0.0
    return exploit + exploration * child.prior * math.sqrt(parent_visits) / (1 + child.visits)


def problem_seed(master_seed, problem_id):
    """Seed of one problem's random stream, derived from the master seed and the problem id."""
    sequence = np.random.SeedSequence([int(master_seed), fnv1a_64(problem_id)])
    return int(sequence.generate_state(1, np.uint64)[0])


class _BudgetExhausted(Exception):
    pass


class _SearchTree:
    """Root anchored at the bigstep tableau plus the committed trail."""

    def __init__(self, root):
        self.root = root
        self.trail = []


class Prover:
    """
    Bigstep MCTS driver for one problem.

    :param problem: Problem to refute.
    :param config: RunConfig; mode, budget and search constants are read from it.
    :param models: Models pair; a model is used only when the mode asks for it.
    :param seed: Seed of the random stream used for uniform descents in bare mode.
    """

    def __init__(self, problem, config=None, models=None, seed=0):
        self.problem = problem
        self.config = config or RunConfig()
        models = models or Models()
        self.policy_model = models.policy if self.config.uses_policy else None
        self.value_model = models.value if self.config.uses_value else None
        if self.config.uses_policy and self.policy_model is None:
            raise ConfigurationError(f"mode {self.config.mode} needs a policy model")
        if self.config.uses_value and self.value_model is None:
            raise ConfigurationError(f"mode {self.config.mode} needs a value model")
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.bare = self.config.mode == MODE_BARE
        self.score = puct_score if self.config.selection == SELECTION_PUCT else uct_score
        self.state = TableauState(problem)
        self.inferences = 0
        self.playouts = 0
        self.proof = None
        self.history = []
        self.last_descent = 0
        self.tree = _SearchTree(SearchNode())
        self.expand(self.tree.root, [self.tree.root])

    # evaluation

    def evaluate(self, state):
        if self.value_model is not None:
            return value_estimate(self.value_model, state, self.problem)
        if self.config.leaf_evaluation == LEAF_BINARY:
            return 0.0
        if self.config.leaf_evaluation == LEAF_CONSTANT:
            return self.config.constant_value
        return heuristic_value(state, self.config.goal_base)

    def expand(self, node, path):
        """Create the children of ``node`` for the current state and evaluate it."""
        state = self.state
        if state.closed:
            node.children = []
            node.status = NODE_PROVED
            node.value = 1.0
            if self.proof is None:
                self.proof = state.applied_actions
            return
        actions = state.applicable_actions()
        if not actions:
            node.children = []
            node.status = NODE_DEAD
            node.value = 0.0
            self._propagate_dead_end(path)
            return
        priors = policy_priors(self.policy_model, state, actions, self.problem, self.config.temperature)
        node.children = [SearchNode(action, prior) for action, prior in zip(actions, priors)]
        node.value = self.evaluate(state)

    @staticmethod
    def _propagate_dead_end(path):
        for ancestor in reversed(path[:-1]):
            if all(child.status == NODE_DEAD for child in ancestor.children):
                ancestor.status = NODE_DEAD
                ancestor.value = 0.0
            else:
                break

    # selection

    def select_child(self, node):
        candidates = [child for child in node.children if child.status != NODE_DEAD]
        if self.bare:
            return candidates[int(self.rng.integers(len(candidates)))]
        exploration = self.config.exploration
        visits = node.visits
        score = self.score
        return max(candidates, key=lambda child: (score(child, visits, exploration), child.prior, -child.encoding))

    def _apply(self, action):
        if self.inferences >= self.config.budget:
            raise _BudgetExhausted()
        self.state.apply_action(action)
        self.inferences += 1

    def playout(self):
        """
        Descend from the root to a new or terminal node, evaluate it and back the
        reward up along the descent path. The state is rewound to the root afterwards.

        :return: The backed-up reward.
        """
        state = self.state
        mark = state.mark()
        limit = self.config.playout_length
        node = self.tree.root
        path = [node]
        applied = 0
        try:
            while True:
                if not node.expanded:
                    self.expand(node, path)
                    if node.status != NODE_OPEN or not limit or applied >= limit:
                        break
                elif node.status != NODE_OPEN or (limit and applied >= limit):
                    break
                node = self.select_child(node)
                self._apply(node.action)
                applied += 1
                path.append(node)
        finally:
            self.last_descent = applied
            state.undo_to(mark)
        reward = node.value
        for visited in path:
            visited.visits += 1
            visited.reward += reward
        self.playouts += 1
        return reward

    def bigstep(self):
        """
        Commit the most visited root child; ties go to the higher mean reward, then
        to the lower action encoding. Bare mode commits a uniformly drawn visited child.

        The record of the committed root is kept only once its inference was applied.

        :return: The committed action, or None when no child was visited.
        """
        root = self.tree.root
        visited = [child for child in root.children if child.visits and child.status != NODE_DEAD]
        if not visited:
            return None
        if self.bare:
            chosen = visited[int(self.rng.integers(len(visited)))]
        else:
            chosen = max(visited, key=lambda child: (child.visits, child.mean_reward(), -child.encoding))
        record = self._record(root)
        self._apply(chosen.action)
        self.history.append(record)
        self.tree.trail.append(chosen.action)
        if not self.config.reuse_tree:
            chosen = SearchNode(chosen.action, chosen.prior)
        self.tree.root = chosen
        if not chosen.expanded:
            self.expand(chosen, [chosen])
        logger.debug("Bigstep %d on %s: %s (n=%d, w/n=%.3f)", len(self.tree.trail), self.problem.name,
                     chosen.action, chosen.visits, chosen.mean_reward())
        return chosen.action

    def _record(self, root):
        children = [child for child in root.children if child.visits]
        vectors = policy_features(self.state, [child.action for child in children], self.problem)
        return BigstepRecord(position=len(self.tree.trail),
                             state_vector=state_features(self.state, MODE_VALUE),
                             policy_vectors=tuple(vectors),
                             visits=tuple(child.visits for child in children))

    def run(self):
        """Alternate ``playouts`` playouts with a bigstep until proved, out of budget or dead."""
        started = time.perf_counter()
        status = STATUS_BUDGET
        try:
            while True:
                if self.tree.root.status == NODE_DEAD:
                    status = STATUS_DEAD_ROOT
                    break
                for _ in range(self.config.playouts):
                    self.playout()
                    if self.proof is not None or self.tree.root.status == NODE_DEAD:
                        break
                if self.proof is not None:
                    status = STATUS_PROVED
                    break
                if self.tree.root.status == NODE_DEAD:
                    status = STATUS_DEAD_ROOT
                    break
                if self.bigstep() is None:
                    status = STATUS_DEAD_ROOT
                    break
                if self.tree.root.status == NODE_PROVED:
                    status = STATUS_PROVED
                    break
        except _BudgetExhausted:
            status = STATUS_BUDGET
        elapsed = time.perf_counter() - started
        result = ProofResult(problem=self.problem.name, mode=self.config.mode, seed=self.seed, status=status,
                             actions=list(self.proof) if status == STATUS_PROVED else [],
                             inferences=self.inferences, playouts=self.playouts,
                             bigsteps=len(self.tree.trail), history=self.history,
                             wall_time=elapsed if self.config.timing else None)
        if result.proved and not check_proof(self.problem, result.actions):
            logger.error("Search produced an invalid proof for %s", self.problem.name)
            raise UnsoundProofError(f"invalid proof for {self.problem.name}: "
                                    + " ".join(str(a) for a in result.actions))
        logger.info("%s: %s after %d inferences, %d playouts, %d bigsteps", self.problem.name or "<problem>",
                    status, result.inferences, result.playouts, result.bigsteps)
        return result


def prove(problem, models=None, config=None, seed=0):
    """
    Search for a closed tableau of ``problem``.

    :param models: Models pair; ignored by modes that do not use learned guidance.
    :param config: RunConfig; defaults apply when omitted.
    :param seed: Seed of the per-problem random stream.
    :return: ProofResult. A proved result always passes the independent checker.
    """
    return Prover(problem, config, models, seed).run()


def collect_examples(history, result, problem_id=None, iteration=0, discount=0.99):
    """
    Training examples of one finished search, taken from its bigstep nodes only.

    Policy targets are ln(n_a / mean n) over the visited children. Value targets are
    the logit of ``discount`` to the remaining proof length on a proved run, of 0 otherwise.

    :return: (policy examples, value examples)
    """
    problem_id = problem_id if problem_id is not None else result.problem
    policy, value = [], []
    proof_length = len(result.actions) if result.proved else None
    for index, record in enumerate(history):
        origin = Origin(problem_id, iteration, index)
        mean = sum(record.visits) / len(record.visits)
        for vector, visits in zip(record.policy_vectors, record.visits):
            policy.append(TrainingExample(vector, policy_target(visits / mean), KIND_POLICY, origin))
        reward = discount ** (proof_length - record.position) if proof_length is not None else 0.0
        value.append(TrainingExample(record.state_vector, value_target(reward), KIND_VALUE, origin))
    return policy, value
