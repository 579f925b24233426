import logging
import time

from .checker import check_proof
from .config import RunConfig
from .errors import UnsoundProofError
from .search import STATUS_BUDGET, STATUS_DEAD_ROOT, STATUS_PROVED, ProofResult
from .tableau import ACTION_EXTENSION, TableauState

logger = logging.getLogger(__name__)

MODE_DEEPENING = "deepening"


class _Exhausted(Exception):
    pass


class DepthBoundedSearch:
    """
    Backtracking connection search with a bound on extension steps.

    An extension may only be applied to a goal whose active path is shorter than the
    current limit; reductions are always allowed. The search is iterative, one frame
    per tableau on the current branch.
    """

    def __init__(self, problem, budget):
        self.problem = problem
        self.budget = budget
        self.state = TableauState(problem)
        self.inferences = 0
        self.blocked = False

    def _actions(self, limit):
        state = self.state
        if not state.started:
            return state.applicable_actions()
        if len(state.current_goal.path) < limit:
            return state.applicable_actions()
        actions = state.applicable_actions()
        bounded = [action for action in actions if action.kind != ACTION_EXTENSION]
        if len(bounded) < len(actions):
            self.blocked = True
        return bounded

    def attempt(self, limit):
        """
        Exhaust the tableaux within ``limit``.

        :return: The proof actions, or None when no proof fits the limit.
        """
        state = self.state
        stack = [[state.mark(), self._actions(limit), 0]]
        while stack:
            frame = stack[-1]
            mark, actions, index = frame
            if index >= len(actions):
                stack.pop()
                continue
            frame[2] = index + 1
            state.undo_to(mark)
            if self.inferences >= self.budget:
                raise _Exhausted()
            state.apply_action(actions[index])
            self.inferences += 1
            if state.closed:
                return state.applied_actions
            stack.append([state.mark(), self._actions(limit), 0])
        state.undo_to((0, 0))
        return None


def prove_iterative_deepening(problem, config=None, seed=0):
    """
    Complete baseline: depth-bounded search with limits 1, 2, 3, ...

    :return: ProofResult with ``depth`` set to the limit of the proof. The status is
        ``dead_root`` when a whole pass ran without ever hitting the limit.
    """
    config = config or RunConfig()
    started = time.perf_counter()
    search = DepthBoundedSearch(problem, config.budget)
    limit = 0
    proof = None
    status = STATUS_BUDGET
    try:
        while True:
            limit += 1
            search.blocked = False
            search.state.undo_to((0, 0))
            proof = search.attempt(limit)
            if proof is not None:
                status = STATUS_PROVED
                break
            logger.debug("%s: no proof within depth %d (%d inferences)", problem.name, limit, search.inferences)
            if not search.blocked:
                status = STATUS_DEAD_ROOT
                break
    except _Exhausted:
        status = STATUS_BUDGET
    result = ProofResult(problem=problem.name, mode=MODE_DEEPENING, seed=seed, status=status,
                         actions=list(proof) if proof is not None else [], inferences=search.inferences,
                         depth=limit if status == STATUS_PROVED else None,
                         wall_time=time.perf_counter() - started if config.timing else None)
    if result.proved and not check_proof(problem, result.actions):
        raise UnsoundProofError(f"invalid proof for {problem.name}")
    logger.info("%s: %s by iterative deepening after %d inferences (depth %d)", problem.name or "<problem>",
                status, result.inferences, limit)
    return result
