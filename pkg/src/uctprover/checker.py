"""
Independent proof checker.

Replays an action sequence with its own renaming, unifier and goal bookkeeping, so a
defect in the search-side tableau cannot vouch for itself.
"""
import logging

from .errors import ProofFormatError
from .syntax import Fn, Var, format_literal
from .tableau import ACTION_EXTENSION, ACTION_REDUCTION, ACTION_START, Action

logger = logging.getLogger(__name__)


def _walk(term, sigma):
    while isinstance(term, Var) and term.index in sigma:
        term = sigma[term.index]
    return term


def _substitute(term, sigma):
    term = _walk(term, sigma)
    if isinstance(term, Var):
        return term
    return Fn(term.symbol, tuple(_substitute(arg, sigma) for arg in term.args))


def _contains(index, term, sigma):
    term = _walk(term, sigma)
    if isinstance(term, Var):
        return term.index == index
    return any(_contains(index, arg, sigma) for arg in term.args)


def _mgu(left, right, sigma):
    """Recursive Robinson unification; returns an extended copy of ``sigma`` or None."""
    left = _walk(left, sigma)
    right = _walk(right, sigma)
    if isinstance(left, Var) and isinstance(right, Var) and left.index == right.index:
        return sigma
    if isinstance(left, Var):
        if _contains(left.index, right, sigma):
            return None
        return {**sigma, left.index: right}
    if isinstance(right, Var):
        return _mgu(right, left, sigma)
    if left.symbol != right.symbol or len(left.args) != len(right.args):
        return None
    for a, b in zip(left.args, right.args):
        sigma = _mgu(a, b, sigma)
        if sigma is None:
            return None
    return sigma


def _connect(goal, partner, sigma):
    if goal.positive == partner.positive or goal.predicate != partner.predicate:
        return None
    for a, b in zip(goal.args, partner.args):
        sigma = _mgu(a, b, sigma)
        if sigma is None:
            return None
    return sigma


def _fresh(literal, base):
    def copy(term):
        if isinstance(term, Var):
            return Var(base + term.index)
        return Fn(term.symbol, tuple(copy(arg) for arg in term.args))
    return literal._replace(args=tuple(copy(arg) for arg in literal.args))


def explain_proof(problem, actions):
    """
    Replay ``actions`` and report why they do not form a closed tableau.

    :return: None when the actions are a proof, otherwise a diagnostic string.
    """
    actions = [Action.decode(a) if isinstance(a, int) else a for a in actions]
    if not actions:
        return "empty action sequence"
    first = actions[0]
    if first.kind != ACTION_START:
        return "the first action is not a start step"
    if first.clause not in problem.start_clause_indices:
        return f"clause {first.clause} is not a start clause"
    sigma = {}
    connections = []
    base = 0
    start = problem.clauses[first.clause]
    open_goals = [(_fresh(lit, base), ()) for lit in reversed(start.literals)]
    base += start.var_count + 1
    for step, action in enumerate(actions[1:], start=2):
        if not open_goals:
            return f"step {step} ({action}): the tableau is already closed"
        goal, path = open_goals.pop()
        if action.kind == ACTION_REDUCTION:
            if not 0 <= action.position < len(path):
                return f"step {step} ({action}): path has only {len(path)} literals"
            partner = path[action.position]
            sigma = _connect(goal, partner, sigma)
            if sigma is None:
                return f"step {step} ({action}): {format_literal(goal)} does not connect to the path"
            connections.append((goal, partner))
        elif action.kind == ACTION_EXTENSION:
            if not 0 <= action.clause < len(problem.clauses):
                return f"step {step} ({action}): no clause {action.clause}"
            clause = problem.clauses[action.clause]
            if not 0 <= action.literal < len(clause.literals):
                return f"step {step} ({action}): clause {action.clause} has no literal {action.literal}"
            copies = [_fresh(lit, base) for lit in clause.literals]
            base += clause.var_count + 1
            partner = copies[action.literal]
            sigma = _connect(goal, partner, sigma)
            if sigma is None:
                return f"step {step} ({action}): {format_literal(goal)} does not connect to the clause"
            connections.append((goal, partner))
            branch = path + (goal,)
            for index in reversed(range(len(copies))):
                if index != action.literal:
                    open_goals.append((copies[index], branch))
        else:
            return f"step {step} ({action}): only one start step is allowed"
    if open_goals:
        remaining = ", ".join(format_literal(g) for g, _ in reversed(open_goals))
        return f"{len(open_goals)} goals remain open: {remaining}"
    for goal, partner in connections:
        left = [_substitute(a, sigma) for a in goal.args]
        right = [_substitute(a, sigma) for a in partner.args]
        if left != right:
            return f"connection {format_literal(goal)} / {format_literal(partner)} is not complementary"
    return None


def check_proof(problem, actions):
    """
    :return: True iff ``actions`` replayed from the empty tableau close it.
    """
    diagnostic = explain_proof(problem, actions)
    if diagnostic is not None:
        logger.warning("Proof rejected for '%s': %s", problem.name or "<problem>", diagnostic)
        return False
    return True


def format_proof(problem, actions, substitution_lines=()):
    """Text form of a proof: one decoded action per line, the substitution as % comments."""
    lines = [f"% proof of {problem.name or '<problem>'}: {len(actions)} inferences"]
    lines.extend(str(action) for action in actions)
    lines.extend(f"% {line}" for line in substitution_lines)
    return "\n".join(lines) + "\n"


def parse_proof(text):
    """
    :raises ProofFormatError: With the number of the first line that is not an action.
    """
    actions = []
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if line and not line.startswith("%"):
            try:
                actions.append(Action.parse(line))
            except ValueError as e:
                raise ProofFormatError(str(e), number) from None
    return actions


def write_proof(path, problem, actions, substitution_lines=()):
    with open(path, "w") as handle:
        handle.write(format_proof(problem, actions, substitution_lines))


def read_proof(path):
    with open(path, "r") as handle:
        return parse_proof(handle.read())
