from typing import NamedTuple

from .errors import InapplicableActionError, StaleMarkError
from .syntax import Fn, Literal, Var, format_literal, format_term, rename_literal

# Action variants
ACTION_START = 0
ACTION_EXTENSION = 1
ACTION_REDUCTION = 2

# Encoding strides: tag * ACTION_STRIDE + clause * MAX_LITERALS + literal
ACTION_STRIDE = 1 << 40
MAX_LITERALS = 1 << 16

_ACTION_NAMES = {ACTION_START: "start", ACTION_EXTENSION: "ext", ACTION_REDUCTION: "red"}
_ACTION_KINDS = {name: kind for kind, name in _ACTION_NAMES.items()}


class Action(NamedTuple):
    """
    One inference. ``clause``/``literal`` are set for start and extension steps,
    ``position`` (index on the active path, root first) for reductions.
    """
    kind: int
    clause: int = -1
    literal: int = -1
    position: int = -1

    @classmethod
    def start(cls, clause):
        return cls(ACTION_START, clause, 0)

    @classmethod
    def extension(cls, clause, literal):
        return cls(ACTION_EXTENSION, clause, literal)

    @classmethod
    def reduction(cls, position):
        return cls(ACTION_REDUCTION, position=position)

    @property
    def encoding(self):
        if self.kind == ACTION_REDUCTION:
            return ACTION_REDUCTION * ACTION_STRIDE + self.position
        return self.kind * ACTION_STRIDE + self.clause * MAX_LITERALS + self.literal

    @classmethod
    def decode(cls, code):
        kind, rest = divmod(code, ACTION_STRIDE)
        if kind == ACTION_REDUCTION:
            return cls.reduction(rest)
        if kind not in (ACTION_START, ACTION_EXTENSION):
            raise ValueError(f"invalid action encoding {code}")
        clause, literal = divmod(rest, MAX_LITERALS)
        return cls(kind, clause, literal)

    def __str__(self):
        if self.kind == ACTION_REDUCTION:
            return f"red {self.position}"
        if self.kind == ACTION_START:
            return f"start {self.clause}"
        return f"ext {self.clause} {self.literal}"

    @classmethod
    def parse(cls, text):
        parts = text.split()
        kind = _ACTION_KINDS.get(parts[0]) if parts else None
        try:
            if kind == ACTION_START and len(parts) == 2:
                return cls.start(int(parts[1]))
            if kind == ACTION_EXTENSION and len(parts) == 3:
                return cls.extension(int(parts[1]), int(parts[2]))
            if kind == ACTION_REDUCTION and len(parts) == 2:
                return cls.reduction(int(parts[1]))
        except ValueError:
            pass
        raise ValueError(f"malformed action '{text}'")


class Goal(NamedTuple):
    literal: Literal
    path: tuple


class Mark(NamedTuple):
    depth: int
    serial: int


class Substitution:
    """
    Variable bindings with a chronological trail. Binding chains are never cyclic:
    every binding passes the occurs check.

    Attributes:
        bindings (dict): Variable index to the bound term.
        trail (list): Bound variable indices, oldest first.
    """

    __slots__ = ("bindings", "trail")

    def __init__(self):
        self.bindings = {}
        self.trail = []

    def mark(self):
        return len(self.trail)

    def undo(self, mark):
        trail = self.trail
        bindings = self.bindings
        while len(trail) > mark:
            del bindings[trail.pop()]

    def deref(self, term):
        bindings = self.bindings
        while type(term) is Var:
            bound = bindings.get(term.index)
            if bound is None:
                return term
            term = bound
        return term

    def occurs(self, index, term):
        stack = [term]
        while stack:
            term = self.deref(stack.pop())
            if type(term) is Var:
                if term.index == index:
                    return True
            elif term.args:
                stack.extend(term.args)
        return False

    def _bind(self, index, term):
        self.bindings[index] = term
        self.trail.append(index)

    def unify_pairs(self, pairs):
        """
        Unify every (left, right) pair. On failure the bindings made here are undone.

        :return: True on success.
        """
        mark = len(self.trail)
        stack = list(pairs)
        deref = self.deref
        while stack:
            left, right = stack.pop()
            left = deref(left)
            right = deref(right)
            if type(left) is Var:
                if type(right) is Var and right.index == left.index:
                    continue
                if self.occurs(left.index, right):
                    self.undo(mark)
                    return False
                self._bind(left.index, right)
            elif type(right) is Var:
                if self.occurs(right.index, left):
                    self.undo(mark)
                    return False
                self._bind(right.index, left)
            else:
                if left.symbol.id != right.symbol.id or len(left.args) != len(right.args):
                    self.undo(mark)
                    return False
                stack.extend(zip(left.args, right.args))
        return True

    def unify(self, a, b):
        return self.unify_pairs(((a, b),))

    def resolve(self, term):
        term = self.deref(term)
        if type(term) is Var or not term.args:
            return term
        return Fn(term.symbol, tuple(self.resolve(arg) for arg in term.args))

    def resolve_literal(self, literal):
        if not literal.args:
            return literal
        return Literal(literal.positive, literal.predicate, tuple(self.resolve(a) for a in literal.args))

    def complementary(self, a, b):
        """Unify literal ``a`` with the complement of ``b``; bindings are kept on success."""
        if a.positive == b.positive or a.predicate.id != b.predicate.id:
            return False
        return self.unify_pairs(zip(a.args, b.args))


def unify(a, b, subst):
    """
    Unify two terms under ``subst``.

    :return: True on success (bindings stay on the trail); on failure ``subst`` is unchanged.
    """
    return subst.unify(a, b)


class _Step(NamedTuple):
    action: Action
    subst_mark: int
    popped: object
    pushed: int
    next_var: int
    serial: int


class TableauState:
    """
    Mutable connection-tableau proof state with trail-based undo.

    The current goal is the top (last element) of ``goals``. A state is closed once a
    start step was taken and no goal is left open.

    Attributes:
        problem (Problem): The matrix the tableau is built from.
        goals (list): Open goals, current goal last.
        substitution (Substitution): Bindings of the tableau variables.
        next_var (int): First unused variable index; fresh clause copies are offset by it.
    """

    def __init__(self, problem):
        self.problem = problem
        self.goals = []
        self.substitution = Substitution()
        self.next_var = 0
        self._history = []
        self._serial = 0

    @property
    def inference_count(self):
        return len(self._history)

    @property
    def applied_actions(self):
        return [step.action for step in self._history]

    @property
    def open_goal_count(self):
        return len(self.goals)

    @property
    def started(self):
        return bool(self._history)

    @property
    def closed(self):
        return bool(self._history) and not self.goals

    @property
    def current_goal(self):
        return self.goals[-1] if self.goals else None

    def mark(self):
        if not self._history:
            return Mark(0, 0)
        return Mark(len(self._history), self._history[-1].serial)

    def applicable_actions(self, extensions=True):
        """
        All actions applicable to the current goal: reductions by ascending path
        position, then extensions by ascending (clause, literal).

        :param extensions: When False only reductions are enumerated.
        """
        if not self._history:
            return start_actions(self.problem)
        if not self.goals:
            return []
        goal = self.goals[-1]
        literal = goal.literal
        subst = self.substitution
        actions = []
        for position, ancestor in enumerate(goal.path):
            if ancestor.positive != literal.positive and ancestor.predicate.id == literal.predicate.id:
                mark = subst.mark()
                if subst.unify_pairs(zip(literal.args, ancestor.args)):
                    actions.append(Action(ACTION_REDUCTION, position=position))
                    subst.undo(mark)
        if extensions:
            clauses = self.problem.clauses
            offset = self.next_var
            for clause_index, literal_index in self.problem.complementary_candidates(literal):
                candidate = rename_literal(clauses[clause_index].literals[literal_index], offset)
                mark = subst.mark()
                if subst.unify_pairs(zip(literal.args, candidate.args)):
                    actions.append(Action(ACTION_EXTENSION, clause_index, literal_index))
                    subst.undo(mark)
        return actions

    def apply_action(self, action):
        """
        Apply one inference in place and record it for undo.

        :raises InapplicableActionError: If the action does not apply to this state.
        """
        kind = action.kind
        subst = self.substitution
        subst_mark = subst.mark()
        next_var = self.next_var
        if kind == ACTION_START:
            if self._history:
                raise InapplicableActionError("start step on a non-initial tableau")
            clause = self._clause(action.clause)
            literals = [rename_literal(lit, next_var) for lit in clause.literals]
            for literal in reversed(literals):
                self.goals.append(Goal(literal, ()))
            self.next_var = next_var + clause.var_count
            self._record(action, subst_mark, None, len(literals), next_var)
            return self
        if not self.goals:
            raise InapplicableActionError(f"{action} applied without an open goal")
        goal = self.goals[-1]
        if kind == ACTION_REDUCTION:
            if not 0 <= action.position < len(goal.path):
                raise InapplicableActionError(f"{action}: no such path position")
            if not subst.complementary(goal.literal, goal.path[action.position]):
                raise InapplicableActionError(f"{action}: path literal is not complementary")
            self.goals.pop()
            self._record(action, subst_mark, goal, 0, next_var)
            return self
        if kind != ACTION_EXTENSION:
            raise InapplicableActionError(f"unknown action kind {kind}")
        clause = self._clause(action.clause)
        if not 0 <= action.literal < len(clause.literals):
            raise InapplicableActionError(f"{action}: no such literal")
        literals = [rename_literal(lit, next_var) for lit in clause.literals]
        if not subst.complementary(goal.literal, literals[action.literal]):
            raise InapplicableActionError(f"{action}: clause literal is not complementary")
        self.goals.pop()
        path = goal.path + (goal.literal,)
        pushed = 0
        for index in range(len(literals) - 1, -1, -1):
            if index != action.literal:
                self.goals.append(Goal(literals[index], path))
                pushed += 1
        self.next_var = next_var + clause.var_count
        self._record(action, subst_mark, goal, pushed, next_var)
        return self

    def _clause(self, index):
        if not 0 <= index < len(self.problem.clauses):
            raise InapplicableActionError(f"no clause {index}")
        return self.problem.clauses[index]

    def _record(self, action, subst_mark, popped, pushed, next_var):
        self._serial += 1
        self._history.append(_Step(action, subst_mark, popped, pushed, next_var, self._serial))

    def undo_to(self, mark):
        """
        Rewind to a mark taken earlier on this lineage.

        :raises StaleMarkError: If the mark is ahead of the state or from another lineage.
        """
        history = self._history
        depth, serial = mark
        if depth > len(history) or (depth and history[depth - 1].serial != serial) \
                or (not depth and serial):
            raise StaleMarkError(f"mark {mark} does not belong to this tableau lineage")
        goals = self.goals
        while len(history) > depth:
            step = history.pop()
            if step.pushed:
                del goals[-step.pushed:]
            if step.popped is not None:
                goals.append(step.popped)
            self.substitution.undo(step.subst_mark)
            self.next_var = step.next_var
        return self

    def instantiate(self, literal):
        return self.substitution.resolve_literal(literal)

    def snapshot(self):
        """Structural view used to compare states."""
        subst = self.substitution
        return (tuple(self.goals), tuple(sorted(subst.bindings.items())), tuple(subst.trail),
                self.next_var, tuple(self.applied_actions))

    def describe_substitution(self):
        subst = self.substitution
        return [f"X{index} = {format_term(subst.resolve(Var(index)))}" for index in sorted(subst.bindings)]

    def __str__(self):
        goals = ", ".join(format_literal(self.instantiate(goal.literal)) for goal in reversed(self.goals))
        return f"<tableau {self.inference_count} inferences, goals [{goals}]>"


def start_actions(problem):
    """One start action per start clause, in input order."""
    return [Action.start(index) for index in problem.start_clause_indices]


def applicable_actions(state, problem=None):
    return state.applicable_actions()


def apply_action(state, action, problem=None):
    return state.apply_action(action)


def undo_to(state, mark):
    return state.undo_to(mark)
