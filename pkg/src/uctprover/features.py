"""
Sparse proof-state and inference features.

Hashed term walks live in ``[0, FEATURE_DIMENSION)``; the abstract tableau features use
the reserved dense slots ``[FEATURE_DIMENSION, FEATURE_SPACE)``.
"""
from collections import Counter

from .syntax import MASK_64, Var, literal_size
from .tableau import ACTION_EXTENSION, ACTION_REDUCTION, ACTION_STRIDE, MAX_LITERALS

# 2**18 - 5
FEATURE_DIMENSION = 262139
ABSTRACT_SLOTS = 16
FEATURE_SPACE = FEATURE_DIMENSION + ABSTRACT_SLOTS
WALK_PRIME = 1000003
WALK_LENGTH = 3
SYMBOL_REDUCTION = 1009

TAG_GOAL = "goal"
TAG_PATH = "path"
TAG_TABLEAU = "tableau"
TAG_ACTION_CLAUSE = "action_clause"
TAG_ACTION_LITERAL = "action_literal"

CONTEXT_SALTS = {
    TAG_GOAL: 0x8771835f58835e90,
    TAG_PATH: 0xbcc4fa1ddd7e2968,
    TAG_TABLEAU: 0x43852340e5e24c8f,
    TAG_ACTION_CLAUSE: 0x0f0a602fe6adf4b3,
    TAG_ACTION_LITERAL: 0x74962f47877ac435,
}
NEGATION_SALT = 0x5d2feefed8b0ca44
VARIABLE_ID = 0xdbdf0a6e535e7de3

MODE_POLICY = "policy"
MODE_VALUE = "value"

# Abstract slots, offsets from FEATURE_DIMENSION
SLOT_GOALS = 0
SLOT_TOTAL_SIZE = 1
SLOT_MAX_SIZE = 2
SLOT_MAX_DEPTH = 3
SLOT_PATH_LENGTH = 4
SLOT_BINDINGS = 5
SLOT_TOP_SYMBOL = 6
SLOT_TOP_FREQUENCY = 7
SLOT_SECOND_SYMBOL = 8
SLOT_SECOND_FREQUENCY = 9
ABSTRACT_FEATURES = 10


def feature_constants():
    """Constants a trained model depends on; stored in model files and checked on load."""
    return {
        "dimension": FEATURE_DIMENSION,
        "abstract_slots": ABSTRACT_SLOTS,
        "walk_prime": WALK_PRIME,
        "walk_length": WALK_LENGTH,
        "symbol_reduction": SYMBOL_REDUCTION,
        "negation_salt": NEGATION_SALT,
        "variable_id": VARIABLE_ID,
        "action_stride": ACTION_STRIDE,
        "max_literals": MAX_LITERALS,
        **{f"salt_{tag}": salt for tag, salt in sorted(CONTEXT_SALTS.items())},
    }


class FeatureVector:
    """
    Immutable sparse vector: strictly ascending indices with their values.

    Attributes:
        indices (tuple): Feature indices.
        values (tuple): Feature values, aligned with ``indices``.
    """

    __slots__ = ("indices", "values")

    def __init__(self, indices=(), values=()):
        self.indices = tuple(indices)
        self.values = tuple(values)

    @classmethod
    def from_mapping(cls, mapping):
        items = sorted(mapping.items())
        return cls((i for i, _ in items), (v for _, v in items))

    def items(self):
        return zip(self.indices, self.values)

    def as_dict(self):
        return dict(zip(self.indices, self.values))

    def __add__(self, other):
        merged = Counter(self.as_dict())
        for index, value in other.items():
            merged[index] += value
        return FeatureVector.from_mapping(merged)

    def __len__(self):
        return len(self.indices)

    def __eq__(self, other):
        return isinstance(other, FeatureVector) and self.indices == other.indices \
            and self.values == other.values

    def __hash__(self):
        return hash((self.indices, self.values))

    def __repr__(self):
        return "FeatureVector({" + ", ".join(f"{i}: {v!r}" for i, v in self.items()) + "})"


def _node(term):
    if type(term) is Var:
        return VARIABLE_ID, ()
    return term.symbol.id, term.args


def _count_walks(root_id, children, salt, counts):
    """Count every downward walk of 1..3 symbols starting at each node of the tree."""
    stack = [(root_id, children)]
    while stack:
        node_id, node_children = stack.pop()
        h1 = (salt * WALK_PRIME + node_id) & MASK_64
        counts[h1 % FEATURE_DIMENSION] += 1
        for child in node_children:
            child_id, grandchildren = _node(child)
            h2 = (h1 * WALK_PRIME + child_id) & MASK_64
            counts[h2 % FEATURE_DIMENSION] += 1
            for grandchild in grandchildren:
                h3 = (h2 * WALK_PRIME + _node(grandchild)[0]) & MASK_64
                counts[h3 % FEATURE_DIMENSION] += 1
            stack.append((child_id, grandchildren))


def _literal_root(literal):
    predicate_id = literal.predicate.id
    return predicate_id if literal.positive else predicate_id ^ NEGATION_SALT


def add_walks(expr, tag, counts):
    """Accumulate the walk counts of a literal or a term into ``counts``."""
    salt = CONTEXT_SALTS[tag]
    if hasattr(expr, "predicate"):
        _count_walks(_literal_root(expr), expr.args, salt, counts)
    else:
        node_id, children = _node(expr)
        _count_walks(node_id, children, salt, counts)
    return counts


def walk_features(expr, tag):
    """
    Hashed term-walk features of one expression.

    :param expr: Literal or term. Variables all hash to the same marker.
    :param tag: Context tag; each context salts its hashes differently.
    :return: FeatureVector of occurrence counts.
    """
    return FeatureVector.from_mapping(add_walks(expr, tag, Counter()))


def _symbol_counts(literal, counter):
    counter[literal.predicate.id] += 1
    stack = list(literal.args)
    while stack:
        term = stack.pop()
        if type(term) is not Var:
            counter[term.symbol.id] += 1
            stack.extend(term.args)


def _abstract_features(state, resolved_goals, path_length):
    slots = [0.0] * ABSTRACT_FEATURES
    if resolved_goals:
        sizes = [literal_size(literal) for literal in resolved_goals]
        slots[SLOT_GOALS] = float(len(resolved_goals))
        slots[SLOT_TOTAL_SIZE] = float(sum(sizes))
        slots[SLOT_MAX_SIZE] = float(max(sizes))
        slots[SLOT_MAX_DEPTH] = float(max(len(goal.path) + 1 for goal in state.goals))
        symbols = Counter()
        for literal in resolved_goals:
            _symbol_counts(literal, symbols)
        ranked = sorted(symbols.items(), key=lambda item: (-item[1], item[0]))
        if ranked:
            slots[SLOT_TOP_SYMBOL] = float(ranked[0][0] % SYMBOL_REDUCTION)
            slots[SLOT_TOP_FREQUENCY] = float(ranked[0][1])
        if len(ranked) > 1:
            slots[SLOT_SECOND_SYMBOL] = float(ranked[1][0] % SYMBOL_REDUCTION)
            slots[SLOT_SECOND_FREQUENCY] = float(ranked[1][1])
    slots[SLOT_PATH_LENGTH] = float(path_length)
    slots[SLOT_BINDINGS] = float(len(state.substitution.trail))
    return {FEATURE_DIMENSION + offset: value for offset, value in enumerate(slots)}


def state_features(state, mode=MODE_VALUE):
    """
    Features of a proof state, every literal taken under the current substitution.

    Policy mode walks the current goal, value mode all open goals (tag ``goal``); both
    add the active path (tag ``path``), all open goals (tag ``tableau``) and the abstract slots.
    """
    counts = Counter()
    resolved = [state.instantiate(goal.literal) for goal in state.goals]
    path_length = 0
    if resolved:
        current = state.goals[-1]
        path_length = len(current.path)
        if mode == MODE_POLICY:
            add_walks(resolved[-1], TAG_GOAL, counts)
        else:
            for literal in resolved:
                add_walks(literal, TAG_GOAL, counts)
        for literal in current.path:
            add_walks(state.instantiate(literal), TAG_PATH, counts)
        for literal in resolved:
            add_walks(literal, TAG_TABLEAU, counts)
    mapping = dict(counts)
    mapping.update(_abstract_features(state, resolved, path_length))
    return FeatureVector.from_mapping(mapping)


def action_counts(action, state, problem, counts=None):
    counts = Counter() if counts is None else counts
    if action.kind == ACTION_REDUCTION:
        literal = state.instantiate(state.goals[-1].path[action.position])
        add_walks(literal, TAG_ACTION_CLAUSE, counts)
        add_walks(literal, TAG_ACTION_LITERAL, counts)
        return counts
    clause = problem.clauses[action.clause]
    for literal in clause.literals:
        add_walks(literal, TAG_ACTION_CLAUSE, counts)
    if action.kind == ACTION_EXTENSION:
        add_walks(clause.literals[action.literal], TAG_ACTION_LITERAL, counts)
    return counts


def action_features(action, state, problem):
    """
    Features of the clause and the literal an inference connects with. A reduction uses
    its path literal in both roles; a start step has only the clause part.
    """
    return FeatureVector.from_mapping(action_counts(action, state, problem))


def policy_features(state, actions, problem):
    """State part (policy mode) merged with each action's features, one vector per action."""
    state_part = state_features(state, MODE_POLICY).as_dict()
    vectors = []
    for action in actions:
        counts = Counter(state_part)
        action_counts(action, state, problem, counts)
        vectors.append(FeatureVector.from_mapping(counts))
    return vectors

