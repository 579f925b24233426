import math

import pytest

from conftest import SUCCESSOR_PROOF

from uctprover.checker import check_proof
from uctprover.config import LEAF_BINARY, LEAF_CONSTANT, MODE_BARE, SELECTION_PUCT, RunConfig
from uctprover.errors import ConfigurationError
from uctprover.features import FeatureVector
from uctprover.learning import KIND_POLICY, KIND_VALUE, Model
from uctprover.problem import load_problem
from uctprover.search import (
    NODE_DEAD,
    NODE_OPEN,
    STATUS_BUDGET,
    STATUS_DEAD_ROOT,
    STATUS_PROVED,
    BigstepRecord,
    Models,
    Prover,
    ProofResult,
    SearchNode,
    collect_examples,
    heuristic_value,
    problem_seed,
    prove,
    puct_score,
    uct_score,
    _BudgetExhausted,
)
from uctprover.tableau import Action, TableauState

MORTAL = """
cnf(socrates, axiom, man(socrates)).
cnf(men_are_mortal, axiom, (~man(X) | mortal(X))).
cnf(goal, negated_conjecture, ~mortal(socrates)).
"""
MORTAL_PROOF = [Action.start(2), Action.extension(1, 1), Action.extension(0, 0)]


@pytest.fixture
def mortal(make_problem):
    return make_problem(MORTAL, name="mortal")


def walk(node):
    yield node
    for child in node.children or ():
        yield from walk(child)


class TestFormulas:
    def test_heuristic_value(self, make_problem):
        """0.95 to the number of open goals."""
        problem = make_problem("cnf(g, negated_conjecture, (p | q | r)).")
        state = TableauState(problem).apply_action(Action.start(0))
        assert heuristic_value(state) == pytest.approx(0.857375, abs=1e-12)
        assert heuristic_value(TableauState(problem)) == 1.0

    def test_uct_score(self):
        """w=0.5, n=2, p=0.5, N=8, c=2."""
        child = SearchNode(Action.start(0), prior=0.5)
        child.visits, child.reward = 2, 0.5
        assert uct_score(child, 8, 2.0) == pytest.approx(0.25 + math.sqrt(math.log(8) / 2), abs=1e-12)

    def test_unvisited_child_scores_infinity(self):
        assert uct_score(SearchNode(Action.start(0)), 0, 2.0) == math.inf

    def test_puct_score(self):
        child = SearchNode(Action.start(0), prior=0.5)
        assert puct_score(child, 9, 2.0) == pytest.approx(3.0)
        child.visits, child.reward = 2, 1.0
        assert puct_score(child, 9, 2.0) == pytest.approx(0.5 + 1.0)

    def test_discount(self):
        assert 0.99 ** 10 == pytest.approx(0.9043820750, abs=1e-9)

    def test_problem_seed(self):
        """Seeds depend on the master seed and the problem id, nothing else."""
        assert problem_seed(0, "six_clauses") == problem_seed(0, "six_clauses")
        assert problem_seed(0, "six_clauses") != problem_seed(1, "six_clauses")
        assert problem_seed(0, "six_clauses") != problem_seed(0, "mortal")


class TestPlayouts:
    def test_root_is_expanded_on_creation(self, six_clauses):
        """The empty tableau's children are the six start steps."""
        prover = Prover(six_clauses)
        assert [child.action for child in prover.tree.root.children] == [Action.start(i) for i in range(6)]
        assert prover.tree.root.visits == 0

    def test_first_playout(self, six_clauses):
        """The first playout applies the lowest start step and expands it."""
        prover = Prover(six_clauses)
        reward = prover.playout()
        first = prover.tree.root.children[0]
        assert first.visits == 1 and first.expanded
        assert reward == pytest.approx(0.95)
        assert prover.inferences == 1
        assert prover.state.inference_count == 0

    def test_successor_trace(self, successor):
        """Three playouts and five inferences: the second playout tries ext 1 0 first."""
        result = prove(successor)
        assert result.status == STATUS_PROVED
        assert result.actions == SUCCESSOR_PROOF
        assert (result.playouts, result.inferences, result.bigsteps) == (3, 5, 0)

    def test_mortal_trace(self, mortal):
        result = prove(mortal)
        assert result.actions == MORTAL_PROOF
        assert (result.playouts, result.inferences) == (3, 6)

    def test_chain(self, smoke_dir):
        """A single path of five inferences costs 1 + 2 + 3 + 4 + 5."""
        result = prove(load_problem(f"{smoke_dir}/chain.p"))
        assert result.proved
        assert result.inferences == 15
        assert len(result.actions) == 5

    def test_dead_root(self, satisfiable):
        """No connection after the start step: the root dies after one inference."""
        result = prove(satisfiable)
        assert result.status == STATUS_DEAD_ROOT
        assert result.inferences == 1
        assert result.actions == []

    def test_budget_of_one(self, six_clauses):
        """The budget is checked before every inference."""
        result = prove(six_clauses, config=RunConfig(budget=1))
        assert result.status == STATUS_BUDGET
        assert result.inferences == 1

    def test_budget_is_respected(self, six_clauses):
        result = prove(six_clauses, config=RunConfig(budget=500, playouts=50))
        assert result.inferences <= 500
        if result.proved:
            assert check_proof(six_clauses, result.actions)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_six_clauses_within_ten_thousand(self, six_clauses, seed):
        """Plain uct proves the six-clause set within 10000 inferences."""
        result = prove(six_clauses, config=RunConfig(budget=10000), seed=seed)
        assert result.proved
        assert result.inferences <= 10000
        assert check_proof(six_clauses, result.actions)
        state = TableauState(six_clauses)
        for action in result.actions:
            state.apply_action(action)
        assert state.closed

    def test_tree_invariants(self, six_clauses):
        """Visit counts add up and mean rewards stay within [0, 1]."""
        prover = Prover(six_clauses)
        for _ in range(60):
            prover.playout()
        root = prover.tree.root
        assert root.visits == 60
        assert root.visits == sum(child.visits for child in root.children)
        for node in walk(root):
            assert 0.0 <= node.reward <= node.visits
            assert node.prior == 1.0
            if node is not root and node.children:
                assert node.visits == 1 + sum(child.visits for child in node.children)
        assert prover.state.inference_count == 0

    def test_deterministic(self, six_clauses):
        """Same seed, same result."""
        config = RunConfig(budget=3000, playouts=40)
        assert prove(six_clauses, config=config, seed=5) == prove(six_clauses, config=config, seed=5)


class TestBareMode:
    def test_bare_mode_respects_seed(self, six_clauses):
        config = RunConfig(mode=MODE_BARE, budget=2000, playouts=20)
        assert prove(six_clauses, config=config, seed=1) == prove(six_clauses, config=config, seed=1)

    def test_unbounded_descent(self, successor):
        """Always extending with the step clause never closes the tableau."""

        class StepClauseProver(Prover):
            def select_child(self, node):
                for child in node.children:
                    if child.action.clause == 1:
                        return child
                return node.children[0]

        prover = StepClauseProver(successor, RunConfig(mode=MODE_BARE, playout_length=1000))
        prover.playout()
        assert prover.last_descent == 1000
        assert prover.proof is None
        assert prover.state.inference_count == 0

    def test_bare_bigstep_draws_a_visited_child(self, six_clauses):
        """Bare bigsteps ignore the visit counts but never commit an unvisited child."""
        chosen = set()
        for seed in range(20):
            prover = Prover(six_clauses, RunConfig(mode=MODE_BARE), seed=seed)
            for child, visits in zip(prover.tree.root.children, [100, 1899, 1]):
                child.visits, child.reward = visits, 0.5 * visits
            chosen.add(prover.bigstep())
        assert chosen <= {Action.start(0), Action.start(1), Action.start(2)}
        assert len(chosen) > 1


class TestSelection:
    def test_unvisited_ties(self, six_clauses):
        """Unvisited children go by prior, then by the lower encoding."""
        prover = Prover(six_clauses)
        root = prover.tree.root
        assert prover.select_child(root).action == Action.start(0)
        root.children[3].prior = 2.0
        assert prover.select_child(root).action == Action.start(3)

    def test_greedy_without_exploration(self, six_clauses):
        """With c = 0 the highest mean reward wins."""
        prover = Prover(six_clauses, RunConfig(exploration=0.0))
        root = prover.tree.root
        for child, reward in zip(root.children, [0.1, 0.2, 0.9, 0.3, 0.4, 0.5]):
            child.visits, child.reward = 1, reward
        root.visits = 6
        assert prover.select_child(root).action == Action.start(2)

    def test_dead_children_are_skipped(self, six_clauses):
        prover = Prover(six_clauses)
        root = prover.tree.root
        root.children[0].status = NODE_DEAD
        assert prover.select_child(root).action == Action.start(1)


class TestBigstep:
    def test_most_visited(self, six_clauses):
        """Visits [100, 1899, 1] commit the second child."""
        prover = Prover(six_clauses)
        root = prover.tree.root
        for child, visits in zip(root.children, [100, 1899, 1]):
            child.visits, child.reward = visits, 0.5 * visits
        assert prover.bigstep() == Action.start(1)
        assert prover.tree.trail == [Action.start(1)]
        assert prover.state.applied_actions == [Action.start(1)]
        assert prover.tree.root.expanded

    def test_tie_on_visits(self, six_clauses):
        """Visits [5, 5] with w/n [0.2, 0.9]: the higher mean reward wins."""
        prover = Prover(six_clauses)
        root = prover.tree.root
        root.children[0].visits, root.children[0].reward = 5, 1.0
        root.children[1].visits, root.children[1].reward = 5, 4.5
        assert prover.bigstep() == Action.start(1)

    def test_record(self, six_clauses):
        """The committed root is recorded with its visited children only."""
        prover = Prover(six_clauses)
        root = prover.tree.root
        root.children[2].visits = 3
        root.children[4].visits = 1
        prover.bigstep()
        record = prover.history[0]
        assert record.position == 0
        assert record.visits == (3, 1)
        assert len(record.policy_vectors) == 2

    @pytest.mark.parametrize("reuse, visits", [(True, 1), (False, 0)])
    def test_tree_reuse(self, mortal, reuse, visits):
        """Without reuse the new root starts from fresh statistics."""
        prover = Prover(mortal, RunConfig(reuse_tree=reuse))
        prover.playout()
        prover.bigstep()
        assert prover.tree.root.visits == visits
        assert prover.tree.root.status == NODE_OPEN

    @pytest.mark.parametrize("reuse", [True, False])
    def test_one_playout_per_bigstep(self, mortal, reuse):
        result = prove(mortal, config=RunConfig(playouts=1, reuse_tree=reuse))
        assert result.actions == MORTAL_PROOF
        assert (result.bigsteps, result.inferences) == (2, 5)
        assert [record.position for record in result.history] == [0, 1]

    def test_history_matches_bigsteps_at_every_budget(self, six_clauses):
        """A bigstep cut off by the budget leaves no record behind."""
        for budget in range(1, 200):
            result = prove(six_clauses, config=RunConfig(budget=budget, playouts=3))
            policy, value = collect_examples(result.history, result)
            assert len(result.history) == result.bigsteps, budget
            assert len(value) == result.bigsteps, budget
            assert len(policy) >= result.bigsteps, budget

    def test_budget_on_the_commit(self, mortal):
        """Running out on the committing inference keeps trail and history equal."""
        prover = Prover(mortal, RunConfig(budget=1))
        prover.playout()
        with pytest.raises(_BudgetExhausted):
            prover.bigstep()
        assert prover.history == []
        assert prover.tree.trail == []


class TestGuidance:
    def test_missing_model(self, six_clauses):
        """Guided modes refuse to run without their model."""
        with pytest.raises(ConfigurationError):
            Prover(six_clauses, RunConfig(mode="uct+policy"))
        with pytest.raises(ConfigurationError):
            Prover(six_clauses, RunConfig(mode="uct+value"), Models(policy=Model(KIND_POLICY)))

    def test_zero_policy_model(self, mortal, six_clauses):
        """A zero-weight policy gives uniform priors that sum to one."""
        models = Models(policy=Model(KIND_POLICY))
        prover = Prover(six_clauses, RunConfig(mode="uct+policy"), models)
        priors = [child.prior for child in prover.tree.root.children]
        assert priors == pytest.approx([1 / 6] * 6)
        assert prove(mortal, models, RunConfig(mode="uct+policy")).actions == MORTAL_PROOF

    def test_value_model(self, mortal):
        """A zero-weight value model evaluates every leaf at 0.5."""
        models = Models(value=Model(KIND_VALUE))
        prover = Prover(mortal, RunConfig(mode="uct+value"), models)
        assert prover.playout() == pytest.approx(0.5)
        assert prover.run().proved

    def test_models_ignored_by_plain_uct(self, mortal):
        prover = Prover(mortal, RunConfig(), Models(Model(KIND_POLICY), Model(KIND_VALUE)))
        assert prover.policy_model is None and prover.value_model is None

    @pytest.mark.parametrize("options", [
        {"selection": SELECTION_PUCT},
        {"leaf_evaluation": LEAF_BINARY},
        {"leaf_evaluation": LEAF_CONSTANT, "constant_value": 0.3},
    ])
    def test_variants_prove_mortal(self, mortal, options):
        assert prove(mortal, config=RunConfig(**options)).actions == MORTAL_PROOF


class TestCollectExamples:
    def record(self, position, visits):
        vectors = tuple(FeatureVector((i,), (1.0,)) for i in range(len(visits)))
        return BigstepRecord(position, FeatureVector((7,), (1.0,)), vectors, tuple(visits))

    def test_policy_targets(self):
        """Visits [10, 30, 20] give ln 0.5, ln 1.5 and 0."""
        result = ProofResult("p", "uct", 0, STATUS_BUDGET)
        policy, value = collect_examples([self.record(0, [10, 30, 20])], result, iteration=2)
        assert [example.target for example in policy] == pytest.approx([math.log(0.5), math.log(1.5), 0.0])
        assert all(example.kind == KIND_POLICY for example in policy)
        assert policy[0].origin == ("p", 2, 0)
        assert value[0].target == pytest.approx(-math.log(99))

    def test_value_targets_on_a_proof(self):
        """The last bigstep before the closing inference is worth 0.99."""
        result = ProofResult("p", "uct", 0, STATUS_PROVED, actions=MORTAL_PROOF)
        _, value = collect_examples([self.record(0, [1]), self.record(2, [1])], result, discount=0.99)
        assert value[0].target == pytest.approx(math.log(0.99 ** 3 / (1 - 0.99 ** 3)))
        assert value[1].target == pytest.approx(math.log(99))

    def test_from_a_run(self, mortal):
        result = prove(mortal, config=RunConfig(playouts=1))
        policy, value = collect_examples(result.history, result, iteration=1)
        assert len(policy) == len(value) == 2
        assert all(example.target == 0.0 for example in policy)
        assert [example.origin.bigstep for example in value] == [0, 1]
