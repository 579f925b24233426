from .checker import check_proof, explain_proof, read_proof, write_proof
from .config import RunConfig, configure_logging, load_config
from .deepening import prove_iterative_deepening
from .errors import *
from .features import FeatureVector, action_features, state_features, walk_features
from .learning import (
    Model,
    TrainingExample,
    evaluate_model,
    export_examples,
    import_examples,
    load_model,
    policy_priors,
    predict,
    save_model,
    train,
    value_estimate,
)
from .orchestrator import Corpus, evaluate_baselines, rl_loop, run_corpus, split_corpus
from .problem import format_problem, load_problem, parse_problem
from .search import Models, ProofResult, Prover, collect_examples, heuristic_value, prove, uct_score
from .syntax import Clause, Fn, Literal, Problem, Symbol, SymbolTable, Var, intern_symbol
from .tableau import Action, TableauState, applicable_actions, apply_action, unify, undo_to

__version__ = "0.1.0"
