import os

import pytest

from uctprover.problem import load_problem, parse_problem
from uctprover.tableau import Action

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
SMOKE_DIR = os.path.join(ROOT, "corpus", "smoke")
BUNDLED_DIR = os.path.join(ROOT, "corpus", "bundled")

# start from r(X,Y) | ~p(X) | q(Y), closing every branch within paths of length 2
SIX_CLAUSES_PROOF = [
    Action.start(1),
    Action.extension(4, 1),
    Action.extension(5, 1),
    Action.reduction(0),
    Action.extension(0, 0),
    Action.extension(3, 1),
    Action.extension(2, 0),
    Action.reduction(0),
]

SUCCESSOR_PROOF = [Action.start(0), Action.extension(2, 0)]


@pytest.fixture
def six_clauses():
    return load_problem(os.path.join(SMOKE_DIR, "six_clauses.p"))


@pytest.fixture
def successor():
    return load_problem(os.path.join(SMOKE_DIR, "successor.p"))


@pytest.fixture
def satisfiable():
    return load_problem(os.path.join(SMOKE_DIR, "satisfiable.p"))


@pytest.fixture
def smoke_dir():
    return SMOKE_DIR


@pytest.fixture
def bundled_dir():
    return BUNDLED_DIR


@pytest.fixture
def make_problem():
    def make(text, name="inline"):
        return parse_problem(text, name=name)
    return make
