import logging
import os
import re
from typing import NamedTuple

import pyparsing as pp

from .errors import ArityClashError, ProblemSyntaxError
from .syntax import (
    KIND_FUNCTION,
    KIND_PREDICATE,
    Clause,
    Fn,
    Literal,
    Problem,
    SymbolTable,
    Var,
    format_literal,
)

logger = logging.getLogger(__name__)

pp.ParserElement.enable_packrat()

CONJECTURE_ROLES = ("negated_conjecture",)
EQUALITY = "="

_PLAIN_NAME_RE = re.compile(r"[a-z][A-Za-z0-9_]*\Z")


class RawTerm(NamedTuple):
    """A term as read, before its symbols are interned; ``location`` is a string offset."""
    name: str
    args: tuple
    location: int
    variable: bool = False


class RawLiteral(NamedTuple):
    positive: bool
    name: str
    args: tuple
    location: int
    variable: bool = False

    def negated(self):
        return self._replace(positive=not self.positive)


class RawClause(NamedTuple):
    name: str
    role: str
    literals: tuple
    location: int


class RawInclude(NamedTuple):
    path: str
    location: int


def _variable(s, loc, toks):
    return RawTerm(toks[0], (), loc, True)


def _application(s, loc, toks):
    return RawTerm(toks[0], tuple(toks[1]) if len(toks) > 1 else (), loc)


def _constant(s, loc, toks):
    return RawTerm(toks[0], (), loc)


def _atom_or_equation(s, loc, toks):
    if len(toks) == 3:
        left, operator, right = toks
        return RawLiteral(operator == "=", EQUALITY, (left, right), loc)
    term = toks[0]
    return RawLiteral(True, term.name, term.args, term.location, term.variable)


def _negation(s, loc, toks):
    inner = toks[0]
    if isinstance(inner, RawLiteral):
        return inner.negated()
    return RawLiteral(False, inner.name, inner.args, inner.location, inner.variable)


def _clause(s, loc, toks):
    name, role, literals = toks
    return RawClause(name, role, tuple(literals), loc)


def _include(s, loc, toks):
    return RawInclude(toks[0][1:-1], loc)


def _grammar():
    """
    TPTP ``cnf`` and ``include`` statements. Annotations are parsed and dropped; once a
    statement keyword matched, any later mismatch is reported at its own position.
    """
    lpar, rpar, comma, dot, lbrack, rbrack = map(pp.Suppress, "(),.[]")
    upper_word = pp.Regex(r"[A-Z][A-Za-z0-9_]*")
    lower_word = pp.Regex(r"[a-z][A-Za-z0-9_]*|\$\$?[a-z][A-Za-z0-9_]*")
    number = pp.Regex(r"[+-]?[0-9]+(?:\.[0-9]+)?")
    single_quoted = pp.Regex(r"'(?:[^'\\]|\\.)*'")
    distinct_object = pp.Regex(r'"(?:[^"\\]|\\.)*"')

    term = pp.Forward()
    variable = upper_word.copy().set_parse_action(_variable)
    arguments = pp.Group(lpar + pp.DelimitedList(term) + rpar)
    application = (lower_word + pp.Optional(arguments)).set_parse_action(_application)
    constant = (number | single_quoted | distinct_object).copy().set_parse_action(_constant)
    term <<= variable | application | constant

    literal = pp.Forward()
    equation = (term + pp.Optional(pp.one_of("!= =") + term)).set_parse_action(_atom_or_equation)
    negation = (pp.Suppress("~") + ((lpar + literal + rpar) | term)).set_parse_action(_negation)
    literal <<= negation | equation
    disjunction = pp.DelimitedList(literal, delim="|")
    formula = pp.Group(lpar + disjunction + rpar) | pp.Group(disjunction)

    general_term = pp.Forward()
    general_list = lbrack + pp.Optional(pp.DelimitedList(general_term)) + rbrack
    general_function = (lower_word | single_quoted) + pp.Optional(lpar + pp.DelimitedList(general_term) + rpar)
    general_term <<= (general_function | upper_word | number | distinct_object | general_list) \
        + pp.Optional(":" + general_term)
    annotations = pp.Suppress(comma + general_term + pp.Optional(comma + general_list))

    name = lower_word | number | single_quoted
    cnf = (pp.Keyword("cnf").suppress()
           - (lpar + name + comma + lower_word + comma + formula + pp.Optional(annotations) + rpar + dot))
    include = (pp.Keyword("include").suppress()
               - (lpar + single_quoted + pp.Optional(pp.Suppress(comma + general_list)) + rpar + dot))
    statements = pp.ZeroOrMore(cnf.set_parse_action(_clause) | include.set_parse_action(_include))
    statements.ignore(pp.Regex(r"%[^\n]*"))
    statements.ignore(pp.c_style_comment)
    statements.parse_with_tabs()
    return statements


TPTP_STATEMENTS = _grammar()


class _Reader:
    """Interns parsed statements into clauses, following includes relative to ``base_dir``."""

    def __init__(self, symbols, base_dir):
        self.symbols = symbols
        self.base_dir = base_dir

    def read(self, text, source, seen, clauses):
        try:
            statements = TPTP_STATEMENTS.parse_string(text, parse_all=True)
        except pp.ParseBaseException as e:
            raise ProblemSyntaxError(e.msg, e.lineno, e.col, source) from None
        for statement in statements:
            if isinstance(statement, RawInclude):
                self._include(statement, text, source, seen, clauses)
            else:
                clauses.append(self._clause(statement, len(clauses), text, source))
        return clauses

    def _include(self, statement, text, source, seen, clauses):
        path = os.path.normpath(os.path.join(self.base_dir, statement.path))
        if path in seen:
            raise self._error(f"include cycle through {path}", statement.location, text, source)
        try:
            with open(path, "r") as handle:
                included = handle.read()
        except OSError as e:
            raise self._error(f"cannot include {path}: {e}", statement.location, text, source)
        logger.debug("Including %s", path)
        self.read(included, path, seen | {path}, clauses)

    @staticmethod
    def _error(message, location, text, source):
        return ProblemSyntaxError(message, pp.lineno(location, text), pp.col(location, text), source)

    def _clause(self, raw, index, text, source):
        variables = {}
        literals = tuple(self._literal(literal, variables, text, source) for literal in raw.literals)
        return Clause(index=index, literals=literals, from_conjecture=raw.role in CONJECTURE_ROLES,
                      name=raw.name, role=raw.role, var_count=len(variables))

    def _literal(self, raw, variables, text, source):
        if raw.variable:
            raise self._error(f"variable '{raw.name}' used as an atom", raw.location, text, source)
        symbol = self._intern(raw.name, len(raw.args), KIND_PREDICATE, raw.location, text, source)
        return Literal(raw.positive, symbol, tuple(self._term(arg, variables, text, source) for arg in raw.args))

    def _term(self, raw, variables, text, source):
        if raw.variable:
            return Var(variables.setdefault(raw.name, len(variables)))
        symbol = self._intern(raw.name, len(raw.args), KIND_FUNCTION, raw.location, text, source)
        return Fn(symbol, tuple(self._term(arg, variables, text, source) for arg in raw.args))

    def _intern(self, name, arity, kind, location, text, source):
        try:
            return self.symbols.intern(name, arity, kind)
        except ArityClashError as e:
            where = f"{source or '<input>'}:{pp.lineno(location, text)}:{pp.col(location, text)}"
            raise ArityClashError(f"{where}: {e}") from None


def parse_problem(text, name="", base_dir=None, source=None):
    """
    Parse clausal TPTP text into a Problem.

    :param text: Sequence of ``cnf(name, role, (L1 | ... | Ln)).`` statements.
    :param name: Problem name stored on the result.
    :param base_dir: Directory against which ``include`` paths are resolved.
    :param source: File name used in error messages.
    :return: Problem with clauses in input order.
    :raises ProblemSyntaxError: With the line and column of the first offending token.
    :raises ArityClashError: If a symbol is used with two arities.
    """
    symbols = SymbolTable()
    reader = _Reader(symbols, base_dir or os.getcwd())
    clauses = reader.read(text, source, frozenset([os.path.normpath(source)]) if source else frozenset(), [])
    problem = Problem.from_clauses(clauses, symbols, name)
    check_arities(problem)
    if clauses and not problem.has_conjecture:
        logger.info("Problem '%s' has no negated_conjecture clause; every clause is a start clause",
                    name or source or "<input>")
    return problem


def load_problem(path, base_dir=None):
    """
    Read and parse a problem file. The problem is named after the file stem.

    :param path: Path of the problem file.
    :param base_dir: Include directory; defaults to the file's own directory.
    """
    with open(path, "r") as handle:
        text = handle.read()
    name = os.path.splitext(os.path.basename(path))[0]
    return parse_problem(text, name=name, base_dir=base_dir or os.path.dirname(os.path.abspath(path)),
                         source=path)


def _quote_name(name):
    if _PLAIN_NAME_RE.match(name) or name.isdigit() or name.startswith("'"):
        return name
    return "'" + name.replace("\\", "\\\\").replace("'", "\\'") + "'"


def format_problem(problem):
    """Print a Problem back as TPTP text; parsing the output yields an equal Problem."""
    lines = []
    for clause in problem.clauses:
        body = " | ".join(format_literal(literal) for literal in clause.literals)
        lines.append(f"cnf({_quote_name(clause.name or f'c{clause.index}')}, {clause.role}, ({body})).")
    return "\n".join(lines) + ("\n" if lines else "")


def check_arities(problem):
    """
    Verify every literal and term of the matrix against the interned arity of its symbol.

    :raises ArityClashError: On the first mismatch.
    """
    def check_term(term):
        if type(term) is Var:
            return
        if len(term.args) != term.symbol.arity:
            raise ArityClashError(f"term {term.symbol.name} has {len(term.args)} arguments")
        for arg in term.args:
            check_term(arg)

    for clause in problem.clauses:
        for literal in clause.literals:
            if len(literal.args) != literal.predicate.arity:
                raise ArityClashError(f"literal {literal.predicate.name} in clause {clause.index} "
                                    f"has {len(literal.args)} arguments")
            for arg in literal.args:
                check_term(arg)
    return True
