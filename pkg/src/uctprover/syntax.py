from dataclasses import dataclass, field
from typing import NamedTuple

from .errors import ArityClashError, SymbolCollisionError

# Symbol kinds, part of the interned key
KIND_FUNCTION = "func"
KIND_PREDICATE = "pred"

FNV_OFFSET_BASIS = 0xcbf29ce484222325
FNV_PRIME = 0x100000001b3
MASK_64 = 0xFFFFFFFFFFFFFFFF


def fnv1a_64(text):
    """
    64-bit FNV-1a hash of the UTF-8 bytes of ``text``.

    :param text: String to hash.
    :return: Unsigned 64-bit integer.
    """
    h = FNV_OFFSET_BASIS
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * FNV_PRIME) & MASK_64
    return h


class Symbol(NamedTuple):
    id: int
    name: str
    arity: int
    kind: str


class Var(NamedTuple):
    """A variable. Indices are clause-local in the matrix and offset by a fresh base in a tableau."""
    index: int


class Fn(NamedTuple):
    """Application of a function symbol (constants have no arguments)."""
    symbol: Symbol
    args: tuple


class Literal(NamedTuple):
    positive: bool
    predicate: Symbol
    args: tuple

    def negated(self):
        return Literal(not self.positive, self.predicate, self.args)


def symbol_key(name, arity, kind):
    return f"{name}/{arity}/{kind}"


def intern_symbol(name, arity, kind=KIND_PREDICATE):
    """
    Build the symbol for (name, arity, kind). The id depends only on the triple.

    :param name: Non-empty symbol name.
    :param arity: Number of arguments.
    :param kind: KIND_FUNCTION or KIND_PREDICATE.
    :return: Symbol with its 64-bit id.
    """
    if not name:
        raise ValueError("symbol name must be non-empty")
    return Symbol(fnv1a_64(symbol_key(name, arity, kind)), name, arity, kind)


class SymbolTable:
    """
    Interning table of a problem. Detects arity clashes and 64-bit id collisions.

    Attributes:
        by_id (dict): Symbol id to Symbol.
    """

    def __init__(self):
        self.by_id = {}
        self._arities = {}

    def intern(self, name, arity, kind):
        known = self._arities.get((name, kind))
        if known is not None and known != arity:
            raise ArityClashError(f"symbol '{name}' used with arity {known} and {arity}")
        symbol = intern_symbol(name, arity, kind)
        existing = self.by_id.get(symbol.id)
        if existing is None:
            self.by_id[symbol.id] = symbol
            self._arities[(name, kind)] = arity
        elif existing != symbol:
            raise SymbolCollisionError(f"symbol id collision between {existing} and {symbol}")
        return symbol

    def predicates(self):
        return sorted((s for s in self.by_id.values() if s.kind == KIND_PREDICATE), key=lambda s: s.name)

    def functions(self):
        return sorted((s for s in self.by_id.values() if s.kind == KIND_FUNCTION), key=lambda s: s.name)

    def __len__(self):
        return len(self.by_id)

    def __eq__(self, other):
        return isinstance(other, SymbolTable) and self.by_id == other.by_id


@dataclass(frozen=True)
class Clause:
    index: int
    literals: tuple
    from_conjecture: bool = False
    name: str = ""
    role: str = "axiom"
    var_count: int = 0


@dataclass(frozen=True)
class Problem:
    """
    An input matrix: clauses in file order plus their symbol table.

    ``connections`` maps (predicate id, polarity) to the (clause, literal) pairs carrying
    that literal, in ascending order; it is derived data and takes no part in equality.
    """
    clauses: tuple
    symbols: SymbolTable
    start_clause_indices: tuple
    name: str = ""
    connections: dict = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.connections is None:
            connections = {}
            for clause in self.clauses:
                for position, literal in enumerate(clause.literals):
                    key = (literal.predicate.id, literal.positive)
                    connections.setdefault(key, []).append((clause.index, position))
            object.__setattr__(self, "connections",
                               {key: tuple(value) for key, value in connections.items()})

    @classmethod
    def from_clauses(cls, clauses, symbols, name=""):
        conjecture = tuple(c.index for c in clauses if c.from_conjecture)
        starts = conjecture if conjecture else tuple(c.index for c in clauses)
        return cls(tuple(clauses), symbols, starts, name)

    @property
    def has_conjecture(self):
        return any(c.from_conjecture for c in self.clauses)

    def complementary_candidates(self, literal):
        """Matrix positions whose literal has the same predicate and the opposite polarity."""
        return self.connections.get((literal.predicate.id, not literal.positive), ())


def rename_term(term, offset):
    if type(term) is Var:
        return Var(term.index + offset)
    if not term.args:
        return term
    return Fn(term.symbol, tuple(rename_term(arg, offset) for arg in term.args))


def rename_literal(literal, offset):
    if offset == 0:
        return literal
    return Literal(literal.positive, literal.predicate, tuple(rename_term(a, offset) for a in literal.args))


def term_size(term):
    if type(term) is Var:
        return 1
    return 1 + sum(term_size(arg) for arg in term.args)


def literal_size(literal):
    return 1 + sum(term_size(arg) for arg in literal.args)


def format_term(term):
    if type(term) is Var:
        return f"X{term.index}"
    if not term.args:
        return term.symbol.name
    return f"{term.symbol.name}({','.join(format_term(a) for a in term.args)})"


def format_literal(literal):
    if literal.predicate.name == "=" and literal.predicate.arity == 2:
        left, right = (format_term(a) for a in literal.args)
        return f"{left} {'=' if literal.positive else '!='} {right}"
    sign = "" if literal.positive else "~"
    if not literal.args:
        return f"{sign}{literal.predicate.name}"
    return f"{sign}{literal.predicate.name}({','.join(format_term(a) for a in literal.args)})"
