"""Syntactically co-safe LTL: parser, finite-trace semantics, and FSA build.

Formulas follow the grammar ``T | o | !o | and | or | X | U | F | ->`` with
negation restricted to observations; implications are eliminated at parse
time by rewriting ``a -> b`` to ``!a | b`` and pushing the negation down to
atoms (the antecedent must therefore be propositional).

Satisfaction is judged on finite traces (sequences of valuations) with
strong semantics at the trace end: ``X phi`` is false at the last position,
``F``/``U`` require their target within the trace. ``to_fsa`` builds the
matching deterministic automaton by tableau expansion of the temporal
operators (formula progression, which determinizes on the fly) followed by
partition-refinement minimization; a state is accepting exactly when every
obligation has been discharged, so FSA acceptance recognizes good prefixes.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Formula",
    "Top",
    "Bottom",
    "Atom",
    "NotAtom",
    "And",
    "Or",
    "Next",
    "Until",
    "Eventually",
    "FormulaSyntaxError",
    "StateExplosionError",
    "parse",
    "formula_text",
    "formula_atoms",
    "satisfies",
    "progress",
    "to_fsa",
    "Fsa",
    "advance",
]


class FormulaSyntaxError(ValueError):
    """Parse error carrying 1-based line and column."""

    def __init__(self, message, line, column):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class StateExplosionError(RuntimeError):
    """FSA construction exceeded the configured state cap."""


# ---------------------------------------------------------------------------
# AST


class Formula:
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class Top(Formula):
    pass


@dataclass(frozen=True, slots=True)
class Bottom(Formula):
    pass


@dataclass(frozen=True, slots=True)
class _PositionExists(Formula):
    """Internal obligation: the remaining trace must be non-empty.

    Produced when progressing ``X T``; satisfied by any symbol, never by the
    ended trace. Not part of the surface grammar.
    """


@dataclass(frozen=True, slots=True)
class Atom(Formula):
    name: str


@dataclass(frozen=True, slots=True)
class NotAtom(Formula):
    name: str


@dataclass(frozen=True, slots=True)
class And(Formula):
    children: tuple


@dataclass(frozen=True, slots=True)
class Or(Formula):
    children: tuple


@dataclass(frozen=True, slots=True)
class Next(Formula):
    sub: Formula


@dataclass(frozen=True, slots=True)
class Until(Formula):
    lhs: Formula
    rhs: Formula


@dataclass(frozen=True, slots=True)
class Eventually(Formula):
    sub: Formula


TOP = Top()
BOTTOM = Bottom()
_POSITION_EXISTS = _PositionExists()


def _key(f: Formula) -> str:
    return formula_text(f)


def make_and(items) -> Formula:
    """Conjunction with flattening, unit/absorbing elements, and dedup."""
    flat: dict[str, Formula] = {}
    for item in items:
        if isinstance(item, Bottom):
            return BOTTOM
        if isinstance(item, Top):
            continue
        if isinstance(item, And):
            for sub in item.children:
                flat.setdefault(_key(sub), sub)
        else:
            flat.setdefault(_key(item), item)
    if not flat:
        return TOP
    if len(flat) == 1:
        return next(iter(flat.values()))
    return And(tuple(flat[k] for k in sorted(flat)))


def make_or(items) -> Formula:
    """Disjunction, dual of :func:`make_and`."""
    flat: dict[str, Formula] = {}
    for item in items:
        if isinstance(item, Top):
            return TOP
        if isinstance(item, Bottom):
            continue
        if isinstance(item, Or):
            for sub in item.children:
                flat.setdefault(_key(sub), sub)
        else:
            flat.setdefault(_key(item), item)
    if not flat:
        return BOTTOM
    if len(flat) == 1:
        return next(iter(flat.values()))
    return Or(tuple(flat[k] for k in sorted(flat)))


def make_next(sub: Formula) -> Formula:
    if isinstance(sub, Bottom):
        return BOTTOM
    return Next(sub)


def make_until(lhs: Formula, rhs: Formula) -> Formula:
    if isinstance(rhs, (Top, Bottom)):
        return rhs
    if isinstance(lhs, Bottom):
        return rhs
    if isinstance(lhs, Top):
        return make_eventually(rhs)
    return Until(lhs, rhs)


def make_eventually(sub: Formula) -> Formula:
    if isinstance(sub, (Top, Bottom)):
        return sub
    if isinstance(sub, Eventually):
        return sub
    return Eventually(sub)


def formula_text(f: Formula) -> str:
    """Concrete syntax; ``parse(formula_text(f))`` returns a formula equal to ``f``."""
    if isinstance(f, Top):
        return "T"
    if isinstance(f, Bottom):
        return "!T"
    if isinstance(f, _PositionExists):
        return "@nonempty"  # internal obligation, never produced by parse
    if isinstance(f, Atom):
        return f.name
    if isinstance(f, NotAtom):
        return f"!{f.name}"
    if isinstance(f, And):
        return "(" + " & ".join(formula_text(c) for c in f.children) + ")"
    if isinstance(f, Or):
        return "(" + " | ".join(formula_text(c) for c in f.children) + ")"
    if isinstance(f, Next):
        return f"X {_unary_operand(f.sub)}"
    if isinstance(f, Eventually):
        return f"F {_unary_operand(f.sub)}"
    if isinstance(f, Until):
        return f"({_unary_operand(f.lhs)} U {_unary_operand(f.rhs)})"
    raise TypeError(f"unknown formula node {f!r}")


def _unary_operand(f: Formula) -> str:
    text = formula_text(f)
    if isinstance(f, (Atom, NotAtom, Top, Bottom, And, Or, Until)):
        return text  # atoms are bare; the rest already parenthesize themselves
    return f"({text})"


def formula_atoms(f: Formula) -> frozenset[str]:
    if isinstance(f, (Atom, NotAtom)):
        return frozenset((f.name,))
    if isinstance(f, (And, Or)):
        return frozenset().union(*(formula_atoms(c) for c in f.children))
    if isinstance(f, (Next, Eventually)):
        return formula_atoms(f.sub)
    if isinstance(f, Until):
        return formula_atoms(f.lhs) | formula_atoms(f.rhs)
    return frozenset()


# ---------------------------------------------------------------------------
# Parser


_TOKEN_RE = re.compile(
    r"(?P<ws>\s+)|(?P<arrow>->)|(?P<op>[!&|()])"
    r"|(?P<word>[A-Za-z_][A-Za-z0-9_]*)"
)

_KEYWORDS = {"T", "X", "U", "F"}


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    line: int
    column: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    line, line_start = 1, 0
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise FormulaSyntaxError(
                f"unexpected character {text[pos]!r}", line, pos - line_start + 1
            )
        if m.lastgroup == "ws":
            line += m.group().count("\n")
            if "\n" in m.group():
                line_start = m.end() - len(m.group().rsplit("\n", 1)[-1])
        else:
            col = m.start() - line_start + 1
            word = m.group()
            if m.lastgroup == "word" and word in _KEYWORDS:
                tokens.append(_Token(word, word, line, col))
            elif m.lastgroup == "word":
                tokens.append(_Token("ident", word, line, col))
            else:
                tokens.append(_Token(word, word, line, col))
        pos = m.end()
    tokens.append(_Token("end", "", line, len(text) - line_start + 1))
    return tokens


class _Parser:
    """Recursive descent; precedence ``unary > U > & > | > ->``."""

    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def take(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str) -> _Token:
        tok = self.take()
        if tok.kind != kind:
            raise FormulaSyntaxError(
                f"expected {kind!r}, found {tok.text or 'end of input'!r}",
                tok.line,
                tok.column,
            )
        return tok

    def parse(self) -> Formula:
        f = self.implication()
        tok = self.peek()
        if tok.kind != "end":
            raise FormulaSyntaxError(
                f"unexpected trailing input {tok.text!r}", tok.line, tok.column
            )
        return f

    def implication(self) -> Formula:
        lhs = self.disjunction()
        if self.peek().kind == "->":
            tok = self.take()
            rhs = self.implication()  # right associative
            return make_or([self._negate(lhs, tok), rhs])
        return lhs

    def disjunction(self) -> Formula:
        items = [self.conjunction()]
        while self.peek().kind == "|":
            self.take()
            items.append(self.conjunction())
        return make_or(items) if len(items) > 1 else items[0]

    def conjunction(self) -> Formula:
        items = [self.until()]
        while self.peek().kind == "&":
            self.take()
            items.append(self.until())
        return make_and(items) if len(items) > 1 else items[0]

    def until(self) -> Formula:
        lhs = self.unary()
        if self.peek().kind == "U":
            self.take()
            rhs = self.until()  # right associative
            return make_until(lhs, rhs)
        return lhs

    def unary(self) -> Formula:
        tok = self.peek()
        if tok.kind == "!":
            self.take()
            return self._negate(self.unary(), tok)
        if tok.kind == "X":
            self.take()
            return make_next(self.unary())
        if tok.kind == "F":
            self.take()
            return make_eventually(self.unary())
        if tok.kind == "T":
            self.take()
            return TOP
        if tok.kind == "ident":
            self.take()
            return Atom(tok.text)
        if tok.kind == "(":
            self.take()
            f = self.implication()
            self.expect(")")
            return f
        raise FormulaSyntaxError(
            f"expected a formula, found {tok.text or 'end of input'!r}",
            tok.line,
            tok.column,
        )

    def _negate(self, f: Formula, tok: _Token) -> Formula:
        """Push negation to atoms; co-safety forbids negating temporal parts."""
        if isinstance(f, Atom):
            return NotAtom(f.name)
        if isinstance(f, NotAtom):
            return Atom(f.name)
        if isinstance(f, Top):
            return BOTTOM
        if isinstance(f, Bottom):
            return TOP
        if isinstance(f, And):
            return make_or([self._negate(c, tok) for c in f.children])
        if isinstance(f, Or):
            return make_and([self._negate(c, tok) for c in f.children])
        raise FormulaSyntaxError(
            "negation restricted to observations", tok.line, tok.column
        )


def parse(text: str) -> Formula:
    """Parse concrete syntax into an implication-free, negation-atomic AST."""
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# Finite-trace semantics


def satisfies(f: Formula, trace) -> bool:
    """Recursive finite-trace satisfaction at position 0 (trace non-empty)."""
    trace = [frozenset(v) for v in trace]
    if not trace:
        raise ValueError("traces must be non-empty")
    return _sat(f, trace, 0)


def _sat(f: Formula, trace, i: int) -> bool:
    if isinstance(f, Top):
        return True
    if isinstance(f, Bottom):
        return False
    if isinstance(f, _PositionExists):
        return True
    if isinstance(f, Atom):
        return f.name in trace[i]
    if isinstance(f, NotAtom):
        return f.name not in trace[i]
    if isinstance(f, And):
        return all(_sat(c, trace, i) for c in f.children)
    if isinstance(f, Or):
        return any(_sat(c, trace, i) for c in f.children)
    if isinstance(f, Next):
        return i + 1 < len(trace) and _sat(f.sub, trace, i + 1)
    if isinstance(f, Eventually):
        return any(_sat(f.sub, trace, j) for j in range(i, len(trace)))
    if isinstance(f, Until):
        for j in range(i, len(trace)):
            if _sat(f.rhs, trace, j):
                return True
            if not _sat(f.lhs, trace, j):
                return False
        return False
    raise TypeError(f"unknown formula node {f!r}")


def progress(f: Formula, valuation: frozenset) -> Formula:
    """Obligation remaining after observing ``valuation`` at the current position."""
    if isinstance(f, (Top, Bottom)):
        return f
    if isinstance(f, _PositionExists):
        return TOP
    if isinstance(f, Atom):
        return TOP if f.name in valuation else BOTTOM
    if isinstance(f, NotAtom):
        return TOP if f.name not in valuation else BOTTOM
    if isinstance(f, And):
        return make_and([progress(c, valuation) for c in f.children])
    if isinstance(f, Or):
        return make_or([progress(c, valuation) for c in f.children])
    if isinstance(f, Next):
        # a deferred T still requires the next position to exist
        return _POSITION_EXISTS if isinstance(f.sub, Top) else f.sub
    if isinstance(f, Eventually):
        return make_or([progress(f.sub, valuation), f])
    if isinstance(f, Until):
        return make_or(
            [progress(f.rhs, valuation), make_and([progress(f.lhs, valuation), f])]
        )
    raise TypeError(f"unknown formula node {f!r}")


# ---------------------------------------------------------------------------
# FSA


class Fsa:
    """Deterministic FSA over valuations of the formula's atoms.

    ``transitions`` has shape (num_states, 2**len(atoms)); valuations index
    columns by the bitmask of present atoms (``atoms`` sorted). ``current``
    is the only mutable field.
    """

    def __init__(self, atoms, transitions, initial, accepting, state_labels=None):
        self.atoms = tuple(atoms)
        self.transitions = np.asarray(transitions, dtype=np.int32)
        self.transitions.setflags(write=False)
        self.initial = int(initial)
        self.accepting = frozenset(int(s) for s in accepting)
        self.state_labels = tuple(state_labels) if state_labels is not None else None
        self.current = self.initial
        self._atom_bits = {a: 1 << i for i, a in enumerate(self.atoms)}

    @property
    def num_states(self) -> int:
        return self.transitions.shape[0]

    @property
    def is_accepting(self) -> bool:
        return self.current in self.accepting

    def valuation_index(self, valuation) -> int:
        idx = 0
        for name in valuation:
            idx |= self._atom_bits.get(name, 0)  # atoms outside the alphabet ignored
        return idx

    def step(self, state: int, valuation) -> int:
        return int(self.transitions[state, self.valuation_index(valuation)])

    def advance(self, valuation) -> "Fsa":
        self.current = self.step(self.current, valuation)
        return self

    def reset(self) -> "Fsa":
        self.current = self.initial
        return self

    def clone(self) -> "Fsa":
        copy = Fsa(
            self.atoms, self.transitions, self.initial, self.accepting, self.state_labels
        )
        copy.current = self.current
        return copy

    def accepts_trace(self, trace) -> bool:
        """Run the trace from the initial state; True iff it is a good prefix."""
        state = self.initial
        for valuation in trace:
            state = self.step(state, valuation)
        return state in self.accepting

    def influential_atoms(self, state: int | None = None) -> frozenset[str]:
        """Atoms whose truth value can change the successor of ``state``."""
        state = self.current if state is None else state
        row = self.transitions[state]
        names = []
        for i, name in enumerate(self.atoms):
            bit = 1 << i
            with_bit = row[[v | bit for v in range(len(row))]]
            without = row[[v & ~bit for v in range(len(row))]]
            if np.any(with_bit != without):
                names.append(name)
        return frozenset(names)

    def describe(self) -> dict:
        """JSON-ready description: states, alphabet, transitions, accepting."""
        transitions = []
        for s in range(self.num_states):
            for v in range(self.transitions.shape[1]):
                valuation = [a for i, a in enumerate(self.atoms) if v & (1 << i)]
                transitions.append(
                    {"from": s, "valuation": valuation, "to": int(self.transitions[s, v])}
                )
        return {
            "atoms": list(self.atoms),
            "num_states": self.num_states,
            "initial": self.initial,
            "accepting": sorted(self.accepting),
            "labels": list(self.state_labels) if self.state_labels else None,
            "transitions": transitions,
        }


def advance(fsa: Fsa, valuation) -> Fsa:
    """Functional alias for :meth:`Fsa.advance` (mutates the cursor)."""
    return fsa.advance(valuation)


def to_fsa(formula: Formula, state_cap: int = 10_000) -> Fsa:
    """Build the minimal deterministic good-prefix automaton for ``formula``.

    Tableau expansion of until/eventually/next via formula progression
    explores exactly the reachable determinized states; partition refinement
    then merges language-equivalent ones. Raises
    :class:`StateExplosionError` beyond ``state_cap`` states.
    """
    atoms = sorted(formula_atoms(formula))
    valuations = [
        frozenset(a for i, a in enumerate(atoms) if mask & (1 << i))
        for mask in range(1 << len(atoms))
    ]

    index: dict[Formula, int] = {formula: 0}
    formulas = [formula]
    rows: dict[int, list[int]] = {}
    frontier = [formula]
    while frontier:
        f = frontier.pop()
        row = []
        for valuation in valuations:
            nxt = progress(f, valuation)
            if nxt not in index:
                if len(index) >= state_cap:
                    raise StateExplosionError(
                        f"FSA construction exceeded {state_cap} states"
                    )
                index[nxt] = len(formulas)
                formulas.append(nxt)
                frontier.append(nxt)
            row.append(index[nxt])
        rows[index[f]] = row

    table = np.array([rows[i] for i in range(len(formulas))], dtype=np.int32)
    accepting = {i for i, f in enumerate(formulas) if isinstance(f, Top)}
    labels = [formula_text(f) for f in formulas]
    return _minimize(atoms, table, 0, accepting, labels)


def _minimize(atoms, table, initial, accepting, labels) -> Fsa:
    """Moore partition refinement on a total DFA."""
    n = table.shape[0]
    block = np.array([1 if s in accepting else 0 for s in range(n)])
    num_blocks = len(np.unique(block))
    while True:
        signatures = {}
        new_block = np.empty(n, dtype=int)
        for s in range(n):
            sig = (block[s], tuple(block[table[s]]))
            if sig not in signatures:
                signatures[sig] = len(signatures)
            new_block[s] = signatures[sig]
        stable = len(signatures) == num_blocks
        block = new_block  # ids normalized to 0..k-1
        num_blocks = len(signatures)
        if stable:
            break
    representatives = {}
    for s in range(n):
        representatives.setdefault(block[s], s)
    new_table = np.empty((num_blocks, table.shape[1]), dtype=np.int32)
    new_labels = [""] * num_blocks
    for b, rep in representatives.items():
        new_table[b] = block[table[rep]]
        new_labels[b] = labels[rep]
    new_accepting = {block[s] for s in accepting}
    return Fsa(atoms, new_table, block[initial], new_accepting, new_labels)
