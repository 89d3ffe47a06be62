"""Unit tests for the scLTL parser, semantics, and FSA construction.

The oracle here is an independent recursive evaluator of finite-trace
satisfaction (strong next/until), exercised exhaustively against FSA
acceptance over all short traces.
"""

import itertools

import numpy as np
import pytest

from sarplan.scltl import (
    And,
    Atom,
    Bottom,
    Eventually,
    FormulaSyntaxError,
    Next,
    NotAtom,
    Or,
    StateExplosionError,
    Top,
    Until,
    advance,
    formula_text,
    make_and,
    make_or,
    parse,
    satisfies,
    to_fsa,
)

SUBJECT1 = (
    "F found1 & ((found1 & !wind1) -> X quadres1)"
    " & ((found1 & wind1 & !untrav1) -> X bipedres1)"
)
SUBJECT2 = "F found2 & ((found2 & !untrav2) -> X bipedres2)"


def oracle_sat(f, trace, i=0):
    """Independent finite-trace semantics (strong next / strong until)."""
    kind = type(f).__name__
    if kind == "Top":
        return True
    if kind == "Bottom":
        return False
    if kind == "_PositionExists":
        return True
    if kind == "Atom":
        return f.name in trace[i]
    if kind == "NotAtom":
        return f.name not in trace[i]
    if kind == "And":
        return all(oracle_sat(c, trace, i) for c in f.children)
    if kind == "Or":
        return any(oracle_sat(c, trace, i) for c in f.children)
    if kind == "Next":
        return i + 1 < len(trace) and oracle_sat(f.sub, trace, i + 1)
    if kind == "Eventually":
        return any(oracle_sat(f.sub, trace, j) for j in range(i, len(trace)))
    if kind == "Until":
        for j in range(i, len(trace)):
            if oracle_sat(f.rhs, trace, j):
                return True
            if not oracle_sat(f.lhs, trace, j):
                return False
        return False
    raise TypeError(kind)


def all_traces(atoms, max_len):
    valuations = [
        frozenset(c for c, keep in zip(atoms, bits) if keep)
        for bits in itertools.product((False, True), repeat=len(atoms))
    ]
    for length in range(1, max_len + 1):
        yield from itertools.product(valuations, repeat=length)


def assert_fsa_matches_semantics(text, max_len=4):
    formula = parse(text)
    fsa = to_fsa(formula)
    atoms = sorted(fsa.atoms)
    for trace in all_traces(atoms, max_len):
        expected = oracle_sat(formula, trace)
        assert fsa.accepts_trace(trace) == expected, (text, trace)


class TestParse:
    def test_single_eventually(self):
        assert parse("F found1") == Eventually(Atom("found1"))

    def test_subject_fragment_rewrites_implication(self):
        got = parse("F found1 & ((found1 & !wind1) -> X quadres1)")
        expected = make_and(
            [
                Eventually(Atom("found1")),
                make_or(
                    [NotAtom("found1"), Atom("wind1"), Next(Atom("quadres1"))]
                ),
            ]
        )
        assert got == expected

    def test_negated_temporal_rejected(self):
        with pytest.raises(FormulaSyntaxError, match="negation restricted"):
            parse("!(F a)")

    def test_unbalanced_parens_rejected(self):
        with pytest.raises(FormulaSyntaxError, match="expected"):
            parse("(a & b")

    def test_error_carries_position(self):
        with pytest.raises(FormulaSyntaxError) as err:
            parse("a &\n& b")
        assert err.value.line == 2

    def test_top_and_negated_top(self):
        assert parse("T") == Top()
        assert parse("!T") == Bottom()

    def test_until_right_associative(self):
        assert parse("a U b U c") == Until(Atom("a"), Until(Atom("b"), Atom("c")))

    def test_precedence_unary_over_until_over_and_over_or(self):
        f = parse("F a U b & c | d")
        expected = make_or(
            [
                make_and([Until(Eventually(Atom("a")), Atom("b")), Atom("c")]),
                Atom("d"),
            ]
        )
        assert f == expected

    def test_implication_with_temporal_antecedent_rejected(self):
        with pytest.raises(FormulaSyntaxError, match="negation restricted"):
            parse("F a -> b")

    def test_roundtrip_reparses_identically(self):
        corpus = [
            "F found1",
            SUBJECT1,
            SUBJECT2,
            "a U (b & !c)",
            "X (a | b) & F c",
            "T",
            "!a | X X b",
            "(a U b) U c",
            "F (a & X b)",
        ]
        for text in corpus:
            ast = parse(text)
            assert parse(formula_text(ast)) == ast, text


class TestSemantics:
    def test_satisfies_matches_oracle_on_random_formulas(self):
        corpus = [
            "F a",
            "a U b",
            "X a",
            "X T",
            "F (X T)",
            "a & !b | c",
            "(a & !b) -> X c",
            "F (a & X b)",
            "(a U b) & F c",
        ]
        for text in corpus:
            f = parse(text)
            atoms = sorted({a for a in "abc" if a in text})
            for trace in all_traces(atoms, 3):
                assert satisfies(f, trace) == oracle_sat(f, trace), (text, trace)

    def test_empty_trace_rejected(self):
        with pytest.raises(ValueError):
            satisfies(parse("F a"), [])


class TestToFsa:
    def test_eventually_two_states(self):
        fsa = to_fsa(parse("F o"))
        assert fsa.num_states == 2
        assert len(fsa.accepting) == 1
        accept = next(iter(fsa.accepting))
        s0 = fsa.initial
        assert s0 != accept
        assert fsa.step(s0, {"o"}) == accept
        assert fsa.step(s0, set()) == s0
        # acceptance is absorbing
        assert fsa.step(accept, set()) == accept
        assert fsa.step(accept, {"o"}) == accept

    def test_top_single_accepting_state(self):
        fsa = to_fsa(parse("T"))
        assert fsa.num_states == 1
        assert fsa.initial in fsa.accepting

    def test_until_exhaustive_against_oracle(self):
        assert_fsa_matches_semantics("o1 U o2", max_len=4)

    def test_transition_function_total(self):
        fsa = to_fsa(parse(SUBJECT1))
        assert fsa.transitions.shape[1] == 2 ** len(fsa.atoms)
        assert np.all(fsa.transitions >= 0)
        assert np.all(fsa.transitions < fsa.num_states)

    def test_state_cap_enforced(self):
        with pytest.raises(StateExplosionError):
            to_fsa(parse("F (a & X (b & X (c & X d)))"), state_cap=3)

    def test_corpus_equivalence(self):
        for text in [
            "F a",
            "X T",
            "F (X T)",
            "a U (b U c)",
            "F (a & X b)",
            "(a & !b) -> X c",
            "F a & F b",
            "X X a",
            "a U b | b U a",
        ]:
            assert_fsa_matches_semantics(text, max_len=4)

    def test_subject_specs_equivalence_short_traces(self):
        # 5 atoms -> 32 valuations; keep the exhaustive depth small here
        assert_fsa_matches_semantics(SUBJECT1, max_len=2)
        assert_fsa_matches_semantics(SUBJECT2, max_len=3)

    def test_minimization_merges_equivalent_states(self):
        # F a | F a duplicated syntactically still yields the 2-state machine
        fsa = to_fsa(parse("F (a | a)"))
        assert fsa.num_states == 2


class TestAdvance:
    def test_accepting_absorbing(self):
        fsa = to_fsa(parse("F o"))
        advance(fsa, {"o"})
        assert fsa.is_accepting
        advance(fsa, set())
        assert fsa.is_accepting

    def test_subject1_quad_branch_accepts(self):
        fsa = to_fsa(parse(SUBJECT1))
        advance(fsa, {"found1"})
        assert not fsa.is_accepting
        advance(fsa, {"quadres1"})
        assert fsa.is_accepting

    def test_subject1_wind_blocks_quad_rescue(self):
        fsa = to_fsa(parse(SUBJECT1))
        advance(fsa, {"found1", "wind1"})
        assert not fsa.is_accepting
        advance(fsa, {"quadres1"})
        assert not fsa.is_accepting

    def test_subject1_wind_biped_branch_accepts(self):
        fsa = to_fsa(parse(SUBJECT1))
        advance(fsa, {"found1", "wind1"})
        advance(fsa, {"bipedres1"})
        assert fsa.is_accepting

    def test_subject1_wind_and_untraversable_vacuous_accept(self):
        # both rescue branches void: the spec is vacuously satisfied at the
        # found event; the mission layer must treat this as a failure
        fsa = to_fsa(parse(SUBJECT1))
        advance(fsa, {"found1", "wind1", "untrav1"})
        assert fsa.is_accepting

    def test_influential_atoms_single_robot_observation(self):
        fsa = to_fsa(parse(SUBJECT1))
        robot_atoms = {"found1", "quadres1", "bipedres1"}
        at_start = fsa.influential_atoms() & robot_atoms
        assert at_start == {"found1"}
        pending = fsa.clone().advance({"found1"})
        assert pending.influential_atoms() & robot_atoms == {"quadres1"}
        windy = fsa.clone().advance({"found1", "wind1"})
        assert windy.influential_atoms() & robot_atoms == {"bipedres1"}

    def test_unknown_atoms_in_valuation_ignored(self):
        fsa = to_fsa(parse("F o"))
        advance(fsa, {"other", "noise"})
        assert fsa.current == fsa.initial

    def test_clone_isolates_cursor(self):
        fsa = to_fsa(parse("F o"))
        clone = fsa.clone()
        advance(clone, {"o"})
        assert clone.is_accepting
        assert not fsa.is_accepting
