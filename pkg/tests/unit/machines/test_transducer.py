"""Unit tests for asynchronous transducers, built from the hand-made {4,5} machines."""

import pytest

from horoboundary import golden
from horoboundary.classify import TypeGraph
from horoboundary.errors import (
    AlphabetMismatchError,
    InputFormatError,
    InputRejectedError,
    NonBranchingError,
)
from horoboundary.selfsimilar import PrefixCode, binary_address, canonical_code
from horoboundary.transducer import (
    BINARY,
    AsyncTransducer,
    State,
    bounded_equivalent,
    compose,
    evaluate,
    expand_transducer,
    export_transducer,
    identity_transducer,
    lipschitz_violations,
    minimize,
    nondegeneracy_violations,
    parse_transducer,
    power,
    to_binary,
    type_violations,
    valid_words,
)

TERNARY = TypeGraph("T", {"T": ("T", "T", "T")})


def _reverse_ternary() -> AsyncTransducer:
    """Stateless machine sending slot i to slot 2 - i."""
    return AsyncTransducer(
        TERNARY,
        {"q": State("q", "T", "T")},
        "q",
        {("q", i): ("q", (2 - i,)) for i in range(3)},
    )


@pytest.mark.unit
class TestEvaluation:
    def test_rotation_shifts_the_first_slot(self, r_machine: AsyncTransducer):
        assert evaluate(r_machine, (0, 1, 1)) == (2, 1, 1)
        assert evaluate(r_machine, (9, 0)) == (1, 0)

    def test_flip_rewrites_a_gamma_branch(self, s_machine: AsyncTransducer):
        assert evaluate(s_machine, (3, 0, 1)) == (9, 2, 0, 1)

    def test_flip_rewrites_a_beta_branch(self, s_machine: AsyncTransducer):
        assert evaluate(s_machine, (4, 2)) == (0, 0, 2)

    def test_flip_may_delay_output(self, s_machine: AsyncTransducer):
        assert evaluate(s_machine, (0,)) == ()
        assert evaluate(s_machine, (0, 0)) == (4,)

    def test_illegal_slot_is_rejected(self, r_machine: AsyncTransducer):
        with pytest.raises(InputRejectedError):
            evaluate(r_machine, (10,))

    def test_illegal_slot_deeper_down(self, s_machine: AsyncTransducer):
        with pytest.raises(InputRejectedError, match="type D"):
            evaluate(s_machine, (1, 1, 2))

    def test_run_reports_final_state(self, s_machine: AsyncTransducer):
        assert s_machine.run((2, 0, 0)) == ("f", (9, 0, 0))

    def test_reachable_is_breadth_first(self, r_machine: AsyncTransducer):
        assert r_machine.reachable() == ["r", "id_B", "id_C", "id_D"]

    def test_valid_words(self):
        words = list(valid_words(golden.TYPE_GRAPH, "C", 2))
        assert words == [(0, 0), (0, 1), (0, 2), (1, 0), (2, 0), (2, 1), (2, 2)]


@pytest.mark.unit
class TestAlgebra:
    def test_rotation_has_order_five(self, r_machine: AsyncTransducer):
        one = identity_transducer(golden.TYPE_GRAPH)
        assert bounded_equivalent(power(r_machine, 5), one, 6)
        assert not bounded_equivalent(power(r_machine, 4), one, 1)

    def test_flip_is_an_involution(self, s_machine: AsyncTransducer):
        one = identity_transducer(golden.TYPE_GRAPH)
        assert bounded_equivalent(compose(s_machine, s_machine), one, 6)

    def test_composition_applies_the_first_machine_first(
        self, r_machine: AsyncTransducer, s_machine: AsyncTransducer
    ):
        word = (3, 0, 1)
        both = compose(s_machine, r_machine)
        assert evaluate(both, word) == evaluate(r_machine, evaluate(s_machine, word))

    def test_composed_state_ids(self, r_machine: AsyncTransducer):
        assert compose(r_machine, r_machine).initial == "r/r"

    def test_different_graphs_do_not_compose(self, r_machine: AsyncTransducer):
        with pytest.raises(AlphabetMismatchError):
            compose(r_machine, identity_transducer(BINARY))

    def test_negative_power_raises(self, r_machine: AsyncTransducer):
        with pytest.raises(InputFormatError):
            power(r_machine, -1)

    def test_equivalence_is_symmetric_for_lagging_machines(self, s_machine: AsyncTransducer):
        one = identity_transducer(golden.TYPE_GRAPH)
        flip_twice = compose(s_machine, s_machine)
        assert bounded_equivalent(one, flip_twice, 6)

    def test_silent_machine_is_not_the_identity(self):
        one = identity_transducer(golden.TYPE_GRAPH)
        silent = _muted(one, keep=set())
        assert evaluate(silent, (0, 0, 0)) == ()
        assert not bounded_equivalent(silent, one, 8)
        assert not bounded_equivalent(one, silent, 8)

    def test_machine_that_stops_writing_is_caught(self, r_machine: AsyncTransducer):
        truncated = _muted(r_machine, keep={"r"})
        assert evaluate(truncated, (0, 1, 1)) == (2,)
        assert not bounded_equivalent(truncated, r_machine, 8)


def _muted(t: AsyncTransducer, keep: set[str]) -> AsyncTransducer:
    """Copy of ``t`` writing nothing except from the states in ``keep``."""
    transitions = {
        (q, slot): (target, word if q in keep else ())
        for (q, slot), (target, word) in t.transitions.items()
    }
    return AsyncTransducer(t.type_graph, t.states, t.initial, transitions)


@pytest.mark.unit
class TestMinimize:
    def test_golden_machines_are_already_minimal(
        self, r_machine: AsyncTransducer, s_machine: AsyncTransducer
    ):
        assert len(minimize(r_machine).states) == 4
        assert len(minimize(s_machine).states) == golden.S_CLASS_COUNT

    def test_identity_squared_collapses(self):
        twice = compose(identity_transducer(BINARY), identity_transducer(BINARY))
        small = minimize(twice)
        assert len(small.states) == 1
        assert bounded_equivalent(small, identity_transducer(BINARY), 5)

    def test_minimized_machine_is_equivalent(self, s_machine: AsyncTransducer):
        flip_twice = compose(s_machine, s_machine)
        assert bounded_equivalent(minimize(flip_twice), flip_twice, 6)


@pytest.mark.unit
class TestAudits:
    def test_golden_machines_respect_types(
        self, r_machine: AsyncTransducer, s_machine: AsyncTransducer
    ):
        assert type_violations(r_machine) == []
        assert type_violations(s_machine) == []

    def test_wrong_target_type_is_reported(self):
        rows = dict(golden.R_ROWS)
        rows["r"] = ("A", "A", [("id_C", str((i + 2) % 10)) for i in range(10)])
        problems = type_violations(golden.machine(rows, "r"))
        assert any("expected B" in p for p in problems)

    def test_golden_flip_is_nondegenerate(self, s_machine: AsyncTransducer):
        assert nondegeneracy_violations(s_machine) == []

    def test_silent_loop_is_degenerate(self):
        machine = AsyncTransducer(
            BINARY,
            {"q": State("q", "X", "X")},
            "q",
            {("q", 0): ("q", ()), ("q", 1): ("q", (1,))},
        )
        problems = nondegeneracy_violations(machine)
        assert problems and "silent cycle" in problems[0]

    def test_flip_lag_is_bounded_by_one(self, s_machine: AsyncTransducer):
        assert lipschitz_violations(s_machine, 1, 6) == []
        assert lipschitz_violations(s_machine, 0, 6) != []


@pytest.mark.unit
class TestBinaryConjugate:
    def test_reverse_on_a_ternary_code(self):
        code = PrefixCode({"T": ("00", "01", "1")})
        binary = to_binary(_reverse_ternary(), code)
        assert len(binary.states) == 2
        assert evaluate(binary, (0, 0)) == (1,)
        assert evaluate(binary, (0, 1)) == (0, 1)
        assert evaluate(binary, (1,)) == (0, 0)

    def test_binary_conjugate_of_rotation(self, r_machine: AsyncTransducer):
        code = canonical_code(golden.TYPE_GRAPH)
        binary = to_binary(r_machine, code)
        for word in [(0, 1, 0), (8, 2, 2), (3, 1, 0)]:
            bits = tuple(int(b) for b in binary_address(word, golden.TYPE_GRAPH, code))
            image = tuple(int(b) for b in binary_address(evaluate(r_machine, word),
                                                         golden.TYPE_GRAPH, code))
            assert evaluate(binary, bits) == image, f"word {word}"

    def test_isolated_types_must_be_expanded(self):
        dangling = TypeGraph("A", {"A": ("B", "B"), "B": ("B",)})
        with pytest.raises(NonBranchingError):
            to_binary(identity_transducer(dangling), PrefixCode({"A": ("0", "1")}))


FORKED = TypeGraph("A", {"A": ("B", "C"), "B": ("B",), "C": ("C",)})


def _swap_forked(b_row: tuple[str, str, tuple[int, ...]]) -> AsyncTransducer:
    """Machine on ``FORKED`` whose B branch is handled by the state ``b``."""
    b_target = b_row[1]
    states = {
        "q": State("q", "A", "A"),
        "b": State("b", "B", b_row[0]),
        "b2": State("b2", "B", "C"),
        "c": State("c", "C", "B"),
    }
    return AsyncTransducer(
        FORKED,
        states,
        "q",
        {
            ("q", 0): ("b", ()),
            ("q", 1): ("c", (0,)),
            ("b", 0): (b_target, b_row[2]),
            ("b2", 0): ("b2", (0,)),
            ("c", 0): ("c", (0,)),
        },
    )


@pytest.mark.unit
class TestExpandTransducer:
    def test_branching_machine_is_unchanged(self, r_machine: AsyncTransducer):
        assert expand_transducer(r_machine) is r_machine

    def test_isolated_branches_become_one_binary_type(self):
        lifted = expand_transducer(_swap_forked(("A", "b2", (1,))))
        assert lifted.type_graph.children == {"A": ("D", "D"), "D": ("D", "D")}
        assert set(lifted.states) == {"q", "id_D"}
        assert type_violations(lifted) == []

    def test_delayed_output_is_completed_by_the_forced_tail(self):
        lifted = expand_transducer(_swap_forked(("A", "b2", (1,))))
        assert evaluate(lifted, (0, 1)) == (1, 1)
        assert evaluate(lifted, (1, 0)) == (0, 0)
        to_binary(lifted, canonical_code(lifted.type_graph))

    def test_isolated_input_with_branching_image_raises(self):
        with pytest.raises(NonBranchingError, match="isolated branch"):
            expand_transducer(_swap_forked(("A", "b", ())))

    def test_isolated_root_gives_the_identity(self):
        line = TypeGraph("A", {"A": ("A",)})
        lifted = expand_transducer(identity_transducer(line))
        assert lifted.type_graph.root == lifted.type_graph.children[lifted.type_graph.root][0]
        assert len(lifted.states) == 1


@pytest.mark.unit
class TestExport:
    def test_text_round_trip(self, s_machine: AsyncTransducer):
        text = export_transducer(s_machine, "text")
        assert "trans s 0 s0 -\n" in text
        assert "trans s 3 id_C 9.2\n" in text
        parsed = parse_transducer(text)
        assert parsed.states == s_machine.states
        assert parsed.transitions == s_machine.transitions

    def test_dot_marks_empty_outputs(self, s_machine: AsyncTransducer):
        dot = export_transducer(s_machine, "dot")
        assert "digraph transducer" in dot
        assert "0|ε" in dot

    def test_unknown_format_raises(self, r_machine: AsyncTransducer):
        with pytest.raises(InputFormatError):
            export_transducer(r_machine, "svg")

    def test_parse_requires_init(self):
        with pytest.raises(InputFormatError, match="init"):
            parse_transducer("root X\ntype X\nchild 0 X\nchild 1 X\nstate q X X\n")

    def test_parse_rejects_undeclared_targets(self):
        text = "root X\ntype X\nchild 0 X\nchild 1 X\nstate q X X\ninit q\ntrans q 0 p 0\n"
        with pytest.raises(InputFormatError, match="undeclared"):
            parse_transducer(text)
