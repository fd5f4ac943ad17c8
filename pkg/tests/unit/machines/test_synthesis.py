"""Unit tests for image atoms and transducer synthesis on the free group tree."""

import pytest

from horoboundary.atoms import AtomTree
from horoboundary.classify import Classification
from horoboundary.errors import InputFormatError
from horoboundary.group import element_from_word, generators, identity, inverse
from horoboundary.selfsimilar import RigidStructure
from horoboundary.synthesis import (
    ActionSynthesizer,
    MappingTripleSignature,
    image_atom,
    image_path,
    synthesize,
    synthesize_action_transducer,
)
from horoboundary.transducer import (
    bounded_equivalent,
    evaluate,
    identity_transducer,
    nondegeneracy_violations,
    type_violations,
)


@pytest.mark.unit
class TestImageAtoms:
    def test_identity_fixes_every_atom(self, free_tree: AtomTree):
        one = identity(free_tree.graph)
        for atom in free_tree.levels[2]:
            img = image_atom(one, free_tree, atom)
            assert img is not None and img.atom.id == atom.id, f"atom {atom.id}"

    def test_root_image_is_the_root(self, free_tree: AtomTree):
        a = generators(free_tree.graph)["a"]
        img = image_atom(a, free_tree, free_tree.root)
        assert img is not None
        assert img.atom.id == free_tree.root.id
        assert not img.saturated

    def test_translation_pushes_its_own_branch_deeper(self, free_tree: AtomTree):
        a = generators(free_tree.graph)["a"]
        first = free_tree.chain((0,))[-1]
        img = image_atom(a, free_tree, first)
        assert img is not None
        assert img.atom.level == 2

    def test_image_path_of_identity(self, free_tree: AtomTree):
        one = identity(free_tree.graph)
        assert image_path(one, free_tree, (1, 2)) == (1, 2)


@pytest.mark.unit
class TestSynthesize:
    def test_identity_needs_one_state_per_type(
        self,
        free_tree: AtomTree,
        free_classification: Classification,
        free_rigid: RigidStructure,
    ):
        result = synthesize(identity(free_tree.graph), free_tree, free_classification, free_rigid)
        machine = result.transducer
        assert len(machine.states) == 2
        assert bounded_equivalent(machine, identity_transducer(machine.type_graph), 3)

    def test_signatures_are_recorded(
        self,
        free_tree: AtomTree,
        free_classification: Classification,
        free_rigid: RigidStructure,
    ):
        a = generators(free_tree.graph)["a"]
        result = synthesize(a, free_tree, free_classification, free_rigid)
        assert set(result.signatures) == set(result.transducer.states)
        assert result.signatures["q0"].in_type == "A"
        assert result.expanded_at["q0"] == free_tree.root.id

    def test_generator_machines_pass_their_audits(self, free_synthesizer: ActionSynthesizer):
        for name in ("a", "b"):
            for sign in (1, -1):
                machine = free_synthesizer.letter(name, sign)
                assert type_violations(machine) == [], f"{name}^{sign}"
                assert nondegeneracy_violations(machine) == [], f"{name}^{sign}"

    def test_machine_agrees_with_direct_images(
        self, free_tree: AtomTree, free_synthesizer: ActionSynthesizer
    ):
        a = generators(free_tree.graph)["a"]
        machine = free_synthesizer.letter("a")
        for length in (1, 2):
            for slots in free_tree.chains(length):
                expected = image_path(a, free_tree, slots)
                if expected is not None:
                    assert evaluate(machine, slots) == expected, f"chain {slots}"

    def test_wrapper_builds_the_rigid_structure(
        self, free_tree: AtomTree, free_classification: Classification
    ):
        b = generators(free_tree.graph)["b"]
        machine = synthesize_action_transducer(b, free_tree, free_classification)
        assert type_violations(machine) == []


@pytest.mark.unit
class TestActionSynthesizer:
    def test_unknown_letter_raises(self, free_synthesizer: ActionSynthesizer):
        with pytest.raises(InputFormatError, match="unknown generator"):
            free_synthesizer.letter("x")

    def test_letters_are_cached(self, free_synthesizer: ActionSynthesizer):
        assert free_synthesizer.letter("a") is free_synthesizer.letter("a")

    def test_word_and_its_inverse_cancel(self, free_synthesizer: ActionSynthesizer):
        one = identity_transducer(free_synthesizer.classification.type_graph)
        assert bounded_equivalent(free_synthesizer.word("a A"), one, 3)
        assert bounded_equivalent(free_synthesizer.word("b b^-1"), one, 3)

    def test_inverse_letter_matches_inverse_element(
        self, free_tree: AtomTree, free_synthesizer: ActionSynthesizer
    ):
        a = generators(free_tree.graph)["a"]
        direct = free_synthesizer.transducer(inverse(a))
        assert bounded_equivalent(direct, free_synthesizer.letter("a", -1), 3)

    def test_single_letter_element_is_the_letter(self, free_synthesizer: ActionSynthesizer):
        assert bounded_equivalent(free_synthesizer.element("a"), free_synthesizer.letter("a"), 3)

    def test_product_element_agrees_with_direct_images(
        self, free_tree: AtomTree, free_synthesizer: ActionSynthesizer
    ):
        machine = free_synthesizer.element("a b")
        assert type_violations(machine) == []
        ab = element_from_word("a b", free_tree.graph)
        for slots in free_tree.chains(2):
            expected = image_path(ab, free_tree, slots)
            if expected is None:
                continue
            got = evaluate(machine, slots)
            n = min(len(got), len(expected))
            assert got[:n] == expected[:n], f"chain {slots}: {got} vs {expected}"

    def test_free_group_has_no_relations_to_audit(self, free_synthesizer: ActionSynthesizer):
        assert free_synthesizer.relation_audit(3) == {}


@pytest.mark.unit
class TestSignature:
    def test_string_form(self):
        key = MappingTripleSignature("B", "C", -1, (4, 1))
        assert str(key) == "B>C lag -1 flag (4, 1)"
