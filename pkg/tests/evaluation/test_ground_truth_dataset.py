"""Structural validation of the boundary-rule ground truth dataset.

These tests build no ball.  They assert that the dataset itself is internally
consistent, so that a failure in the scoring suite points at the machines
rather than at a typo in a rule.
"""

import pytest

from horoboundary import golden
from tests.evaluation.ground_truth import GROUND_TRUTH


@pytest.mark.evaluation
class TestGroundTruthDatasetSize:
    def test_dataset_meets_minimum_size(self) -> None:
        assert len(GROUND_TRUTH) >= 25, (
            f"Ground truth has {len(GROUND_TRUTH)} cases; minimum is 25."
        )

    def test_all_case_ids_are_unique(self) -> None:
        ids = [c.case_id for c in GROUND_TRUTH]
        assert len(ids) == len(set(ids)), "Duplicate case_id values found in GROUND_TRUTH."


@pytest.mark.evaluation
class TestGroundTruthCategories:
    REQUIRED_CATEGORIES = {"rotation", "flip", "delayed"}

    def test_all_categories_present(self) -> None:
        missing = self.REQUIRED_CATEGORIES - {c.category for c in GROUND_TRUTH}
        assert not missing, f"Missing categories: {missing}"

    def test_rotation_covers_every_root_slot(self) -> None:
        heads = {c.head for c in GROUND_TRUTH if c.category == "rotation"}
        assert heads == {(i,) for i in range(10)}

    def test_delayed_cases_are_flips(self) -> None:
        for case in GROUND_TRUTH:
            if case.category == "delayed":
                assert case.element == "s", f"{case.case_id}: delayed rule on {case.element}"


@pytest.mark.evaluation
class TestGroundTruthPaths:
    """Heads, images and tail types must be legal paths in the reference type graph."""

    @staticmethod
    def _walk(slots: tuple[int, ...]) -> str:
        current = golden.TYPE_GRAPH.root
        for slot in slots:
            current = golden.TYPE_GRAPH.child_type(current, slot)
        return current

    def test_head_ends_at_the_tail_type(self) -> None:
        for case in GROUND_TRUTH:
            assert self._walk(case.head) == case.tail_type, (
                f"{case.case_id}: head {case.head} does not end at type {case.tail_type}."
            )

    def test_image_ends_at_the_tail_type(self) -> None:
        for case in GROUND_TRUTH:
            assert self._walk(case.image) == case.tail_type, (
                f"{case.case_id}: image {case.image} does not end at type {case.tail_type}."
            )
