"""Unit tests for nearest, visible and proximal points and the membership test."""

import random

import pytest

from horoboundary.atoms import AtomTree
from horoboundary.errors import InputFormatError
from horoboundary.graph import LayeredGraph, estimate_delta
from horoboundary.proximal import (
    check_monotonicity,
    diameter,
    membership_test,
    nearest_neighbors,
    proximal_by_enumeration,
    proximal_data,
    proximal_points,
    proximity_bound,
    reconstruct_distance,
    visible,
)


@pytest.mark.unit
class TestPointSets:
    def test_proximity_bound(self):
        assert proximity_bound(0) == 2
        assert proximity_bound(2) == 10

    def test_nearest_neighbour_of_a_deep_vertex(self, free_graph: LayeredGraph):
        child = free_graph.successors(1)[0]
        assert nearest_neighbors(free_graph, child, 1) == frozenset({1})

    def test_nearest_needs_an_outside_vertex(self, free_graph: LayeredGraph):
        with pytest.raises(InputFormatError):
            nearest_neighbors(free_graph, 0, 1)

    def test_only_the_ancestor_is_visible_in_a_tree(self, free_graph: LayeredGraph):
        child = free_graph.successors(1)[0]
        assert visible(free_graph, child, range(free_graph.ball_size(1))) == frozenset({1})

    def test_visible_of_empty_set(self, free_graph: LayeredGraph):
        assert visible(free_graph, 5, []) == frozenset()

    def test_tiling_has_visible_points_that_are_not_nearest(self, tiling_graph: LayeredGraph):
        found = []
        for x in tiling_graph.sphere(4):
            x = int(x)
            near = nearest_neighbors(tiling_graph, x, 2)
            seen = visible(tiling_graph, x, range(tiling_graph.ball_size(2)))
            assert near <= seen, f"vertex {x}"
            if seen - near:
                found.append(x)
        assert found

    def test_proximal_points_of_a_branch(self, free_graph: LayeredGraph):
        x = free_graph.successors(free_graph.successors(1)[0])[0]
        assert proximal_points(free_graph, x, 1, 0) == frozenset({1, 2, 3, 4})
        assert proximal_points(free_graph, x, 2, 0) == frozenset(free_graph.successors(1))

    @pytest.mark.parametrize("n", [1, 2])
    def test_induction_matches_enumeration(self, free_graph: LayeredGraph, n):
        for x in free_graph.sphere(3)[::7]:
            x = int(x)
            assert proximal_points(free_graph, x, n, 0) == proximal_by_enumeration(
                free_graph, x, n, 0
            ), f"vertex {x} at level {n}"


@pytest.mark.unit
class TestProximalData:
    def test_root_data_is_the_base_vertex(self, free_tree: AtomTree):
        data = proximal_data(free_tree.graph, free_tree.root, 0)
        assert data.nearest == data.visible == data.proximal == frozenset({0})

    def test_inclusions_and_diameter(self, free_tree: AtomTree):
        graph = free_tree.graph
        for level in free_tree.levels[1:]:
            for atom in level:
                data = proximal_data(graph, atom, 0)
                assert data.nearest <= data.visible <= data.proximal, f"atom {atom.id}"
                assert diameter(graph, data.proximal) <= 4

    def test_data_does_not_depend_on_the_member(self, free_tree: AtomTree):
        graph = free_tree.graph
        atom = free_tree.levels[2][3]
        a = proximal_data(graph, atom, 0)
        b = proximal_data(graph, atom, 0, witness=int(atom.members[-1]))
        assert (a.nearest, a.visible, a.proximal) == (b.nearest, b.visible, b.proximal)

    def test_sorted_proximal(self, free_tree: AtomTree):
        data = proximal_data(free_tree.graph, free_tree.levels[1][0], 0)
        assert data.sorted_proximal == [1, 2, 3, 4]


@pytest.mark.unit
class TestMembershipAndReconstruction:
    def test_membership_agrees_with_labels(self, free_tree: AtomTree):
        graph = free_tree.graph
        labels = free_tree.partitions[2].labels
        for atom in free_tree.levels[2]:
            data = proximal_data(graph, atom, 0)
            for x in graph.sphere(3):
                x = int(x)
                expected = labels[x] == atom.index
                assert membership_test(graph, x, atom, data) == expected, (
                    f"vertex {x} vs atom {atom.id}"
                )

    def test_inner_vertex_is_only_in_its_singleton(self, free_tree: AtomTree):
        graph = free_tree.graph
        atom = free_tree.levels[2][0]
        assert not membership_test(graph, 0, atom, proximal_data(graph, atom, 0))

    def test_distances_reconstruct_through_proximal_points(self, free_tree: AtomTree):
        graph = free_tree.graph
        for atom in free_tree.levels[2]:
            data = proximal_data(graph, atom, 0)
            x = int(atom.members[-1])
            row = graph.distances_from(x)
            for b in range(graph.ball_size(2)):
                assert reconstruct_distance(graph, b, x, data.proximal) == row[b]

    def test_monotonicity_within_an_atom(self, free_tree: AtomTree):
        atom = free_tree.levels[1][2]
        x, y = int(atom.members[0]), int(atom.members[-1])
        assert check_monotonicity(free_tree.graph, x, y, 1, 0) == (True, None)

    def test_monotonicity_on_tiling_descendants(self, tiling_graph: LayeredGraph):
        rng = random.Random(0)
        delta = estimate_delta(tiling_graph, 2)
        for _ in range(200):
            n = rng.randint(1, 2)
            x = int(rng.choice(tiling_graph.sphere(rng.randint(n + 1, 4))))
            y = x
            for _ in range(rng.randint(0, 6 - int(tiling_graph.length[x]))):
                y = rng.choice(tiling_graph.successors(y))
            assert nearest_neighbors(tiling_graph, x, n) <= nearest_neighbors(tiling_graph, y, n)
            assert check_monotonicity(tiling_graph, x, y, n, delta) == (True, None), (x, y, n)
