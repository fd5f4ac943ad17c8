"""Nearest, visible and proximal points of atoms.

For a vertex ``x`` with ``l(x) >= n``:

* ``N(x, B_n)`` are the points of ``B_n`` closest to ``x``;
* ``V(x, B)`` are the points ``p`` of ``B`` with ``d(p, x) < d(p, q) + d(q, x)``
  for every other ``q`` in ``B``;
* ``P(x, S_n)`` are the proximal points, computed inductively: successors of
  level ``k-1`` proximal points lying within ``4 delta + 2`` of every nearest
  neighbour at level ``k``.

``N <= V <= P`` and ``diam P <= 8 delta + 4``.  All three sets depend only on
the atom of ``x``, which is what makes the membership test work.
"""

from __future__ import annotations

import logging
from collections.abc import Iterable
from dataclasses import dataclass

import numpy as np

from horoboundary.atoms import Atom
from horoboundary.errors import InputFormatError, InsufficientRadiusError
from horoboundary.graph import LayeredGraph, all_geodesics

logger: logging.Logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ProximalData:
    """Nearest, visible and proximal sets of an atom at its level."""

    atom_id: tuple[int, int]
    level: int
    nearest: frozenset[int]
    visible: frozenset[int]
    proximal: frozenset[int]
    delta: int

    @property
    def sorted_proximal(self) -> list[int]:
        return sorted(self.proximal)


def proximity_bound(delta: int) -> int:
    return 4 * delta + 2


def _column(graph: LayeredGraph, x: int, n: int) -> np.ndarray:
    values, cert = graph.distance_block(n)
    if not cert[:, x].all():
        raise InsufficientRadiusError(f"distances from B_{n} to vertex {x} are not certified")
    return values[:, x].astype(np.int64)


def nearest_neighbors(graph: LayeredGraph, x: int, n: int) -> frozenset[int]:
    """Points of ``B_n`` closest to ``x``; for ``l(x) >= n`` they lie on ``S_n``."""
    if graph.length[x] < n:
        raise InputFormatError(f"vertex {x} lies inside B_{n}; nearest neighbours need l(x) >= n")
    column = _column(graph, x, n)
    return frozenset(int(v) for v in np.flatnonzero(column == column.min()))


def visible(graph: LayeredGraph, x: int, ball: Iterable[int]) -> frozenset[int]:
    """Points ``p`` of ``ball`` with ``d(p, x) < d(p, q) + d(q, x)`` for all other ``q``."""
    pts = np.array(sorted(set(ball)), dtype=np.int64)
    if len(pts) == 0:
        return frozenset()
    level = int(graph.length[pts].max())
    values, cert = graph.distance_block(level)
    if not cert[pts][:, pts].all() or not cert[pts, x].all():
        raise InsufficientRadiusError(f"visibility of {len(pts)} points from {x} is not certified")
    to_x = values[pts, x].astype(np.int64)
    detour = values[np.ix_(pts, pts)].astype(np.int64) + to_x[None, :]
    np.fill_diagonal(detour, np.iinfo(np.int64).max)
    return frozenset(int(p) for p in pts[to_x < detour.min(axis=1)])


def proximal_points(graph: LayeredGraph, x: int, n: int, delta: int) -> frozenset[int]:
    """``P(x, S_n)`` by the level-by-level inductive test."""
    bound = proximity_bound(delta)
    current = {graph.base_vertex}
    for k in range(1, n + 1):
        near = sorted(nearest_neighbors(graph, x, k))
        values, _ = graph.distance_block(k)
        candidates = sorted({u for p in current for u in graph.successors(p)})
        current = {
            c for c in candidates if int(values[c, near].max()) <= bound
        }
    return frozenset(current)


def proximal_by_enumeration(graph: LayeredGraph, x: int, n: int, delta: int) -> frozenset[int]:
    """``P(x, S_n)`` straight from the definition, enumerating every geodesic."""
    bound = proximity_bound(delta)
    values, _ = graph.distance_block(n)
    tracks: list[set[int]] = [set() for _ in range(n + 1)]
    for path in all_geodesics(graph, graph.base_vertex, x):
        for i in range(n + 1):
            tracks[i].add(path[i])
    found = set()
    for p in graph.sphere(n):
        for path in all_geodesics(graph, graph.base_vertex, int(p)):
            if all(
                int(values[path[i], sorted(tracks[i])].max()) <= bound for i in range(n + 1)
            ):
                found.add(int(p))
                break
    return frozenset(found)


def proximal_data(
    graph: LayeredGraph, atom: Atom, delta: int, witness: int | None = None
) -> ProximalData:
    """``N``, ``V`` and ``P`` of an atom, computed from one of its members."""
    n = atom.level
    x = int(atom.members[0]) if witness is None else witness
    if n == 0:
        base = frozenset({graph.base_vertex})
        return ProximalData(atom.id, 0, base, base, base, delta)
    near = nearest_neighbors(graph, x, n)
    return ProximalData(
        atom_id=atom.id,
        level=n,
        nearest=near,
        visible=visible(graph, x, range(graph.ball_size(n))),
        proximal=proximal_points(graph, x, n, delta),
        delta=delta,
    )


def diameter(graph: LayeredGraph, points: Iterable[int]) -> int:
    pts = sorted(points)
    if not pts:
        return 0
    values, _ = graph.distance_block(int(graph.length[pts].max()))
    return int(values[np.ix_(pts, pts)].max())


def membership_test(graph: LayeredGraph, x: int, atom: Atom, prox: ProximalData) -> bool:
    """Decide ``x in A`` from the cone condition at ``N(A)`` and agreement on ``P(A)``."""
    n = atom.level
    if graph.length[x] < n:
        return len(atom.members) == 1 and int(atom.members[0]) == x
    column = _column(graph, x, n)
    for p in prox.nearest:
        if graph.length[x] != graph.length[p] + column[p]:
            return False
    pts = prox.sorted_proximal
    reference = np.array([atom.profile.values[p] for p in pts], dtype=np.int64)
    gap = column[pts] - reference
    return bool(np.all(gap == gap[0]))


def check_monotonicity(
    graph: LayeredGraph, x: int, y: int, n: int, delta: int
) -> tuple[bool, int | None]:
    """If ``N(x, B_n) <= N(y, B_n)`` then ``P(y, S_n) <= P(x, S_n)``.

    Returns ``(True, None)`` when the implication holds, otherwise ``False``
    and a proximal point of ``y`` missing from ``P(x, S_n)``.
    """
    if not nearest_neighbors(graph, x, n) <= nearest_neighbors(graph, y, n):
        return True, None
    extra = proximal_points(graph, y, n, delta) - proximal_points(graph, x, n, delta)
    if extra:
        return False, min(extra)
    return True, None


def reconstruct_distance(graph: LayeredGraph, b: int, x: int, points: Iterable[int]) -> int:
    """``min_p d(b, p) + d(p, x)`` over the given points."""
    pts = sorted(points)
    level = int(graph.length[pts].max())
    values, _ = graph.distance_block(level)
    through = values[b, pts].astype(np.int64) + _column(graph, x, level)[pts]
    return int(through.min())
