"""Group elements acting on a ball as flag maps.

An element is stored as an *anchored flag*: the image of one anchor vertex
together with a port twist.  Port ``i`` at the anchor goes to port
``i + twist`` at the image.  The action on any other vertex follows by
transporting the flag along a ball geodesic from the anchor.  For the
built-in sources the orientation-preserving automorphism group acts simply
transitively on such flags, so an anchored flag *is* a group element.

Deep elements leave the ball when transported from the base vertex.  Use
:meth:`GroupElement.reanchored` to move the anchor next to the vertices you
care about.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from functools import reduce

from horoboundary.errors import InputFormatError, InsufficientRadiusError, UnsupportedSourceError
from horoboundary.graph import LayeredGraph

logger: logging.Logger = logging.getLogger(__name__)

_TOKEN = re.compile(r"\s*([A-Za-z])(?:\^(-?\d+))?\s*")


@dataclass(frozen=True)
class GroupElement:
    """An automorphism germ of the ball, given by an anchored flag."""

    graph: LayeredGraph = field(repr=False, compare=False)
    anchor: int
    image: int
    twist: int
    _flags: dict[int, tuple[int, int]] = field(
        default_factory=dict, repr=False, compare=False, hash=False
    )

    def __post_init__(self) -> None:
        object.__setattr__(self, "twist", self.twist % max(self.graph.degree, 1))
        self._flags[self.anchor] = (self.image, self.twist)

    def flag_at(self, v: int) -> tuple[int, int]:
        """Image of ``v`` and the port twist there."""
        if v in self._flags:
            return self._flags[v]
        graph = self.graph
        row = graph.distances_from(self.anchor)
        path = [v]
        while path[-1] not in self._flags:
            w = path[-1]
            step = next(
                (int(u) for u in graph.nbr[w] if u >= 0 and row[u] == row[w] - 1), None
            )
            if step is None:
                raise InsufficientRadiusError(f"no ball path from anchor {self.anchor} to {v}")
            path.append(step)
        deg = graph.degree
        for w, u in zip(reversed(path), reversed(path[:-1]), strict=False):
            img, c = self._flags[w]
            i = graph.port_to(w, u)
            j = (i + c) % deg
            img_u = int(graph.nbr[img, j])
            if img_u < 0:
                raise InsufficientRadiusError(
                    f"image of vertex {u} under flag ({self.anchor}->{self.image}) leaves "
                    f"the radius-{graph.radius} ball"
                )
            self._flags[u] = (img_u, int(graph.back[img, j] - graph.back[w, i]) % deg)
        return self._flags[v]

    def act(self, x: int) -> int:
        return self.flag_at(x)[0]

    def try_act(self, x: int) -> int | None:
        """Like :meth:`act` but returns None when the image is outside the ball."""
        try:
            return self.act(x)
        except InsufficientRadiusError:
            return None

    @property
    def magnitude(self) -> int:
        """``|g| = d(x0, g x0)``."""
        return int(self.graph.length[self.act(self.graph.base_vertex)])

    @property
    def base_flag(self) -> tuple[int, int]:
        return self.flag_at(self.graph.base_vertex)

    def reanchored(self, v: int) -> GroupElement:
        image, twist = self.flag_at(v)
        return GroupElement(self.graph, v, image, twist)

    def __str__(self) -> str:
        return f"<{self.anchor}->{self.image} twist {self.twist}>"


def identity(graph: LayeredGraph, anchor: int = 0) -> GroupElement:
    return GroupElement(graph, anchor, anchor, 0)


def compose(g: GroupElement, h: GroupElement) -> GroupElement:
    """The element acting as ``g(h(x))``; keeps the anchor of ``h``."""
    image, twist = g.flag_at(h.image)
    return GroupElement(h.graph, h.anchor, image, h.twist + twist)


def inverse(g: GroupElement) -> GroupElement:
    return GroupElement(g.graph, g.image, g.anchor, -g.twist)


def power(g: GroupElement, k: int) -> GroupElement:
    base = g if k >= 0 else inverse(g)
    return reduce(compose, [base] * abs(k), identity(g.graph))


def equal_on_ball(g: GroupElement, h: GroupElement, radius: int) -> bool:
    """True iff ``g`` and ``h`` move every vertex of ``B_radius`` to the same place."""
    for v in range(g.graph.ball_size(radius)):
        if g.act(v) != h.act(v):
            return False
    return True


def generators(graph: LayeredGraph) -> dict[str, GroupElement]:
    """The generators the source declares, anchored at the base vertex."""
    if not graph.source.has_group:
        raise UnsupportedSourceError(f"source {graph.source.name} carries no group action")
    return {
        name: GroupElement(graph, graph.base_vertex, image, twist)
        for name, (image, twist) in graph.source.generators(graph.ports).items()
    }


def parse_word(word: str) -> list[tuple[str, int]]:
    """Split ``"r s r^-1"`` (spaces optional) into ``(letter, exponent)`` pairs."""
    tokens: list[tuple[str, int]] = []
    pos = 0
    text = word.strip()
    while pos < len(text):
        match = _TOKEN.match(text, pos)
        if match is None or match.end() == pos:
            raise InputFormatError(f"cannot parse group word {word!r} at position {pos}")
        tokens.append((match.group(1), int(match.group(2) or 1)))
        pos = match.end()
    return tokens


def element_from_word(word: str, graph: LayeredGraph) -> GroupElement:
    """Evaluate a generator word; ``w1 w2 ... wk`` acts as ``w1(w2(...wk(x)))``."""
    gens = generators(graph)
    result = identity(graph)
    for letter, exponent in parse_word(word):
        if letter not in gens:
            raise InputFormatError(
                f"unknown generator {letter!r} for {graph.source.name}; "
                f"known: {', '.join(sorted(gens))}"
            )
        result = compose(result, power(gens[letter], exponent))
    return result


def check_relations(graph: LayeredGraph, radius: int) -> dict[str, bool]:
    """Evaluate every declared relation and compare it with the identity on ``B_radius``."""
    one = identity(graph)
    return {
        rel: equal_on_ball(element_from_word(rel, graph), one, radius)
        for rel in graph.source.relations()
    }


def allowed_twists(graph: LayeredGraph) -> range:
    """Port rotations realised by orientation-preserving automorphisms."""
    return range(graph.degree) if graph.symmetry == "cyclic" else range(1)


def stabilizer_flags(graph: LayeredGraph) -> list[GroupElement]:
    """Flag maps fixing the base vertex; for the {p,q} tiling this is <r>."""
    x0 = graph.base_vertex
    return [GroupElement(graph, x0, x0, c) for c in allowed_twists(graph)]
