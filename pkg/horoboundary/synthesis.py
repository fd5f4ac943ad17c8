"""Synthesis of the transducer that realises a group element on the boundary.

For a tree atom ``A`` the *image atom* ``D(A)`` is the deepest tree atom that
contains ``g`` applied to the members of ``A`` (members within a fixed
relative window).  Image atoms are computed top-down, each one inside the
image of the parent, so reading the chain ending at ``A`` has written exactly
the slot path of ``D(A)``.

The state of ``A`` is its :class:`MappingTripleSignature`: the types of ``A``
and ``D(A)``, the level lag between them, and the flag of
``psi_D g psi_A^-1`` on the representative of ``A``'s type.  Under the rigid
structure, atoms with equal signatures have identical restrictions, so one
expanded atom per signature defines the transitions.

Atoms whose image could lie below the deepest tree level are *saturated* and
are never used for expansion.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from horoboundary.atoms import Atom, AtomTree
from horoboundary.classify import Classification
from horoboundary.errors import AuditError, InputFormatError, SynthesisDivergedError
from horoboundary.group import (
    GroupElement,
    compose,
    element_from_word,
    generators,
    inverse,
    parse_word,
)
from horoboundary.selfsimilar import RigidStructure, build_rigid_structure
from horoboundary.transducer import (
    AsyncTransducer,
    State,
    Word,
    bounded_equivalent,
    identity_transducer,
)
from horoboundary.transducer import compose as compose_transducers

logger: logging.Logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MappingTripleSignature:
    """State key of a mapping triple ``(g, A, D(A))``."""

    in_type: str
    out_type: str
    lag: int
    flag: tuple[int, int]

    def __str__(self) -> str:
        return f"{self.in_type}>{self.out_type} lag {self.lag} flag {self.flag}"


@dataclass(frozen=True)
class ImageAtom:
    atom: Atom
    saturated: bool


def _image_points(g: GroupElement, tree: AtomTree, atom: Atom, window: int) -> np.ndarray:
    images = (g.try_act(int(v)) for v in atom.members_within(tree.graph, window))
    return np.array([y for y in images if y is not None], dtype=np.int64)


def image_atom(
    g: GroupElement, tree: AtomTree, atom: Atom, window: int = 3, floor: Atom | None = None
) -> ImageAtom | None:
    """Deepest tree atom containing the image of ``atom``, searched below ``floor``.

    Without ``floor`` the search starts at the root, which makes this the
    direct (non-incremental) computation.  Returns None when no member image
    is known.

    Raises:
        AuditError: if the images are not inside ``floor``.
    """
    pts = _image_points(g, tree, atom, window)
    if len(pts) == 0:
        return None
    start = tree.root if floor is None else floor
    best: Atom | None = None
    for k in range(start.level, tree.depth + 1):
        labels = tree.partitions[k].labels[pts]
        labels = labels[labels >= 0]
        if len(labels) == 0 or np.any(labels != labels[0]):
            break
        candidate = tree.partitions[k].atoms[int(labels[0])]
        if not tree.contains(candidate):
            break
        best = candidate
    if best is None or (floor is not None and best.level == floor.level and best.id != floor.id):
        if floor is None:
            return None
        raise AuditError(f"image of atom {atom.id} leaves the image {floor.id} of its parent")
    saturated = best.level == tree.depth and int(tree.graph.length[pts].min()) > tree.depth
    return ImageAtom(best, saturated)


@dataclass
class Synthesis:
    """A synthesized machine and the signature behind each state."""

    transducer: AsyncTransducer
    signatures: dict[str, MappingTripleSignature] = field(default_factory=dict)
    expanded_at: dict[str, tuple[int, int]] = field(default_factory=dict)


def _relative_path(tree: AtomTree, outer: Atom, inner: Atom) -> Word:
    return tree.slot_path(inner)[outer.level :]


def synthesize(
    g: GroupElement,
    tree: AtomTree,
    classification: Classification,
    rigid: RigidStructure,
    window: int = 3,
    state_bound: int = 500,
) -> Synthesis:
    """BFS over tree atoms, merging atoms with equal signatures into one state.

    Raises:
        SynthesisDivergedError: if some reachable signature is never expanded
            or the state count exceeds ``state_bound``.
        AuditError: if two atoms with one signature disagree on a transition.
    """
    graph = tree.graph
    images: dict[tuple[int, int], ImageAtom | None] = {
        tree.root.id: image_atom(g, tree, tree.root, window)
    }
    for level in tree.levels[: tree.depth]:
        for atom in level:
            parent = images[atom.id]
            for child in tree.children(atom):
                images[child.id] = (
                    None
                    if parent is None or parent.saturated
                    else image_atom(g, tree, child, window, floor=parent.atom)
                )

    keys: dict[tuple[int, int], MappingTripleSignature | None] = {}

    def key_of(atom: Atom) -> MappingTripleSignature | None:
        if atom.id not in keys:
            img = images.get(atom.id)
            if img is None or img.saturated:
                keys[atom.id] = None
            else:
                d = img.atom
                conj = compose(rigid.marking(d), compose(g, inverse(rigid.marking(atom))))
                rep = classification.representatives[classification.type_of(atom)]
                flag = conj.reanchored(int(rep.min_members(graph)[0]))
                keys[atom.id] = MappingTripleSignature(
                    classification.type_of(atom),
                    classification.type_of(d),
                    atom.level - d.level,
                    (flag.image, flag.twist),
                )
        return keys[atom.id]

    rows: dict[MappingTripleSignature, list[tuple[MappingTripleSignature, Word]]] = {}
    where: dict[MappingTripleSignature, tuple[int, int]] = {}
    for level in tree.levels[: tree.depth]:
        for atom in level:
            key = key_of(atom)
            kids = tree.children(atom)
            if key is None or any(key_of(kid) is None for kid in kids):
                continue
            d = images[atom.id]
            assert d is not None
            row = []
            for kid in kids:
                kid_key, kid_img = key_of(kid), images[kid.id]
                assert kid_key is not None and kid_img is not None
                row.append((kid_key, _relative_path(tree, d.atom, kid_img.atom)))
            if key not in rows:
                rows[key], where[key] = row, atom.id
            elif rows[key] != row:
                raise AuditError(
                    f"atoms {where[key]} and {atom.id} share signature {key} but transition "
                    "differently"
                )

    initial = key_of(tree.root)
    if initial is None:
        raise SynthesisDivergedError(f"image of the root under {g} is not determined in the ball")
    names = {initial: "q0"}
    queue = deque([initial])
    unresolved: list[object] = []
    while queue:
        key = queue.popleft()
        if key not in rows:
            unresolved.append(str(key))
            continue
        for kid_key, _ in rows[key]:
            if kid_key not in names:
                names[kid_key] = f"q{len(names)}"
                queue.append(kid_key)
        if len(names) > state_bound:
            raise SynthesisDivergedError(
                f"more than {state_bound} states for {g}", [str(k) for k in queue]
            )
    if unresolved:
        raise SynthesisDivergedError(
            f"{len(unresolved)} signature(s) never expanded for {g}; "
            "increase the tree depth or the radius",
            unresolved,
        )

    states = {name: State(name, key.in_type, key.out_type) for key, name in names.items()}
    transitions = {
        (names[key], slot): (names[kid_key], word)
        for key in names
        for slot, (kid_key, word) in enumerate(rows[key])
    }
    machine = AsyncTransducer(classification.type_graph, states, "q0", transitions)
    logger.info(
        "Synthesized transducer",
        extra={"element": str(g), "states": len(states), "signatures_seen": len(rows)},
    )
    return Synthesis(
        machine,
        {name: key for key, name in names.items()},
        {name: where[key] for key, name in names.items()},
    )


def synthesize_action_transducer(
    g: GroupElement,
    tree: AtomTree,
    classification: Classification,
    rigid: RigidStructure | None = None,
    window: int = 3,
    state_bound: int = 500,
) -> AsyncTransducer:
    if rigid is None:
        rigid = build_rigid_structure(tree, classification, window)
    return synthesize(g, tree, classification, rigid, window, state_bound).transducer


def image_path(
    g: GroupElement, tree: AtomTree, slots: tuple[int, ...], window: int = 3
) -> Word | None:
    """Slot path of the image atom of the chain end, computed directly from the root."""
    img = image_atom(g, tree, tree.chain(slots)[-1], window)
    return None if img is None or img.saturated else tree.slot_path(img.atom)


class ActionSynthesizer:
    """Caches generator transducers and builds machines for group words."""

    def __init__(
        self,
        tree: AtomTree,
        classification: Classification,
        rigid: RigidStructure | None = None,
        window: int = 3,
        state_bound: int = 500,
    ) -> None:
        self.tree = tree
        self.classification = classification
        self.rigid = rigid or build_rigid_structure(tree, classification, window)
        self.window = window
        self.state_bound = state_bound
        self._generators = generators(tree.graph)
        self._cache: dict[tuple[str, int], AsyncTransducer] = {}

    def transducer(self, g: GroupElement) -> AsyncTransducer:
        return synthesize(
            g, self.tree, self.classification, self.rigid, self.window, self.state_bound
        ).transducer

    def letter(self, name: str, sign: int = 1) -> AsyncTransducer:
        if name not in self._generators:
            raise InputFormatError(f"unknown generator {name!r}")
        if (name, sign) not in self._cache:
            g = self._generators[name]
            self._cache[name, sign] = self.transducer(g if sign > 0 else inverse(g))
        return self._cache[name, sign]

    def element(self, word: str) -> AsyncTransducer:
        """Machine of a group word, synthesized directly when the tree allows it.

        A long element moves atoms further than a shallow tree can see, so
        direct synthesis may leave signatures unexpanded.  The machine is then
        composed from the letters of ``word``.
        """
        g = element_from_word(word, self.tree.graph)
        try:
            return self.transducer(g)
        except SynthesisDivergedError as exc:
            if sum(abs(exponent) for _, exponent in parse_word(word)) <= 1:
                raise
            logger.warning(
                "Direct synthesis diverged; composing letters",
                extra={"word": word, "unresolved": len(exc.unresolved)},
            )
            return self.word(word)

    def word(self, word: str) -> AsyncTransducer:
        """Machine of ``w1 w2 ... wk``, which applies ``wk`` first."""
        result = identity_transducer(self.classification.type_graph)
        for name, exponent in parse_word(word):
            piece = self.letter(name, 1 if exponent > 0 else -1)
            for _ in range(abs(exponent)):
                result = compose_transducers(piece, result)
        return result

    def relation_audit(self, depth: int) -> dict[str, bool]:
        """Every declared relation acts as the identity up to ``depth``."""
        one = identity_transducer(self.classification.type_graph)
        return {
            rel: bounded_equivalent(self.word(rel), one, depth)
            for rel in self.tree.graph.source.relations()
        }
