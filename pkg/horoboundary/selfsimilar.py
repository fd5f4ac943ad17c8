"""Self-similar tree machinery on top of a classification.

* :class:`RigidStructure` picks one morphism ``psi_A`` from every tree atom
  to the representative of its type, built top-down from per-slot markings.
* :func:`simplify` and :func:`expand` turn a type graph into a branching one.
* :class:`PrefixCode` assigns complete binary prefix codes to child slots so
  chains of atoms become bit strings.
"""

from __future__ import annotations

import logging
import random
from collections.abc import Sequence
from dataclasses import dataclass
from fractions import Fraction

from horoboundary.atoms import Atom, AtomTree
from horoboundary.classify import Classification, TypeGraph, find_morphism, type_name
from horoboundary.errors import (
    ClassificationIncompleteError,
    CodeMismatchError,
    InputFormatError,
    MustExpandError,
)
from horoboundary.group import GroupElement, compose, identity, inverse

logger: logging.Logger = logging.getLogger(__name__)


@dataclass
class RigidStructure:
    """Markings ``psi_A: A -> rep(type A)`` for every tree atom.

    Each marking is anchored at the first lowest member of its atom.
    """

    tree: AtomTree
    classification: Classification
    markings: dict[tuple[int, int], GroupElement]
    slot_markings: dict[tuple[int, int], GroupElement]

    def marking(self, atom: Atom) -> GroupElement:
        return self.markings[atom.id]

    def morphism(self, source: Atom, target: Atom) -> GroupElement:
        """``phi = psi_target^-1 psi_source``, anchored at ``source``."""
        return compose(inverse(self.markings[target.id]), self.markings[source.id])

    def _agrees(self, g: GroupElement, h: GroupElement, atom: Atom, depth: int) -> bool:
        for v in atom.members_within(self.tree.graph, depth):
            a, b = g.try_act(int(v)), h.try_act(int(v))
            if a is not None and b is not None and a != b:
                return False
        return True

    def cocycle_violations(self, samples: int = 100, depth: int = 2, seed: int = 0) -> list[str]:
        """``phi_vw phi_uv = phi_uw`` and ``phi_vv = id`` on random same-type triples."""
        rng = random.Random(seed)
        by_type: dict[str, list[Atom]] = {}
        for level in self.tree.levels:
            for atom in level:
                by_type.setdefault(self.classification.type_of(atom), []).append(atom)
        problems = []
        pools = [atoms for atoms in by_type.values() if atoms]
        for _ in range(samples):
            pool = rng.choice(pools)
            u, v, w = (rng.choice(pool) for _ in range(3))
            lhs = compose(self.morphism(v, w), self.morphism(u, v))
            if not self._agrees(lhs, self.morphism(u, w), u, depth):
                problems.append(f"cocycle fails for {u.id}, {v.id}, {w.id}")
            anchor = int(u.min_members(self.tree.graph)[0])
            if not self._agrees(self.morphism(u, u), identity(self.tree.graph, anchor), u, depth):
                problems.append(f"phi_vv is not the identity at {u.id}")
        return problems

    def restriction_violations(self, samples: int = 50, depth: int = 1, seed: int = 0) -> list[str]:
        """``phi_{v'w'}`` restricts ``phi_vw`` on matching child slots."""
        rng = random.Random(seed)
        inner = [a for level in self.tree.levels[: self.tree.depth] for a in level]
        problems = []
        for _ in range(samples):
            v = rng.choice(inner)
            kind = self.classification.type_of(v)
            same = [a for a in inner if self.classification.type_of(a) == kind]
            w = rng.choice(same)
            phi = self.morphism(v, w)
            for child, target in zip(self.tree.children(v), self.tree.children(w), strict=True):
                if not self._agrees(self.morphism(child, target), phi, child, depth):
                    problems.append(f"restriction fails for {child.id} -> {target.id}")
        return problems


def build_rigid_structure(
    tree: AtomTree, classification: Classification, depth: int = 3
) -> RigidStructure:
    """Markings by induction: ``psi_root = id`` and ``psi_child = tau_b psi_parent``.

    ``b`` is the child in the same slot below the representative of the
    parent's type and ``tau_b`` the morphism from ``b`` to its own
    representative.

    Raises:
        ClassificationIncompleteError: if some ``tau_b`` cannot be found.
    """
    graph = tree.graph
    reps = classification.representatives
    taus: dict[tuple[int, int], GroupElement] = {}
    markings: dict[tuple[int, int], GroupElement] = {tree.root.id: identity(graph)}

    def tau(b: Atom) -> GroupElement:
        if b.id not in taus:
            target = reps[classification.type_of(b)]
            witness = find_morphism(tree, b, target, depth)
            if witness is None:
                raise ClassificationIncompleteError(
                    f"no morphism from atom {b.id} to the representative {target.id} "
                    f"of type {classification.type_of(b)}"
                )
            taus[b.id] = witness.g
        return taus[b.id]

    for level in tree.levels[: tree.depth]:
        for atom in level:
            rep_kids = tree.children(reps[classification.type_of(atom)])
            psi = markings[atom.id]
            for slot, child in enumerate(tree.children(atom)):
                b = rep_kids[slot]
                anchor = int(child.min_members(graph)[0])
                markings[child.id] = compose(tau(b), psi.reanchored(anchor))
    logger.info(
        "Built rigid structure", extra={"markings": len(markings), "slot_markings": len(taus)}
    )
    return RigidStructure(tree, classification, markings, taus)


# ---------------------------------------------------------------------------
# Simplification and expansion
# ---------------------------------------------------------------------------

def essential_types(tg: TypeGraph) -> list[str]:
    return [t for t in tg.types if tg.out_degree(t) >= 2]


def _reachable(tg: TypeGraph, start: str) -> set[str]:
    seen = {start}
    stack = [start]
    while stack:
        for kid in tg.children[stack.pop()]:
            if kid not in seen:
                seen.add(kid)
                stack.append(kid)
    return seen


def isolated_types(tg: TypeGraph) -> list[str]:
    """Types from which no type with two or more children is reachable."""
    return [t for t in tg.types if not any(tg.out_degree(u) >= 2 for u in _reachable(tg, t))]


def essential_descendant(tg: TypeGraph, name: str) -> tuple[str, int]:
    """First essential type below ``name`` through single-child types, and the hop count."""
    hops = 0
    seen: set[str] = set()
    while tg.out_degree(name) == 1:
        if name in seen:
            raise MustExpandError(f"type {name} lies on a single infinite chain")
        seen.add(name)
        name = tg.children[name][0]
        hops += 1
    if tg.out_degree(name) == 0:
        raise MustExpandError(f"type {name} is a dead end")
    return name, hops


def simplify(tg: TypeGraph) -> TypeGraph:
    """Drop single-child types, fusing each chain into the slot that enters it.

    Raises:
        MustExpandError: if the graph has isolated types.
    """
    isolated = isolated_types(tg)
    if isolated:
        raise MustExpandError(f"isolated types {isolated} must be expanded before simplifying")
    root, _ = essential_descendant(tg, tg.root)
    children = {
        name: tuple(essential_descendant(tg, kid)[0] for kid in tg.children[name])
        for name in essential_types(tg)
    }
    kept = _reachable(TypeGraph(root, children), root)
    return TypeGraph(root, {name: kids for name, kids in children.items() if name in kept})


def _fresh_name(tg: TypeGraph) -> str:
    index = 0
    while type_name(index) in tg.children:
        index += 1
    return type_name(index)


def expand(tg: TypeGraph) -> TypeGraph:
    """Replace every isolated type by one new binary type with two self-loop slots."""
    isolated = set(isolated_types(tg))
    if not isolated:
        return tg
    binary = _fresh_name(tg)
    if tg.root in isolated:
        return TypeGraph(binary, {binary: (binary, binary)})
    children = {
        name: tuple(binary if kid in isolated else kid for kid in kids)
        for name, kids in tg.children.items()
        if name not in isolated
    }
    children[binary] = (binary, binary)
    return TypeGraph(tg.root, dict(sorted(children.items())))


def is_branching(tg: TypeGraph) -> bool:
    return all(tg.out_degree(t) >= 2 for t in tg.types)


# ---------------------------------------------------------------------------
# Prefix codes
# ---------------------------------------------------------------------------

def canonical_code_words(k: int) -> tuple[str, ...]:
    """Leaves of the full binary tree made by splitting the leftmost deepest leaf."""
    leaves = [""]
    while len(leaves) < k:
        deepest = max(len(leaf) for leaf in leaves)
        at = next(i for i, leaf in enumerate(leaves) if len(leaf) == deepest)
        leaf = leaves[at]
        leaves[at : at + 1] = [leaf + "0", leaf + "1"]
    return tuple(leaves)


@dataclass(frozen=True)
class PrefixCode:
    """Complete binary prefix code per essential type, indexed by child slot."""

    words: dict[str, tuple[str, ...]]

    def kraft_sum(self, name: str) -> Fraction:
        return sum((Fraction(1, 2 ** len(w)) for w in self.words[name]), Fraction(0))

    def is_prefix_free(self, name: str) -> bool:
        ws = self.words[name]
        return not any(a != b and b.startswith(a) for a in ws for b in ws)

    def word(self, name: str, slot: int) -> str:
        if name not in self.words:
            raise CodeMismatchError(f"type {name} has no code")
        return self.words[name][slot]

    def to_text(self) -> str:
        return "".join(
            f"code {name} {slot} {bits or '-'}\n"
            for name, words in self.words.items()
            for slot, bits in enumerate(words)
        )

    @classmethod
    def from_text(cls, text: str) -> PrefixCode:
        words: dict[str, list[str]] = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            parts = raw.split()
            if not parts:
                continue
            if len(parts) != 4 or parts[0] != "code" or not parts[2].isdigit():
                raise InputFormatError(f"line {lineno}: expected 'code <type> <slot> <bits>'")
            _, name, slot, bits = parts
            if int(slot) != len(words.setdefault(name, [])):
                raise InputFormatError(f"line {lineno}: code slots must be consecutive")
            words[name].append("" if bits == "-" else bits)
        return cls({name: tuple(ws) for name, ws in words.items()})


def canonical_code(tg: TypeGraph) -> PrefixCode:
    """Canonical code for every type with at least two child slots."""
    return PrefixCode(
        {name: canonical_code_words(tg.out_degree(name)) for name in essential_types(tg)}
    )


def binary_address(
    slots: Sequence[int], tg: TypeGraph, code: PrefixCode, start: str | None = None
) -> str:
    """Concatenate the code words of a slot path from ``start`` (default: the root type).

    Single-child types contribute the empty word.

    Raises:
        CodeMismatchError: if the path enters a branching type the code lacks.
    """
    name = tg.root if start is None else start
    bits: list[str] = []
    for slot in slots:
        kid = tg.child_type(name, slot)
        if tg.out_degree(name) >= 2:
            bits.append(code.word(name, slot))
        name = kid
    return "".join(bits)
