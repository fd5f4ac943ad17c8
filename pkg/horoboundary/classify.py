"""Atom types: geometric equivalences, morphisms, and the type graph.

Classification runs in two stages.

1. Every tree atom gets an orbit-canonical form built from its proximal set,
   its normalised profile on that set, and the cone signatures there.  Atoms
   with equal forms are checked pairwise for a geometric equivalence and
   grouped; a failed check splits the group.
2. Every pair of group representatives is tested with :func:`find_morphism`
   and groups joined by a morphism are united, so the types are the classes
   of the transitive closure of the morphisms found.

Types are named ``A, B, C, ...`` in breadth-first order over child slots from
the root, so the same ball always yields the same names.
"""

from __future__ import annotations

import logging
from collections.abc import Iterable, Mapping
from itertools import combinations
from dataclasses import dataclass, field

import graphviz
import networkx as nx

from horoboundary.atoms import Atom, AtomTree
from horoboundary.errors import (
    AuditError,
    ClassificationIncompleteError,
    InputFormatError,
    UnsupportedSourceError,
)
from horoboundary.graph import LayeredGraph
from horoboundary.group import GroupElement, allowed_twists, identity, inverse
from horoboundary.proximal import ProximalData, proximal_data

logger: logging.Logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EquivalenceWitness:
    """A group element verified to carry ``source`` onto ``target``."""

    g: GroupElement
    source: tuple[int, int]
    target: tuple[int, int]
    checked_depth: int


@dataclass(frozen=True)
class TypeGraph:
    """Finite directed multigraph of atom types with ordered child slots."""

    root: str
    children: Mapping[str, tuple[str, ...]]

    @property
    def types(self) -> tuple[str, ...]:
        return tuple(self.children)

    def out_degree(self, name: str) -> int:
        return len(self.children[name])

    def edges(self) -> list[tuple[str, int, str]]:
        return [
            (src, slot, dst)
            for src, kids in self.children.items()
            for slot, dst in enumerate(kids)
        ]

    def child_type(self, name: str, slot: int) -> str:
        kids = self.children.get(name)
        if kids is None or not 0 <= slot < len(kids):
            raise InputFormatError(f"type {name} has no child slot {slot}")
        return kids[slot]


@dataclass
class Classification:
    """Result of :func:`classify_types`.

    Attributes:
        type_graph: The emitted type graph.
        atom_types: Type name of every tree atom, keyed by atom id.
        representatives: First (shallowest, leftmost) atom of each type.
        proximal: Proximal data of every tree atom.
        witnesses: Verified morphisms collected during stage 2, keyed by
            ``(source id, target id)``.
    """

    type_graph: TypeGraph
    atom_types: dict[tuple[int, int], str]
    representatives: dict[str, Atom]
    proximal: dict[tuple[int, int], ProximalData]
    witnesses: dict[tuple[tuple[int, int], tuple[int, int]], EquivalenceWitness] = field(
        default_factory=dict
    )

    def type_of(self, atom: Atom) -> str:
        return self.atom_types[atom.id]


def type_name(index: int) -> str:
    """Spreadsheet-style names: A..Z, AA, AB, ..."""
    name = ""
    index += 1
    while index:
        index, rem = divmod(index - 1, 26)
        name = chr(ord("A") + rem) + name
    return name


# ---------------------------------------------------------------------------
# Geometric equivalence and morphisms
# ---------------------------------------------------------------------------

def check_geometric_equivalence(
    graph: LayeredGraph,
    g: GroupElement,
    atom: Atom,
    other: Atom,
    prox: ProximalData,
    other_prox: ProximalData,
    depth: int,
) -> bool:
    """Proximal sets, profiles on them, and truncated cones all match under ``g``."""
    pts = prox.sorted_proximal
    images = [g.try_act(p) for p in pts]
    if any(y is None for y in images) or set(images) != set(other_prox.proximal):
        return False
    gaps = {
        atom.profile.values[p] - other.profile.values[y]
        for p, y in zip(pts, images, strict=True)
        if y is not None
    }
    if len(gaps) != 1:
        return False
    for p, y in zip(pts, images, strict=True):
        assert y is not None
        moved = {g.try_act(v) for v in graph.cone(p, depth)}
        if moved != set(graph.cone(y, depth)):
            return False
    return True


def _same_level_members(graph: LayeredGraph, atom: Atom, depth: int) -> dict[int, list[int]]:
    grouped: dict[int, list[int]] = {}
    for v in atom.members_within(graph, depth):
        grouped.setdefault(int(graph.length[v]) - atom.min_length, []).append(int(v))
    return grouped


def _carries(
    tree: AtomTree, g: GroupElement, atom: Atom, other: Atom, depth: int
) -> bool:
    """``g`` maps members of ``atom`` at relative depth ``k <= depth`` into ``other`` at ``k``."""
    graph = tree.graph
    labels = tree.partitions[other.level].labels
    for rel, members in sorted(_same_level_members(graph, atom, depth).items()):
        for v in members:
            y = g.try_act(v)
            if y is None or labels[y] < 0:
                continue
            if labels[y] != other.index or graph.length[y] - other.min_length != rel:
                return False
    return True


def _children_match(tree: AtomTree, g: GroupElement, atom: Atom, other: Atom) -> bool:
    kids, other_kids = tree.children(atom), tree.children(other)
    if not kids or not other_kids:
        return True
    if len(kids) != len(other_kids):
        return False
    for kid, target in zip(kids, other_kids, strict=True):
        landed = None
        for v in kid.min_members(tree.graph):
            y = g.try_act(int(v))
            if y is not None:
                landed = tree.atom_of(y, target.level)
                if landed is not None:
                    break
        if landed is None or landed.id != target.id:
            return False
    return True


def verify_morphism(tree: AtomTree, g: GroupElement, atom: Atom, other: Atom, depth: int) -> bool:
    """Members at matched relative levels (both directions) and slot-preserving children."""
    return (
        _carries(tree, g, atom, other, depth)
        and _carries(tree, inverse(g), other, atom, depth)
        and _children_match(tree, g, atom, other)
    )


def morphism_candidates(graph: LayeredGraph, atom: Atom, other: Atom) -> list[GroupElement]:
    """Flags sending the first lowest member of ``atom`` to each lowest member of ``other``."""
    x1 = int(atom.min_members(graph)[0])
    return [
        GroupElement(graph, x1, int(y), c)
        for y in other.min_members(graph)
        for c in allowed_twists(graph)
    ]


def find_morphisms(tree: AtomTree, atom: Atom, other: Atom, depth: int) -> list[EquivalenceWitness]:
    """Every candidate element that verifies as a morphism ``atom -> other``."""
    found = []
    for g in morphism_candidates(tree.graph, atom, other):
        if verify_morphism(tree, g, atom, other, depth):
            found.append(EquivalenceWitness(g, atom.id, other.id, depth))
    return found


def find_morphism(
    tree: AtomTree, atom: Atom, other: Atom, depth: int
) -> EquivalenceWitness | None:
    """First verified morphism ``atom -> other``, or None."""
    if atom.id == other.id:
        anchor = int(atom.min_members(tree.graph)[0])
        return EquivalenceWitness(identity(tree.graph, anchor), atom.id, other.id, depth)
    for g in morphism_candidates(tree.graph, atom, other):
        if verify_morphism(tree, g, atom, other, depth):
            return EquivalenceWitness(g, atom.id, other.id, depth)
    return None


# ---------------------------------------------------------------------------
# Stage 1: canonical forms
# ---------------------------------------------------------------------------

CanonicalForm = tuple[tuple[int, int, str], ...]


def canonical_form(
    graph: LayeredGraph, atom: Atom, prox: ProximalData, cone_depth: int
) -> tuple[CanonicalForm, list[tuple[int, int]]]:
    """Minimum over anchor flags at ``N(A)`` of the pulled-back proximal data.

    Returns the form and every ``(anchor, twist)`` flag that attains it.
    """
    pts = prox.sorted_proximal
    low = min(atom.profile.values[p] for p in pts)
    data = [
        (p, atom.profile.values[p] - low, graph.cone_signature(p, cone_depth).digest) for p in pts
    ]
    best: CanonicalForm | None = None
    flags: list[tuple[int, int]] = []
    x0 = graph.base_vertex
    for a in sorted(prox.nearest):
        for c in allowed_twists(graph):
            pull = GroupElement(graph, a, x0, -c)
            moved = [m for m in (pull.try_act(p) for p in pts) if m is not None]
            if len(moved) != len(pts):
                continue
            form = tuple(sorted((m, v, s) for m, (_, v, s) in zip(moved, data, strict=True)))
            if best is None or form < best:
                best, flags = form, [(a, c)]
            elif form == best:
                flags.append((a, c))
    if best is None:
        raise ClassificationIncompleteError(f"no anchor flag of atom {atom.id} stays in the ball")
    return best, flags


def _stage_one(
    tree: AtomTree, prox: dict[tuple[int, int], ProximalData], cone_depth: int
) -> list[list[Atom]]:
    graph = tree.graph
    forms: dict[CanonicalForm, list[tuple[Atom, list[tuple[int, int]]]]] = {}
    for level in tree.levels:
        for atom in level:
            form, flags = canonical_form(graph, atom, prox[atom.id], cone_depth)
            forms.setdefault(form, []).append((atom, flags))

    groups: list[list[Atom]] = []
    demoted = 0
    for bucket in forms.values():
        sub: list[tuple[tuple[int, int], list[Atom]]] = []
        for atom, flags in bucket:
            placed = False
            for (a_rep, c_rep), members in sub:
                rep = members[0]
                for a, c in flags:
                    g = GroupElement(graph, a_rep, a, c - c_rep)
                    if check_geometric_equivalence(
                        graph, g, rep, atom, prox[rep.id], prox[atom.id], cone_depth
                    ):
                        members.append(atom)
                        placed = True
                        break
                if placed:
                    break
            if not placed:
                demoted += bool(sub)
                sub.append((flags[0], [atom]))
        groups.extend(members for _, members in sub)
    if demoted:
        logger.info("Split canonical-form buckets", extra={"demoted": demoted})
    logger.info("Stage one grouping", extra={"forms": len(forms), "groups": len(groups)})
    return groups


# ---------------------------------------------------------------------------
# Stage 2 and naming
# ---------------------------------------------------------------------------

def _prefilter(tree: AtomTree, atom: Atom, other: Atom) -> bool:
    graph = tree.graph
    if atom.min_length - atom.level != other.min_length - other.level:
        return False
    if len(atom.min_members(graph)) != len(other.min_members(graph)):
        return False
    kids, other_kids = tree.children(atom), tree.children(other)
    return not (kids and other_kids and len(kids) != len(other_kids))


def _name_types(
    tree: AtomTree, class_of: dict[tuple[int, int], int]
) -> tuple[dict[int, str], dict[int, tuple[int, ...]]]:
    slots: dict[int, tuple[int, ...]] = {}
    for level in tree.levels[: tree.depth]:
        for atom in level:
            kids = tuple(class_of[k.id] for k in tree.children(atom))
            cls = class_of[atom.id]
            if cls in slots and slots[cls] != kids:
                raise AuditError(
                    f"atoms of one type have different child types: {slots[cls]} vs {kids} "
                    f"(atom {atom.id})"
                )
            slots[cls] = kids
    missing = set(class_of.values()) - set(slots)
    if missing:
        raise ClassificationIncompleteError(
            f"{len(missing)} type(s) only occur at depth {tree.depth}; increase the tree depth"
        )
    names: dict[int, str] = {}
    queue = [class_of[tree.root.id]]
    while queue:
        cls = queue.pop(0)
        if cls in names:
            continue
        names[cls] = type_name(len(names))
        queue.extend(k for k in slots[cls] if k not in names)
    return names, slots


def classify_types(
    tree: AtomTree,
    delta: int,
    cone_depth: int = 3,
    equivalence_depth: int = 3,
    stability_audit: bool = True,
) -> Classification:
    """Assign a type to every tree atom and emit the type graph.

    Raises:
        UnsupportedSourceError: for sources without a group action.
        ClassificationIncompleteError: if some type never shows its children.
        AuditError: on inconsistent child types or an unstable classification.
    """
    graph = tree.graph
    if not graph.source.has_group:
        raise UnsupportedSourceError(f"typing needs a group action; {graph.source.name} has none")
    if tree.depth == 0:
        root = tree.root
        return Classification(
            TypeGraph("A", {"A": ()}), {root.id: "A"}, {"A": root},
            {root.id: proximal_data(graph, root, delta)},
        )

    prox = {
        atom.id: proximal_data(graph, atom, delta) for level in tree.levels for atom in level
    }
    groups = _stage_one(tree, prox, cone_depth)

    # stage two: pairwise morphisms closed under union-find
    sets = nx.utils.UnionFind(range(len(groups)))
    witnesses: dict[tuple[tuple[int, int], tuple[int, int]], EquivalenceWitness] = {}
    for i, j in combinations(range(len(groups)), 2):
        first, second = groups[i][0], groups[j][0]
        if sets[i] == sets[j] or not _prefilter(tree, first, second):
            continue
        witness = find_morphism(tree, first, second, equivalence_depth)
        if witness is not None:
            witnesses[first.id, second.id] = witness
            sets.union(i, j)
    index: dict[int, int] = {}
    class_of: dict[tuple[int, int], int] = {}
    for i, members in enumerate(groups):
        cls = index.setdefault(sets[i], len(index))
        for atom in members:
            class_of[atom.id] = cls
    logger.info("Stage two merging", extra={"groups": len(groups), "types": len(index)})

    names, slots = _name_types(tree, class_of)
    children = {
        names[cls]: tuple(names[k] for k in slots[cls])
        for cls in sorted(names, key=lambda c: names[c])
    }
    type_graph = TypeGraph(names[class_of[tree.root.id]], dict(sorted(children.items())))
    atom_types = {aid: names[cls] for aid, cls in class_of.items()}
    reps: dict[str, Atom] = {}
    for level in tree.levels:
        for atom in level:
            reps.setdefault(atom_types[atom.id], atom)
    result = Classification(type_graph, atom_types, reps, prox, witnesses)

    if stability_audit:
        _audit_stability(tree, result, delta, cone_depth, equivalence_depth)
    return result


def _audit_stability(
    tree: AtomTree, result: Classification, delta: int, cone_depth: int, equivalence_depth: int
) -> None:
    if tree.depth < 3:
        logger.warning("Skipping classification stability audit", extra={"depth": tree.depth})
        return
    try:
        smaller = classify_types(
            tree.truncated(tree.depth - 1), delta, cone_depth, equivalence_depth, False
        )
    except ClassificationIncompleteError:
        logger.warning("Truncated tree too shallow for the stability audit")
        return
    if smaller.type_graph != result.type_graph:
        raise AuditError(
            f"type graph changes with tree depth: {len(smaller.type_graph.types)} types at "
            f"depth {tree.depth - 1}, {len(result.type_graph.types)} at depth {tree.depth}"
        )


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------

def type_graph_to_dot(tg: TypeGraph) -> str:
    dot = graphviz.Digraph(name="types", graph_attr={"rankdir": "LR"})
    for name in tg.types:
        dot.node(name, shape="doublecircle" if name == tg.root else "circle")
    for src, kids in tg.children.items():
        grouped: dict[str, list[int]] = {}
        for slot, dst in enumerate(kids):
            grouped.setdefault(dst, []).append(slot)
        for dst, slot_list in grouped.items():
            dot.edge(src, dst, label=",".join(str(s) for s in slot_list))
    return dot.source


def type_graph_to_text(tg: TypeGraph) -> str:
    lines = [f"root {tg.root}"]
    for name, kids in tg.children.items():
        lines.append(f"type {name}")
        lines.extend(f"child {slot} {dst}" for slot, dst in enumerate(kids))
    return "\n".join(lines) + "\n"


def export_type_graph(tg: TypeGraph, fmt: str = "text") -> str:
    if fmt == "dot":
        return type_graph_to_dot(tg)
    if fmt == "text":
        return type_graph_to_text(tg)
    raise InputFormatError(f"unknown type-graph format {fmt!r}; use 'dot' or 'text'")


def parse_type_graph(text: str | Iterable[str]) -> TypeGraph:
    """Inverse of :func:`type_graph_to_text`."""
    lines = text.splitlines() if isinstance(text, str) else list(text)
    root: str | None = None
    children: dict[str, list[str]] = {}
    current: str | None = None
    for lineno, raw in enumerate(lines, start=1):
        parts = raw.split("#", 1)[0].split()
        if not parts:
            continue
        match parts:
            case ["root", name]:
                root = name
            case ["type", name]:
                current = name
                children.setdefault(name, [])
            case ["child", slot, dst] if current is not None and slot.isdigit():
                if int(slot) != len(children[current]):
                    raise InputFormatError(f"line {lineno}: child slots must be consecutive")
                children[current].append(dst)
            case _:
                raise InputFormatError(f"line {lineno}: cannot parse {raw!r}")
    if root is None or root not in children:
        raise InputFormatError("type graph text has no valid 'root' line")
    for name, kids in children.items():
        for dst in kids:
            if dst not in children:
                raise InputFormatError(f"type {name} points at undeclared type {dst}")
    return TypeGraph(root, {name: tuple(kids) for name, kids in children.items()})


def type_graph_to_networkx(tg: TypeGraph) -> nx.MultiDiGraph:
    graph = nx.MultiDiGraph()
    for name in tg.types:
        graph.add_node(name, root=name == tg.root)
    for src, slot, dst in tg.edges():
        graph.add_edge(src, dst, slot=slot)
    return graph


def type_graphs_isomorphic(a: TypeGraph, b: TypeGraph) -> bool:
    """Equal up to renaming types, with the multiset of child types per type preserved."""
    return bool(
        nx.is_isomorphic(
            type_graph_to_networkx(a),
            type_graph_to_networkx(b),
            node_match=lambda x, y: x["root"] == y["root"],
        )
    )
