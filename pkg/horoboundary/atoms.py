"""Distance profiles, atoms, and the tree of atoms.

Two vertices lie in the same level-``n`` atom when their distance functions
agree on ``B_n`` up to an additive constant.  Profiles are normalised to
minimum 0, so "agree up to a constant" becomes literal equality of value
vectors in breadth-first vertex order.

An atom is flagged *infinite* when it has a certified member on the sphere
``S_{n+H}`` for the configured horizon ``H``.  The infinite atoms of levels
``0..N`` with their containment links form the :class:`AtomTree`.
"""

from __future__ import annotations

import logging
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from horoboundary.errors import AuditError, InputFormatError, InsufficientRadiusError
from horoboundary.graph import LayeredGraph

logger: logging.Logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DistanceProfile:
    """Normalised distance function on ``B_level`` (vertex ids in BFS order)."""

    level: int
    values: tuple[int, ...]

    def restrict(self, graph: LayeredGraph, m: int) -> DistanceProfile:
        """Normalised restriction to ``B_m``."""
        if m > self.level:
            raise InputFormatError(f"cannot restrict a level-{self.level} profile to level {m}")
        head = self.values[: graph.ball_size(m)]
        low = min(head)
        return DistanceProfile(m, tuple(v - low for v in head))


@dataclass(frozen=True, eq=False)
class Atom:
    """One class of the level-``n`` partition.

    Attributes:
        level: The radius ``n`` of the ball the profile lives on.
        index: Position among level-``n`` atoms, ordered by smallest member.
        profile: The shared normalised distance profile.
        members: Sorted ids of the certified vertices realising the profile.
        infinite: True when some member lies on ``S_{n+H}``.
        min_length: Smallest distance from the base vertex among members.
    """

    level: int
    index: int
    profile: DistanceProfile = field(repr=False)
    members: np.ndarray = field(repr=False)
    infinite: bool
    min_length: int

    @property
    def id(self) -> tuple[int, int]:
        return (self.level, self.index)

    def __contains__(self, v: object) -> bool:
        return bool(np.isin(v, self.members))

    def min_members(self, graph: LayeredGraph) -> np.ndarray:
        return self.members[graph.length[self.members] == self.min_length]

    def members_within(self, graph: LayeredGraph, relative_depth: int) -> np.ndarray:
        """Members with ``l(x) <= min_length + relative_depth``."""
        return self.members[graph.length[self.members] <= self.min_length + relative_depth]


@dataclass(frozen=True)
class AtomPartition:
    """All atoms of one level, plus the label of every vertex (-1 if uncertified)."""

    level: int
    labels: np.ndarray = field(repr=False)
    atoms: list[Atom] = field(repr=False)

    @property
    def infinite_atoms(self) -> list[Atom]:
        return [a for a in self.atoms if a.infinite]


def profile(graph: LayeredGraph, x: int, n: int) -> DistanceProfile:
    """Normalised restriction of ``d(x, .)`` to ``B_n``."""
    values, cert = graph.distance_block(n)
    column, ok = values[:, x], cert[:, x]
    if not ok.all():
        raise InsufficientRadiusError(f"distances from B_{n} to vertex {x} are not certified")
    low = int(column.min())
    return DistanceProfile(n, tuple(int(v) - low for v in column))


def partition_level(graph: LayeredGraph, n: int, horizon: int) -> AtomPartition:
    """Partition the certified vertices of the ball by their profile on ``B_n``."""
    if n + horizon > graph.radius:
        raise InsufficientRadiusError(
            f"level {n} with horizon {horizon} needs radius {n + horizon}, have {graph.radius}"
        )
    values, cert = graph.distance_block(n)
    cols = np.flatnonzero(cert.all(axis=0))
    block = values[:, cols].astype(np.int32)
    normalised = block - block.min(axis=0)
    uniq, inverse = np.unique(normalised.T, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)

    first = np.full(len(uniq), len(cols))
    np.minimum.at(first, inverse, np.arange(len(cols)))
    order = np.argsort(first, kind="stable")
    relabel = np.empty_like(order)
    relabel[order] = np.arange(len(order))

    labels = np.full(graph.size, -1, dtype=np.int64)
    labels[cols] = relabel[inverse]
    atoms: list[Atom] = []
    for new_index, cls in enumerate(order):
        members = cols[inverse == cls]
        lengths = graph.length[members]
        atoms.append(
            Atom(
                level=n,
                index=new_index,
                profile=DistanceProfile(n, tuple(int(v) for v in uniq[cls])),
                members=members,
                infinite=bool((lengths == n + horizon).any()),
                min_length=int(lengths.min()),
            )
        )
    logger.debug(
        "Partitioned level",
        extra={"level": n, "atoms": len(atoms), "infinite": sum(a.infinite for a in atoms)},
    )
    return AtomPartition(n, labels, atoms)


def atoms_at_level(graph: LayeredGraph, n: int, horizon: int) -> list[Atom]:
    return partition_level(graph, n, horizon).atoms


# ---------------------------------------------------------------------------
# Partition audits
# ---------------------------------------------------------------------------

def partition_violations(graph: LayeredGraph, part: AtomPartition) -> list[str]:
    """Disjointness, cover, singletons of ``B_{n-1}``, and infinite atoms avoiding ``B_{n-1}``."""
    problems: list[str] = []
    n = part.level
    seen = np.zeros(graph.size, dtype=np.int64)
    for atom in part.atoms:
        seen[atom.members] += 1
        if not np.all(part.labels[atom.members] == atom.index):
            problems.append(f"level {n}: labels disagree with members of atom {atom.index}")
        if atom.infinite and atom.min_length < n:
            problems.append(f"level {n}: infinite atom {atom.index} meets B_{n - 1}")
    certified = part.labels >= 0
    if np.any(seen[certified] != 1) or np.any(seen[~certified] != 0):
        problems.append(f"level {n}: atoms are not a partition of the certified vertices")
    for x in range(graph.ball_size(n - 1)):
        label = int(part.labels[x])
        if label < 0 or len(part.atoms[label].members) != 1:
            problems.append(f"level {n}: vertex {x} of B_{n - 1} is not a singleton atom")
    return problems


def refinement_violations(coarse: AtomPartition, fine: AtomPartition) -> list[str]:
    problems = []
    for atom in fine.atoms:
        parents = np.unique(coarse.labels[atom.members])
        if len(parents) != 1 or parents[0] < 0:
            problems.append(
                f"atom {fine.level}.{atom.index} is not inside a single level-{coarse.level} atom"
            )
    return problems


def audit_horizon(graph: LayeredGraph, n: int, horizon: int) -> None:
    """Compare infinite flags at horizon ``H`` and ``H + 1``."""
    if n + horizon + 1 > graph.radius:
        logger.warning(
            "Skipping horizon stability audit; ball too small",
            extra={"level": n, "horizon": horizon, "radius": graph.radius},
        )
        return
    here = partition_level(graph, n, horizon)
    beyond = partition_level(graph, n, horizon + 1)
    flips = [
        a.index for a, b in zip(here.atoms, beyond.atoms, strict=True) if a.infinite != b.infinite
    ]
    if flips:
        raise AuditError(
            f"infinite flags at level {n} change between horizon {horizon} and "
            f"{horizon + 1} for atoms {flips}"
        )


# ---------------------------------------------------------------------------
# Tree of atoms
# ---------------------------------------------------------------------------

def _run_starts(labels: np.ndarray) -> dict[int, int]:
    """Start position of the longest cyclic run of each label."""
    size = len(labels)
    if size == 0:
        return {}
    change = np.flatnonzero(labels != np.roll(labels, 1))
    if len(change) == 0:
        return {int(labels[0]): 0}
    best: dict[int, tuple[int, int]] = {}
    for k, start in enumerate(change):
        stop = change[(k + 1) % len(change)]
        run = (stop - start) % size
        label = int(labels[start])
        if label not in best or run > best[label][0]:
            best[label] = (int(run), int(start))
    return {label: start for label, (_, start) in best.items()}


class AtomTree:
    """Infinite atoms of levels ``0..depth`` with planar child slots."""

    def __init__(
        self,
        graph: LayeredGraph,
        depth: int,
        horizon: int,
        partitions: Sequence[AtomPartition],
        children: dict[tuple[int, int], list[Atom]],
    ) -> None:
        self.graph = graph
        self.depth = depth
        self.horizon = horizon
        self.partitions = list(partitions)
        self._children = children
        self._parent: dict[tuple[int, int], Atom] = {}
        self._slot: dict[tuple[int, int], int] = {}
        self.levels: list[list[Atom]] = [[self.root]]
        for n in range(depth):
            level: list[Atom] = []
            for atom in self.levels[n]:
                for slot, child in enumerate(self.children(atom)):
                    self._parent[child.id] = atom
                    self._slot[child.id] = slot
                    level.append(child)
            self.levels.append(level)

    @property
    def root(self) -> Atom:
        return self.partitions[0].atoms[0]

    def children(self, atom: Atom) -> list[Atom]:
        return self._children.get(atom.id, [])

    def parent(self, atom: Atom) -> Atom | None:
        return self._parent.get(atom.id)

    def slot_of(self, atom: Atom) -> int:
        return self._slot[atom.id]

    def contains(self, atom: Atom) -> bool:
        return atom.id == self.root.id or atom.id in self._parent

    def slot_path(self, atom: Atom) -> tuple[int, ...]:
        path: list[int] = []
        node: Atom | None = atom
        while node is not None and node.id != self.root.id:
            path.append(self._slot[node.id])
            node = self._parent.get(node.id)
        return tuple(reversed(path))

    def atom_of(self, v: int, level: int) -> Atom | None:
        """The level-``level`` atom containing ``v`` (None if uncertified)."""
        label = int(self.partitions[level].labels[v])
        return None if label < 0 else self.partitions[level].atoms[label]

    def tree_atom_of(self, v: int, level: int) -> Atom | None:
        atom = self.atom_of(v, level)
        return atom if atom is not None and self.contains(atom) else None

    def chain(self, slots: Sequence[int]) -> list[Atom]:
        """Atoms along the path from the root following ``slots``."""
        chain = [self.root]
        for depth, slot in enumerate(slots):
            kids = self.children(chain[-1])
            if not 0 <= slot < len(kids):
                raise InputFormatError(
                    f"slot {slot} at depth {depth} is not a child of atom {chain[-1].id}"
                )
            chain.append(kids[slot])
        return chain

    def chains(self, length: int) -> Iterator[tuple[int, ...]]:
        """All slot words of the given length, in lexicographic order."""
        stack: list[tuple[Atom, tuple[int, ...]]] = [(self.root, ())]
        while stack:
            atom, word = stack.pop()
            if len(word) == length:
                yield word
                continue
            kids = self.children(atom)
            stack.extend((kid, word + (slot,)) for slot, kid in reversed(list(enumerate(kids))))

    def truncated(self, depth: int) -> AtomTree:
        kept = {aid: kids for aid, kids in self._children.items() if aid[0] < depth}
        return AtomTree(self.graph, depth, self.horizon, self.partitions[: depth + 1], kept)


def _order_children(
    graph: LayeredGraph, parts: Sequence[AtomPartition], m: int, horizon: int
) -> dict[int, list[int]]:
    """Slot order of the level-``m`` infinite atoms below each level-``m-1`` atom.

    Children are read counter-clockwise off a deep sphere, starting from the
    parent's own arc (or, below the root, from the arc holding the first
    neighbour of the base vertex).
    """
    part, coarse = parts[m], parts[m - 1]
    infinite = [a for a in part.atoms if a.infinite]
    j = min(graph.radius, m + horizon)
    while True:
        seq = np.array([v for v in graph.sphere_order[j] if part.labels[v] >= 0], dtype=np.int64)
        present = set(part.labels[seq].tolist()) if len(seq) else set()
        if j <= m or all(a.index in present for a in infinite):
            break
        j -= 1
    fine_labels = part.labels[seq] if len(seq) else np.zeros(0, dtype=np.int64)
    child_start = _run_starts(fine_labels)
    size = max(len(seq), 1)
    if m == 1:
        first = graph.sphere_order[1][0] if graph.sphere_order[1] else -1
        ref_label = int(part.labels[first]) if first >= 0 else -1
        if ref_label not in child_start:
            ref_label = int(fine_labels[0]) if len(fine_labels) else -1
        parent_start = {0: child_start.get(ref_label, 0)}
    else:
        parent_start = _run_starts(coarse.labels[seq] if len(seq) else fine_labels)

    grouped: dict[int, list[int]] = {}
    for atom in infinite:
        grouped.setdefault(int(coarse.labels[atom.members[0]]), []).append(atom.index)

    def slot_key(parent: int, child: int) -> tuple[int, int, int]:
        if child not in child_start:
            return (1, 0, child)
        return (0, (child_start[child] - parent_start.get(parent, 0)) % size, child)

    return {
        parent: sorted(kids, key=partial(slot_key, parent))
        for parent, kids in grouped.items()
    }


def build_atom_tree(
    graph: LayeredGraph, depth: int, horizon: int, stability_audit: bool = False
) -> AtomTree:
    """Partition levels ``0..depth`` and link the infinite atoms into a tree.

    With ``stability_audit`` every level also runs :func:`audit_horizon`.

    Raises:
        InsufficientRadiusError: if ``depth + horizon`` exceeds the radius.
        AuditError: on a refinement failure, a dead end, or unstable
            infinite flags.
    """
    if depth + horizon > graph.radius:
        raise InsufficientRadiusError(
            f"tree depth {depth} with horizon {horizon} needs radius {depth + horizon}, "
            f"have {graph.radius}"
        )
    parts = [partition_level(graph, n, horizon) for n in range(depth + 1)]
    problems: list[str] = []
    for n in range(1, depth + 1):
        problems += refinement_violations(parts[n - 1], parts[n])
    if problems:
        raise AuditError("; ".join(problems[:5]))
    if stability_audit:
        for n in range(depth + 1):
            audit_horizon(graph, n, horizon)

    children: dict[tuple[int, int], list[Atom]] = {}
    for m in range(1, depth + 1):
        for parent_index, kids in _order_children(graph, parts, m, horizon).items():
            parent = parts[m - 1].atoms[parent_index]
            if not parent.infinite:
                raise AuditError(f"infinite atom below finite atom {parent.id}")
            children[parent.id] = [parts[m].atoms[k] for k in kids]
    for n in range(depth):
        for atom in parts[n].infinite_atoms:
            if not children.get(atom.id):
                raise AuditError(f"atom {atom.id} has no infinite child (dead end)")

    tree = AtomTree(graph, depth, horizon, parts, children)
    logger.info(
        "Built atom tree",
        extra={"depth": depth, "horizon": horizon, "level_sizes": [len(lv) for lv in tree.levels]},
    )
    return tree


def horofunction_profile(chain: Sequence[Atom], m: int) -> DistanceProfile:
    """Level-``m`` profile along a root-to-depth chain of atoms."""
    if not 0 <= m < len(chain):
        raise InputFormatError(f"level {m} exceeds chain depth {len(chain) - 1}")
    return chain[m].profile


def chain_violations(graph: LayeredGraph, chain: Sequence[Atom]) -> list[str]:
    """Restriction consistency of profiles along a chain."""
    return [
        f"profile at level {m} is not the restriction of level {m + 1}"
        for m in range(len(chain) - 1)
        if chain[m + 1].profile.restrict(graph, m) != chain[m].profile
    ]
