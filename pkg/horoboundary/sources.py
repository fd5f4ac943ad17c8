"""Graph sources: built-in generators and the edge-list file format.

A source produces a *port graph*: every vertex lists its neighbours in a
fixed cyclic port order, together with the port at the neighbour that leads
back.  Vertex ids are assigned in breadth-first order from the base vertex,
so the ball ``B_n`` is always the id prefix ``0 .. |B_n| - 1``.

Built-in sources:

* ``tiling:<p>,<q>``  the {p,q} tiling (p-gon faces, q per vertex), built in
  the hyperboloid model; requires ``1/p + 1/q < 1/2``.
* ``free:<rank>``     the Cayley tree of the free group, ports ordered
  ``a, b, ..., A, B, ...`` with upper case for inverses.
* ``line``            the Cayley graph of the integers; port 0 is ``+1``.

File sources contain a ``base <id>`` line and directed ``edge <id> <id>``
lines; both directions of every edge must be listed.
"""

from __future__ import annotations

import logging
import math
import string
from abc import ABC, abstractmethod
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np

from horoboundary.errors import AuditError, InputFormatError

logger: logging.Logger = logging.getLogger(__name__)

Symmetry = Literal["cyclic", "labelled", "none"]

# Dedup grid for hyperboloid coordinates; distinct tiling vertices are at
# Euclidean distance >= the edge length, which exceeds 1 for every {p,q}.
_CELL = 0.5
_TOL = 0.25


@dataclass(frozen=True)
class PortGraph:
    """Raw ball data produced by a source.

    Attributes:
        nbr: ``(n, deg)`` neighbour ids per port, ``-1`` where the neighbour
            lies outside the ball (or the port does not exist).
        back: ``(n, deg)`` port at ``nbr[v, i]`` that leads back to ``v``.
        length: ``(n,)`` distance from the base vertex.
        labels: External vertex names (positions on the line, file ids, ...).
        complete: True when no vertex of the ball has a neighbour outside it.
    """

    nbr: np.ndarray
    back: np.ndarray
    length: np.ndarray
    labels: tuple[str, ...]
    complete: bool = False


class GraphSource(ABC):
    """A vertex-transitive (or file-given) graph that can be cut to a ball."""

    name: str
    symmetry: Symmetry = "none"

    @abstractmethod
    def build(self, radius: int) -> PortGraph:
        """Return the neighbour-complete ball of the given radius."""

    def generators(self, graph: PortGraph) -> dict[str, tuple[int, int]]:
        """Generator flags as ``name -> (image of base vertex, twist)``."""
        return {}

    def relations(self) -> tuple[str, ...]:
        """Words that act trivially."""
        return ()

    @property
    def has_group(self) -> bool:
        return self.symmetry != "none"

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.name!r})"


# ---------------------------------------------------------------------------
# {p,q} tiling
# ---------------------------------------------------------------------------

def _rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _boost(a: float) -> np.ndarray:
    c, s = math.cosh(a), math.sinh(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [s, 0.0, c]])


_LORENTZ = np.diag([1.0, 1.0, -1.0])


def _lorentz_inverse(frames: np.ndarray) -> np.ndarray:
    """Inverse of hyperboloid isometries: ``J M^T J``."""
    return _LORENTZ @ np.swapaxes(frames, -1, -2) @ _LORENTZ


class _PointIndex:
    """Grid hash for nearby-point lookup on the hyperboloid."""

    def __init__(self) -> None:
        self._cells: dict[tuple[int, int, int], list[int]] = {}
        self._points: list[np.ndarray] = []

    def _candidate_keys(self, pos: np.ndarray) -> set[tuple[int, int, int]]:
        lo = np.floor((pos - _TOL) / _CELL).astype(int)
        hi = np.floor((pos + _TOL) / _CELL).astype(int)
        return {
            (x, y, z)
            for x in {lo[0], hi[0]}
            for y in {lo[1], hi[1]}
            for z in {lo[2], hi[2]}
        }

    def find(self, pos: np.ndarray) -> int | None:
        for key in self._candidate_keys(pos):
            for idx in self._cells.get(key, ()):
                if np.linalg.norm(self._points[idx] - pos) < _TOL:
                    return idx
        return None

    def add(self, pos: np.ndarray) -> int:
        idx = len(self._points)
        self._points.append(pos)
        key = tuple(int(c) for c in np.floor(pos / _CELL).astype(int))
        self._cells.setdefault(key, []).append(idx)  # type: ignore[arg-type]
        return idx


class TilingSource(GraphSource):
    """Vertex graph of the regular {p,q} tiling of the hyperbolic plane."""

    symmetry: Symmetry = "cyclic"

    def __init__(self, p: int, q: int) -> None:
        if p < 3 or q < 3 or 1 / p + 1 / q >= 0.5:
            raise InputFormatError(f"tiling:{p},{q} is not hyperbolic (need 1/p + 1/q < 1/2)")
        self.p = p
        self.q = q
        self.name = f"tiling:{p},{q}"

    @property
    def edge_length(self) -> float:
        return 2.0 * math.acosh(math.cos(math.pi / self.p) / math.sin(math.pi / self.q))

    def build(self, radius: int) -> PortGraph:
        q = self.q
        step = 2.0 * math.pi / q
        moves = np.stack([_rotation(k * step) @ _boost(self.edge_length) for k in range(q)])
        turn = _rotation(math.pi)

        index = _PointIndex()
        frames: list[np.ndarray] = [np.eye(3)]
        length: list[int] = [0]
        index.add(np.array([0.0, 0.0, 1.0]))
        nbr_rows: list[list[int]] = []

        v = 0
        while v < len(frames):
            row = [-1] * q
            targets = frames[v] @ moves
            for k in range(q):
                pos = targets[k][:, 2]
                u = index.find(pos)
                if u is None and length[v] < radius:
                    u = index.add(pos)
                    frames.append(targets[k] @ turn)
                    length.append(length[v] + 1)
                if u is not None:
                    row[k] = u
            nbr_rows.append(row)
            v += 1
            if v % 5000 == 0:
                logger.debug("Tiling construction progress", extra={"vertices": len(frames)})

        nbr = np.array(nbr_rows, dtype=np.int64)
        back = self._back_ports(nbr, np.stack(frames), step)
        lengths = np.array(length, dtype=np.int64)
        logger.info(
            "Built tiling ball",
            extra={"source": self.name, "radius": radius, "vertices": int(len(lengths))},
        )
        return PortGraph(nbr, back, lengths, tuple(str(i) for i in range(len(lengths))))

    def _back_ports(self, nbr: np.ndarray, frames: np.ndarray, step: float) -> np.ndarray:
        back = np.full_like(nbr, -1)
        vs, ks = np.nonzero(nbr >= 0)
        us = nbr[vs, ks]
        local = np.einsum("nij,nj->ni", _lorentz_inverse(frames[us]), frames[vs][:, :, 2])
        angles = np.arctan2(local[:, 1], local[:, 0])
        back[vs, ks] = np.rint(angles / step).astype(np.int64) % self.q
        if not np.array_equal(nbr[us, back[vs, ks]], vs):
            raise AuditError(f"{self.name}: port structure is not symmetric (numerical drift)")
        return back

    def generators(self, graph: PortGraph) -> dict[str, tuple[int, int]]:
        v0 = int(graph.nbr[0, 0])
        return {"r": (0, 1), "s": (v0, int(graph.back[0, 0]))}

    def relations(self) -> tuple[str, ...]:
        return (f"r^{self.q}", "s^2", " ".join(["r s"] * self.p))


# ---------------------------------------------------------------------------
# Free group and the line
# ---------------------------------------------------------------------------

class FreeGroupSource(GraphSource):
    """Cayley tree of the free group of the given rank."""

    symmetry: Symmetry = "cyclic"

    def __init__(self, rank: int) -> None:
        if not 1 <= rank <= 26:
            raise InputFormatError(f"free group rank must be between 1 and 26, got {rank}")
        self.rank = rank
        self.name = f"free:{rank}"

    def build(self, radius: int) -> PortGraph:
        k = self.rank
        deg = 2 * k
        nbr_rows: list[list[int]] = [[-1] * deg]
        length = [0]
        v = 0
        while v < len(nbr_rows):
            if length[v] < radius:
                for i in range(deg):
                    if nbr_rows[v][i] != -1:
                        continue
                    u = len(nbr_rows)
                    row = [-1] * deg
                    row[(i + k) % deg] = v
                    nbr_rows.append(row)
                    length.append(length[v] + 1)
                    nbr_rows[v][i] = u
            v += 1
        nbr = np.array(nbr_rows, dtype=np.int64)
        back = np.where(nbr >= 0, (np.arange(deg) + k) % deg, -1)
        return PortGraph(nbr, back, np.array(length, dtype=np.int64),
                         tuple(str(i) for i in range(len(length))))

    def generators(self, graph: PortGraph) -> dict[str, tuple[int, int]]:
        lower = string.ascii_lowercase[: self.rank]
        gens = {letter: (int(graph.nbr[0, i]), 0) for i, letter in enumerate(lower)}
        gens.update(
            {
                letter.upper(): (int(graph.nbr[0, i + self.rank]), 0)
                for i, letter in enumerate(lower)
            }
        )
        return gens


class LineSource(GraphSource):
    """Cayley graph of the integers; translations only."""

    symmetry: Symmetry = "labelled"
    name = "line"

    def build(self, radius: int) -> PortGraph:
        positions = [0]
        for step in range(1, radius + 1):
            positions.extend([step, -step])
        ids = {pos: i for i, pos in enumerate(positions)}
        nbr = np.array(
            [[ids.get(pos + 1, -1), ids.get(pos - 1, -1)] for pos in positions], dtype=np.int64
        )
        back = np.where(nbr >= 0, np.array([1, 0]), -1)
        length = np.array([abs(pos) for pos in positions], dtype=np.int64)
        return PortGraph(nbr, back, length, tuple(str(pos) for pos in positions))

    def generators(self, graph: PortGraph) -> dict[str, tuple[int, int]]:
        return {"t": (int(graph.nbr[0, 0]), 0)}


# ---------------------------------------------------------------------------
# Edge-list files
# ---------------------------------------------------------------------------

class FileSource(GraphSource):
    """Finite graph read from an edge-list file; carries no group action."""

    symmetry: Symmetry = "none"

    def __init__(self, path: Path) -> None:
        self.path = path
        self.name = str(path)
        self.base, self.adjacency = self._parse(path)

    @staticmethod
    def _parse(path: Path) -> tuple[int, dict[int, set[int]]]:
        base: int | None = None
        adjacency: dict[int, set[int]] = {}
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise InputFormatError(f"cannot read graph file {path}: {exc}") from exc
        for lineno, raw in enumerate(text.splitlines(), start=1):
            parts = raw.split("#", 1)[0].split()
            if not parts:
                continue
            try:
                if parts[0] == "base" and len(parts) == 2:
                    base = int(parts[1])
                elif parts[0] == "edge" and len(parts) == 3:
                    a, b = int(parts[1]), int(parts[2])
                    if a < 0 or b < 0:
                        raise ValueError("negative vertex id")
                    if a == b:
                        raise InputFormatError(f"{path}:{lineno}: self-loop at {a}")
                    adjacency.setdefault(a, set()).add(b)
                    adjacency.setdefault(b, set())
                else:
                    raise ValueError(f"unrecognised line {raw!r}")
            except ValueError as exc:
                if isinstance(exc, InputFormatError):
                    raise
                raise InputFormatError(f"{path}:{lineno}: {exc}") from exc
        if base is None:
            raise InputFormatError(f"{path}: missing 'base <id>' line")
        if not adjacency.get(base):
            raise InputFormatError(f"{path}: base vertex {base} lies on no edge")
        for a, targets in adjacency.items():
            for b in targets:
                if a not in adjacency[b]:
                    raise InputFormatError(f"{path}: edge {a} -> {b} has no reverse edge")
        return base, adjacency

    def build(self, radius: int) -> PortGraph:
        dist = {self.base: 0}
        order = [self.base]
        queue = deque([self.base])
        while queue:
            v = queue.popleft()
            if dist[v] == radius:
                continue
            for u in sorted(self.adjacency[v]):
                if u not in dist:
                    dist[u] = dist[v] + 1
                    order.append(u)
                    queue.append(u)
        new_id = {old: i for i, old in enumerate(order)}
        deg = max((len(self.adjacency[v]) for v in order), default=0)
        nbr = np.full((len(order), max(deg, 1)), -1, dtype=np.int64)
        complete = True
        for v in order:
            inside = sorted(new_id[u] for u in self.adjacency[v] if u in new_id)
            complete &= len(inside) == len(self.adjacency[v])
            nbr[new_id[v], : len(inside)] = inside
        back = np.full_like(nbr, -1)
        for v in range(len(order)):
            for i, u in enumerate(nbr[v]):
                if u >= 0:
                    back[v, i] = int(np.flatnonzero(nbr[u] == v)[0])
        length = np.array([dist[v] for v in order], dtype=np.int64)
        return PortGraph(nbr, back, length, tuple(str(v) for v in order), complete)


def parse_source(source: str) -> GraphSource:
    """Resolve a ``--source`` string to a :class:`GraphSource`."""
    text = source.strip()
    if text.startswith("tiling:"):
        try:
            p, q = (int(part) for part in text.removeprefix("tiling:").split(","))
        except ValueError as exc:
            raise InputFormatError(
                f"bad tiling source {source!r}; expected tiling:<p>,<q>"
            ) from exc
        return TilingSource(p, q)
    if text.startswith("free:"):
        try:
            rank = int(text.removeprefix("free:"))
        except ValueError as exc:
            raise InputFormatError(f"bad free-group source {source!r}") from exc
        return FreeGroupSource(rank)
    if text == "line":
        return LineSource()
    path = Path(text)
    if not path.is_file():
        raise InputFormatError(f"unknown source {source!r} (not a built-in and not a file)")
    return FileSource(path)
