"""Finite balls of a hyperbolic graph and the queries built on them.

:func:`build_ball` turns a :class:`~horoboundary.sources.GraphSource` into a
:class:`LayeredGraph`: layers, a port structure, a canonical planar order of
each sphere, and a table of ball distances from every vertex of ``B_rows``.

A ball distance can overestimate the true distance near the rim.  A pair
``(b, x)`` is *certified* when either

* ``l(b) + l(x) + D(b, x) <= 2R + 2``, so no shortcut through the outside
  could be shorter, or
* a shortest path inside the ball avoids the rim except possibly at ``x``.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass
from itertools import islice

import networkx as nx
import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from horoboundary.errors import InputFormatError, InsufficientRadiusError
from horoboundary.sources import GraphSource, parse_source

logger: logging.Logger = logging.getLogger(__name__)

_CHUNK = 64


@dataclass(frozen=True)
class Distance:
    """A ball distance together with its certification flag."""

    value: int
    certified: bool

    def __int__(self) -> int:
        return self.value


@dataclass(frozen=True)
class ConeSignature:
    """Fingerprint of a truncated cone up to layer-respecting isomorphism."""

    depth: int
    digest: str


class LayeredGraph:
    """Neighbour-complete ball ``B_R`` around a base vertex.

    Vertex ids are breadth-first, so ``B_n`` is ``range(ball_size(n))`` and
    ``S_n`` is ``range(layer_offsets[n], layer_offsets[n + 1])``.  The object
    is read-only after construction apart from memoised distance rows.
    """

    base_vertex: int = 0

    def __init__(self, source: GraphSource, radius: int, rows_level: int) -> None:
        ports = source.build(radius)
        self.source = source
        self.ports = ports
        self.radius = radius
        self.symmetry = source.symmetry
        self.nbr: np.ndarray = ports.nbr
        self.back: np.ndarray = ports.back
        self.length: np.ndarray = ports.length
        self.labels = ports.labels
        self.complete = ports.complete or int(ports.length.max(initial=0)) < radius
        self.size = int(len(self.length))
        self.degree = int(self.nbr.shape[1])
        counts = np.bincount(self.length, minlength=radius + 1)
        self.layer_offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)

        valid = self.nbr >= 0
        rows = np.repeat(np.arange(self.size), self.degree)[valid.ravel()]
        cols = self.nbr.ravel()[valid.ravel()]
        self.adjacency = csr_matrix(
            (np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(self.size, self.size)
        )
        self._interior = self.size if self.complete else self.ball_size(radius - 1)
        self._interior_adjacency = self.adjacency[: self._interior, : self._interior]
        self._rim_preds = self._rim_predecessors()

        self.parent, self.parent_port = self._canonical_tree()
        self.sphere_order = self._planar_spheres()

        self.rows_level = min(rows_level, radius)
        self._rows = self.ball_size(self.rows_level)
        self._dist, self._cert = self._bfs_rows(np.arange(self._rows))
        self._row_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        self._nx_cache: dict[int, nx.Graph] = {}
        logger.info(
            "Built layered ball",
            extra={
                "source": source.name,
                "radius": radius,
                "vertices": self.size,
                "layer_sizes": self.layer_sizes(),
            },
        )

    # ------------------------------------------------------------------
    # Layers
    # ------------------------------------------------------------------

    def layer_sizes(self) -> list[int]:
        return [int(c) for c in np.diff(self.layer_offsets)]

    def ball_size(self, n: int) -> int:
        n = min(max(n, -1), self.radius)
        return int(self.layer_offsets[n + 1])

    def sphere(self, n: int) -> np.ndarray:
        if not 0 <= n <= self.radius:
            raise InsufficientRadiusError(f"sphere S_{n} is outside the radius-{self.radius} ball")
        return np.arange(self.layer_offsets[n], self.layer_offsets[n + 1])

    def neighbors(self, v: int) -> list[int]:
        return [int(u) for u in self.nbr[v] if u >= 0]

    def successors(self, v: int) -> list[int]:
        return [u for u in self.neighbors(v) if self.length[u] == self.length[v] + 1]

    def predecessors(self, v: int) -> list[int]:
        return [u for u in self.neighbors(v) if self.length[u] == self.length[v] - 1]

    def port_to(self, v: int, u: int) -> int:
        hits = np.flatnonzero(self.nbr[v] == u)
        if len(hits) == 0:
            raise InputFormatError(f"vertices {v} and {u} are not adjacent")
        return int(hits[0])

    # ------------------------------------------------------------------
    # Canonical tree and planar order
    # ------------------------------------------------------------------

    def _canonical_tree(self) -> tuple[np.ndarray, np.ndarray]:
        valid = self.nbr >= 0
        nbr_len = np.where(valid, self.length[np.where(valid, self.nbr, 0)], -2)
        is_pred = valid & (nbr_len == self.length[:, None] - 1)
        parent = np.where(is_pred, self.nbr, self.size).min(axis=1)
        parent[0] = -1
        parent_port = np.full(self.size, -1, dtype=np.int64)
        has_parent = parent >= 0
        idx = np.flatnonzero(has_parent)
        parent_port[idx] = (self.nbr[parent[idx]] == idx[:, None]).argmax(axis=1)
        return parent, parent_port

    def _planar_spheres(self) -> list[list[int]]:
        spheres: list[list[int]] = [[] for _ in range(self.radius + 1)]
        if self.symmetry == "none":
            for v in range(self.size):
                spheres[int(self.length[v])].append(v)
            return spheres
        kids: list[list[int]] = [[] for _ in range(self.size)]
        for v in range(self.size):
            start = 0 if v == 0 else int(self.back[self.parent[v], self.parent_port[v]]) + 1
            for t in range(self.degree):
                u = int(self.nbr[v, (start + t) % self.degree])
                if u >= 0 and self.parent[u] == v:
                    kids[v].append(u)
        stack = [0]
        while stack:
            v = stack.pop()
            spheres[int(self.length[v])].append(v)
            stack.extend(reversed(kids[v]))
        return spheres

    # ------------------------------------------------------------------
    # Distances
    # ------------------------------------------------------------------

    def _rim_predecessors(self) -> np.ndarray:
        rim = np.arange(self._interior, self.size)
        if len(rim) == 0:
            return np.zeros((0, 1), dtype=np.int64)
        preds = [self.predecessors(int(v)) or [0] for v in rim]
        width = max(len(p) for p in preds)
        return np.array([p + [p[0]] * (width - len(p)) for p in preds], dtype=np.int64)

    def _bfs_rows(self, sources: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        dist = np.empty((len(sources), self.size), dtype=np.int16)
        cert = np.ones((len(sources), self.size), dtype=bool)
        limit = 2 * self.radius + 2
        for lo in range(0, len(sources), _CHUNK):
            chunk = sources[lo : lo + _CHUNK]
            full = shortest_path(self.adjacency, method="D", unweighted=True, indices=chunk)
            full = np.where(np.isinf(full), np.iinfo(np.int16).max, full).astype(np.int16)
            dist[lo : lo + len(chunk)] = full
            if self.complete:
                continue
            bound = self.length[chunk][:, None] + self.length[None, :] + full <= limit
            inner_rows = chunk < self._interior
            alt_ok = np.zeros_like(bound)
            if inner_rows.any():
                inner_src = chunk[inner_rows]
                inner = shortest_path(
                    self._interior_adjacency, method="D", unweighted=True, indices=inner_src
                )
                alt = np.empty((len(inner_src), self.size))
                alt[:, : self._interior] = inner
                if len(self._rim_preds):
                    alt[:, self._interior :] = inner[:, self._rim_preds].min(axis=2) + 1
                alt_ok[inner_rows] = alt == full[inner_rows]
            cert[lo : lo + len(chunk)] = bound | alt_ok
        return dist, cert

    def _row(self, u: int) -> tuple[np.ndarray, np.ndarray]:
        if u < self._rows:
            return self._dist[u], self._cert[u]
        if u not in self._row_cache:
            d, c = self._bfs_rows(np.array([u]))
            self._row_cache[u] = (d[0], c[0])
        return self._row_cache[u]

    def distances_from(self, u: int) -> np.ndarray:
        """Ball distances from ``u`` to every vertex (memoised)."""
        return self._row(u)[0]

    def certified_from(self, u: int) -> np.ndarray:
        return self._row(u)[1]

    def distance(self, x: int, y: int) -> Distance:
        """Ball distance between ``x`` and ``y``, flagged uncertified near the rim."""
        if not (0 <= x < self.size and 0 <= y < self.size):
            raise InsufficientRadiusError(f"vertex pair ({x}, {y}) is outside the ball")
        if y < self._rows and x >= self._rows:
            x, y = y, x
        d, c = self._row(x)
        return Distance(int(d[y]), bool(c[y]))

    def distance_block(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Rows of the distance table for ``B_n``: ``(values, certified)``."""
        if n > self.rows_level:
            raise InsufficientRadiusError(
                f"distance rows cover B_{self.rows_level}, level {n} requested"
            )
        bn = self.ball_size(n)
        return self._dist[:bn], self._cert[:bn]

    def geodesic(self, src: int, dst: int) -> list[int]:
        """One ball geodesic from ``src`` to ``dst``, choosing the lowest port at each step."""
        row = self.distances_from(src)
        path = [dst]
        v = dst
        while v != src:
            for u in self.nbr[v]:
                if u >= 0 and row[u] == row[v] - 1:
                    v = int(u)
                    break
            path.append(v)
        path.reverse()
        return path

    # ------------------------------------------------------------------
    # Cones
    # ------------------------------------------------------------------

    def cone(self, x: int, k: int) -> frozenset[int]:
        """Vertices ``y`` with ``l(y) = l(x) + d(x, y)`` and ``d(x, y) <= k``."""
        if self.length[x] + k > self.radius:
            raise InsufficientRadiusError(
                f"cone of {x} to depth {k} exceeds radius {self.radius}"
            )
        members = {x}
        frontier = [x]
        for _ in range(k):
            frontier = sorted({u for v in frontier for u in self.successors(v)})
            members.update(frontier)
        return frozenset(members)

    def _encode_cone(self, x: int, members: frozenset[int], start: int) -> tuple[object, ...]:
        order = {x: 0}
        entry = {x: start}
        queue = [x]
        out: list[tuple[int, tuple[int, ...]]] = []
        for v in queue:
            row: list[int] = []
            s = entry[v]
            for t in range(self.degree):
                j = (s + t) % self.degree
                u = int(self.nbr[v, j])
                if u < 0 or u not in members:
                    row.append(-1)
                    continue
                if u not in order:
                    order[u] = len(order)
                    entry[u] = int(self.back[v, j]) if self.symmetry == "cyclic" else 0
                    queue.append(u)
                row.append(order[u])
            out.append((int(self.length[v] - self.length[x]), tuple(row)))
        return tuple(out)

    def cone_signature(self, x: int, k: int) -> ConeSignature:
        """Canonical fingerprint of the cone of ``x`` truncated at depth ``k``."""
        members = self.cone(x, k)
        if self.symmetry == "none":
            sub = nx.Graph(self.to_networkx().subgraph(members))
            for v in sub.nodes:
                sub.nodes[v]["depth"] = str(int(self.length[v] - self.length[x]))
            digest = nx.weisfeiler_lehman_graph_hash(sub, node_attr="depth", iterations=k + 1)
            return ConeSignature(k, digest)
        starts = range(self.degree) if self.symmetry == "cyclic" else range(1)
        best = min(self._encode_cone(x, members, s) for s in starts)
        digest = hashlib.blake2b(repr(best).encode(), digest_size=12).hexdigest()
        return ConeSignature(k, digest)

    # ------------------------------------------------------------------
    # Export
    # ------------------------------------------------------------------

    def to_networkx(self, level: int | None = None) -> nx.Graph:
        """The ball (or ``B_level``) as a networkx graph with ``length`` node data."""
        bound = self.size if level is None else self.ball_size(level)
        if bound in self._nx_cache:
            return self._nx_cache[bound]
        graph = nx.Graph()
        for v in range(bound):
            graph.add_node(v, length=int(self.length[v]), label=self.labels[v])
        rows, cols = self.adjacency.nonzero()
        graph.add_edges_from(
            (int(a), int(b)) for a, b in zip(rows, cols, strict=True) if a < b < bound
        )
        self._nx_cache[bound] = graph
        return graph


def build_ball(
    source: GraphSource | str, radius: int, rows_level: int | None = None
) -> LayeredGraph:
    """Build the ball of the given radius around the source's base vertex.

    Args:
        source: A source object or a ``--source`` string.
        radius: Ball radius ``R``.
        rows_level: Distances are tabulated from every vertex of ``B_rows_level``;
            defaults to ``min(R, 4)``.
    """
    if radius < 0:
        raise InputFormatError(f"radius must be non-negative, got {radius}")
    src = parse_source(source) if isinstance(source, str) else source
    return LayeredGraph(src, radius, min(radius, 4) if rows_level is None else rows_level)


def all_geodesics(graph: LayeredGraph, src: int, dst: int, limit: int = 10_000) -> list[list[int]]:
    """Enumerate ball geodesics from ``src`` to ``dst`` with networkx."""
    level = max(int(graph.length[src]), int(graph.length[dst]))
    sub = graph.to_networkx(level) if src == 0 else graph.to_networkx()
    return [list(p) for p in islice(nx.all_shortest_paths(sub, src, dst), limit)]


def _bottleneck(graph: LayeredGraph, dist: np.ndarray, a: int, c: int) -> np.ndarray:
    """For every ``v``: the largest distance from ``v`` to some geodesic ``[a, c]``."""
    m = dist.shape[0]
    span = dist[a] + dist[c]
    inside = np.flatnonzero(span == dist[a, c])
    inside = inside[np.argsort(dist[a, inside], kind="stable")]
    member = set(inside.tolist())
    best: dict[int, np.ndarray] = {}
    for u in inside:
        u = int(u)
        if u == a:
            best[u] = dist[a].copy()
            continue
        preds = [
            int(w)
            for w in graph.nbr[u]
            if 0 <= w < m and int(w) in member and dist[a, w] == dist[a, u] - 1
        ]
        reach = np.max(np.stack([best[w] for w in preds]), axis=0)
        best[u] = np.minimum(dist[u], reach)
    return best[c]


def estimate_delta(graph: LayeredGraph, max_radius: int) -> int:
    """Least ``delta`` making every geodesic triangle with corners in ``B_max_radius`` thin.

    Geodesics between points of ``B_r`` stay in ``B_2r``, so the search runs
    on the distance table of ``B_2r``, over all geodesics of each side.
    """
    if max_radius < 0 or 2 * max_radius > graph.rows_level:
        raise InsufficientRadiusError(
            f"delta estimation at radius {max_radius} needs distance rows for "
            f"B_{2 * max_radius}, have B_{graph.rows_level}"
        )
    m = graph.ball_size(2 * max_radius)
    values, cert = graph.distance_block(2 * max_radius)
    if not cert[:, :m].all():
        logger.warning(
            "Uncertified distances inside the delta window", extra={"radius": max_radius}
        )
    dist = values[:, :m].astype(np.int32)
    corners = graph.ball_size(max_radius)

    thin: dict[tuple[int, int], np.ndarray] = {}
    for a in range(corners):
        for c in range(a, corners):
            thin[a, c] = thin[c, a] = _bottleneck(graph, dist, a, c)
    logger.info("Computed geodesic bottlenecks", extra={"pairs": len(thin), "corners": corners})

    delta = 0
    for a in range(corners):
        for b in range(a, corners):
            interval = np.flatnonzero(dist[a] + dist[b] == dist[a, b])
            for c in range(corners):
                worst = int(np.minimum(thin[a, c][interval], thin[b, c][interval]).max())
                delta = max(delta, worst)
    return delta
