"""horoboundary: the boundary of a hyperbolic graph as a tree of atoms.

Builds finite balls of a locally finite hyperbolic graph, partitions them
into atoms of horofunction germs, types the tree of atoms into a finite type
graph, and synthesizes the asynchronous transducers through which the
automorphism group acts on the boundary.

Public API
----------
build_ball
    Neighbour-complete ball of a graph source (``tiling:p,q``, ``free:k``,
    ``line`` or an edge file).
build_atom_tree
    Infinite atoms of levels ``0..N`` with planar child slots.
classify_types
    Types of tree atoms and the type graph.
build_rigid_structure
    Markings of every tree atom onto its type representative.
synthesize_action_transducer
    Transducer realising a group element on the boundary.
load_run_config / run_pipeline
    Configuration and the commands behind the CLI.

Example
-------
>>> from horoboundary import build_ball, build_atom_tree
>>> graph = build_ball("tiling:4,5", 8)
>>> tree = build_atom_tree(graph, depth=2, horizon=4)
>>> [len(level) for level in tree.levels]
[1, 10, 30]
"""

from horoboundary.atoms import build_atom_tree
from horoboundary.classify import classify_types
from horoboundary.config import RunConfig, load_run_config
from horoboundary.graph import build_ball
from horoboundary.pipeline import run_pipeline
from horoboundary.selfsimilar import build_rigid_structure
from horoboundary.synthesis import synthesize_action_transducer

__all__: list[str] = [
    "RunConfig",
    "build_atom_tree",
    "build_ball",
    "build_rigid_structure",
    "classify_types",
    "load_run_config",
    "run_pipeline",
    "synthesize_action_transducer",
]
