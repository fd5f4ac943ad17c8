"""Shared pytest fixtures for the horoboundary test suite.

Fixtures defined here are available to all test modules (unit, integration,
evaluation) without any import.

Balls, trees and classifications are expensive, so every geometric fixture is
session scoped and must be treated as read-only by the tests that use it.
"""

from pathlib import Path

import pytest

from horoboundary import golden
from horoboundary.atoms import AtomTree, build_atom_tree
from horoboundary.classify import Classification, classify_types
from horoboundary.config import RunConfig
from horoboundary.graph import LayeredGraph, build_ball
from horoboundary.pipeline import Pipeline
from horoboundary.selfsimilar import RigidStructure, build_rigid_structure
from horoboundary.synthesis import ActionSynthesizer
from horoboundary.transducer import AsyncTransducer

# ---------------------------------------------------------------------------
# Free group of rank 2 (a tree, delta = 0)
# ---------------------------------------------------------------------------

@pytest.fixture(scope="session")
def free_graph() -> LayeredGraph:
    """Radius-7 ball of the Cayley tree of F_2, distance rows for B_4."""
    return build_ball("free:2", 7)


@pytest.fixture(scope="session")
def free_tree(free_graph: LayeredGraph) -> AtomTree:
    """Tree of atoms to depth 3 with horizon 3."""
    return build_atom_tree(free_graph, depth=3, horizon=3)


@pytest.fixture(scope="session")
def free_classification(free_tree: AtomTree) -> Classification:
    return classify_types(free_tree, delta=0)


@pytest.fixture(scope="session")
def free_rigid(free_tree: AtomTree, free_classification: Classification) -> RigidStructure:
    return build_rigid_structure(free_tree, free_classification)


@pytest.fixture(scope="session")
def free_synthesizer(
    free_tree: AtomTree, free_classification: Classification, free_rigid: RigidStructure
) -> ActionSynthesizer:
    return ActionSynthesizer(free_tree, free_classification, free_rigid)


# ---------------------------------------------------------------------------
# The integers and the {4,5} tiling
# ---------------------------------------------------------------------------

@pytest.fixture(scope="session")
def line_graph() -> LayeredGraph:
    return build_ball("line", 8)


@pytest.fixture(scope="session")
def tiling_graph() -> LayeredGraph:
    """Radius-8 ball of the {4,5} tiling with distance rows for B_4."""
    return build_ball(golden.SOURCE, 8, 4)


@pytest.fixture(scope="session")
def tiling_pipeline(tmp_path_factory: pytest.TempPathFactory) -> Pipeline:
    """Default-configured {4,5} run (N = 4, H = 4, R = 9) writing to a temp dir.

    Stages are cached on the object, so the ball, tree and classification are
    built once for every test that asks for this fixture.
    """
    out: Path = tmp_path_factory.mktemp("tiling_artifacts")
    cfg = RunConfig(source=golden.SOURCE, tree_depth=4, horizon=4, output_dir=out)
    return Pipeline(cfg)


# ---------------------------------------------------------------------------
# Hand-built machines
# ---------------------------------------------------------------------------

@pytest.fixture
def r_machine() -> AsyncTransducer:
    """Reference machine of the rotation r about the base vertex."""
    return golden.r_machine()


@pytest.fixture
def s_machine() -> AsyncTransducer:
    """Reference machine of the edge flip s."""
    return golden.s_machine()
