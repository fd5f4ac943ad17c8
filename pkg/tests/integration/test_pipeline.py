"""Integration tests: every CLI command end to end on the free group of rank 2.

These build a real radius-8 ball and run the whole stack (tree of atoms,
classification, rigid structure, synthesis) without mocks, so they are
slower than the unit suite.
"""

import json
import logging
import random
from pathlib import Path

import pytest

from horoboundary.config import RunConfig
from horoboundary.errors import InputFormatError, InsufficientRadiusError
from horoboundary.pipeline import Pipeline, _random_word, run_pipeline
from horoboundary.transducer import parse_transducer


@pytest.fixture
def free_cfg(tmp_path: Path) -> RunConfig:
    return RunConfig(source="free:2", tree_depth=3, horizon=3, output_dir=tmp_path)


@pytest.mark.integration
class TestCommands:
    def test_ball(self, free_cfg: RunConfig):
        result = run_pipeline("ball", free_cfg)
        assert "delta 0" in result.report
        assert "sphere 2 12" in result.report
        assert (free_cfg.output_dir / "ball.txt").exists()

    def test_atoms_with_dump(self, free_cfg: RunConfig):
        result = run_pipeline("atoms", free_cfg, level=1, dump=True)
        assert result.report == "5 atoms, 4 infinite"
        lines = (free_cfg.output_dir / "atoms_1.txt").read_text(encoding="utf-8").splitlines()
        assert len(lines) == 5
        assert lines[0].startswith("atom 0 infinite 0")

    def test_tree(self, free_cfg: RunConfig):
        result = run_pipeline("tree", free_cfg)
        assert result.report == "level sizes 1 4 12 36"
        text = (free_cfg.output_dir / "tree.txt").read_text(encoding="utf-8")
        assert "atom 0.0 path - children 4\n" in text

    @pytest.mark.parametrize(("fmt", "name"), [("text", "types.txt"), ("dot", "types.dot")])
    def test_types(self, free_cfg: RunConfig, fmt, name):
        result = run_pipeline("types", free_cfg, fmt=fmt)
        assert result.report.startswith("2 types\n")
        assert (free_cfg.output_dir / name).exists()

    def test_transducer(self, free_cfg: RunConfig):
        result = run_pipeline("transducer", free_cfg, element="a b")
        assert result.report.startswith("a b: ")
        text = (free_cfg.output_dir / "transducer_a_b.txt").read_text(encoding="utf-8")
        machine = parse_transducer(text)
        assert machine.type_graph.root == "A"
        assert (free_cfg.output_dir / "transducer_a_b.dot").exists()

    def test_encode(self, free_cfg: RunConfig):
        result = run_pipeline("encode", free_cfg, element="a", address_depth=2)
        assert result.report.startswith("12 addresses at depth 2; binary a: ")
        addresses = (free_cfg.output_dir / "addresses_2.txt").read_text(encoding="utf-8")
        bits = [line.split()[1] for line in addresses.splitlines()]
        assert len(set(bits)) == 12
        assert (free_cfg.output_dir / "code.txt").exists()
        assert (free_cfg.output_dir / "binary_a.txt").exists()

    def test_encode_deeper_than_the_tree_raises(self, free_cfg: RunConfig):
        with pytest.raises(InputFormatError, match="address depth"):
            run_pipeline("encode", free_cfg, address_depth=4)

    def test_verify(self, free_cfg: RunConfig):
        result = run_pipeline("verify", free_cfg)
        names = {c.name for c in result.checks}
        assert {"membership", "transducers", "homomorphism"} <= names
        assert all(c.passed for c in result.checks), [str(c) for c in result.checks]
        assert (free_cfg.output_dir / "verify.txt").exists()


@pytest.mark.integration
class TestAuditRecord:
    def test_success_record(self, free_cfg: RunConfig, caplog: pytest.LogCaptureFixture):
        with caplog.at_level(logging.INFO, logger="audit"):
            run_pipeline("ball", free_cfg)
        records = [json.loads(r.getMessage()) for r in caplog.records if r.name == "audit"]
        assert len(records) == 1
        record = records[0]
        assert record["command"] == "ball"
        assert record["status"] == "success"
        assert record["exit_code"] == 0
        assert record["artifacts"] == [str(free_cfg.output_dir / "ball.txt")]

    def test_error_record(self, free_cfg: RunConfig, caplog: pytest.LogCaptureFixture):
        with caplog.at_level(logging.INFO, logger="audit"):
            with pytest.raises(InputFormatError):
                run_pipeline("draw", free_cfg)
        record = json.loads(caplog.records[-1].getMessage())
        assert (record["status"], record["exit_code"]) == ("error", 2)


@pytest.mark.integration
class TestPipelineStages:
    def test_stages_are_cached(self, free_cfg: RunConfig):
        pipeline = Pipeline(free_cfg)
        assert pipeline.tree is pipeline.tree
        assert pipeline.tree.graph is pipeline.graph

    def test_given_delta_skips_estimation(self, tmp_path: Path):
        cfg = RunConfig(source="free:2", tree_depth=3, horizon=3, delta=1, output_dir=tmp_path)
        assert Pipeline(cfg).delta == 1

    def test_level_beyond_the_radius_raises(self, tmp_path: Path):
        cfg = RunConfig(source="free:2", tree_depth=3, horizon=3, radius=6, output_dir=tmp_path)
        pipeline = Pipeline(cfg)
        with pytest.raises(InsufficientRadiusError):
            pipeline.atoms(4)


@pytest.mark.integration
class TestLineSource:
    """The line has isolated types, so encoding goes through the expanded type graph."""

    def test_encode_lifts_the_translation(self, tmp_path: Path):
        cfg = RunConfig(source="line", tree_depth=4, horizon=3, output_dir=tmp_path)
        result = run_pipeline("encode", cfg, element="t", address_depth=4)
        assert result.report.startswith("2 addresses at depth 4; binary t: ")
        machine = parse_transducer((tmp_path / "binary_t.txt").read_text(encoding="utf-8"))
        assert machine.type_graph.root == "X"

    def test_verify(self, tmp_path: Path):
        cfg = RunConfig(source="line", tree_depth=3, horizon=3, output_dir=tmp_path)
        result = run_pipeline("verify", cfg)
        assert "homomorphism" in {c.name for c in result.checks}
        assert all(c.passed for c in result.checks), [str(c) for c in result.checks]


@pytest.mark.integration
class TestRandomWords:
    def test_words_are_seeded(self):
        letters = ["a", "b"]
        first = [_random_word(random.Random(3), letters) for _ in range(2)]
        assert first[0] == first[1]

    def test_words_have_one_to_three_letters(self):
        rng = random.Random(0)
        for _ in range(50):
            tokens = _random_word(rng, ["a", "b"]).split()
            assert 1 <= len(tokens) <= 3
            assert all(t.rstrip("^-1") in {"a", "b"} for t in tokens)
