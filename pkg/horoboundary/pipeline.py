"""Pipeline commands behind the command-line interface.

Each command builds only what it needs (ball, tree, classification, ...)
through :class:`Pipeline`, writes its artifacts to ``cfg.output_dir`` with
fixed file names, and returns a short text report.  :func:`run_pipeline`
wraps a command with one structured audit record.
"""

from __future__ import annotations

import datetime
import json
import logging
import random
import re
import time
import uuid
from collections.abc import Callable
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

from horoboundary import golden
from horoboundary.atoms import (
    AtomTree,
    audit_horizon,
    build_atom_tree,
    chain_violations,
    partition_level,
    partition_violations,
    refinement_violations,
)
from horoboundary.classify import (
    Classification,
    classify_types,
    export_type_graph,
    type_graphs_isomorphic,
)
from horoboundary.config import RunConfig
from horoboundary.errors import (
    AuditError,
    HoroboundaryError,
    InputFormatError,
    SynthesisDivergedError,
)
from horoboundary.graph import LayeredGraph, build_ball, estimate_delta
from horoboundary.group import (
    GroupElement,
    check_relations,
    element_from_word,
    generators,
    inverse,
)
from horoboundary.proximal import (
    ProximalData,
    diameter,
    membership_test,
    proximal_data,
    reconstruct_distance,
)
from horoboundary.selfsimilar import (
    PrefixCode,
    RigidStructure,
    binary_address,
    build_rigid_structure,
    canonical_code,
    expand,
    isolated_types,
    simplify,
)
from horoboundary.synthesis import ActionSynthesizer, image_path
from horoboundary.transducer import (
    AsyncTransducer,
    bounded_equivalent,
    evaluate,
    expand_transducer,
    export_transducer,
    lipschitz_violations,
    minimize,
    nondegeneracy_violations,
    to_binary,
    type_violations,
    valid_words,
)
from horoboundary.transducer import compose as compose_transducers

logger: logging.Logger = logging.getLogger(__name__)
audit_logger: logging.Logger = logging.getLogger("audit")

COMMANDS: tuple[str, ...] = ("ball", "atoms", "tree", "types", "transducer", "verify", "encode")

MEMBERSHIP_SAMPLES = 500
HOMOMORPHISM_PAIRS = 20
HOMOMORPHISM_DEPTH = 6
ADDRESS_CHECK_DEPTH = 8


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""

    def __str__(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}" + (
            f": {self.detail}" if self.detail else ""
        )


@dataclass
class PipelineResult:
    command: str
    report: str
    artifacts: list[Path] = field(default_factory=list)
    checks: list[CheckResult] = field(default_factory=list)


def _slug(word: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "_", word).strip("_") or "id"


def _format_path(slots: tuple[int, ...]) -> str:
    return ".".join(str(s) for s in slots) or "-"


def _random_word(rng: random.Random, letters: list[str]) -> str:
    return " ".join(
        rng.choice(letters) + rng.choice(("", "^-1")) for _ in range(rng.randint(1, 3))
    )


class Pipeline:
    """Lazily built stages of one configured run."""

    def __init__(self, cfg: RunConfig) -> None:
        self.cfg = cfg
        self.artifacts: list[Path] = []

    # ------------------------------------------------------------------
    # Stages
    # ------------------------------------------------------------------

    @cached_property
    def graph(self) -> LayeredGraph:
        cfg = self.cfg
        return build_ball(
            cfg.source, cfg.effective_radius, max(cfg.tree_depth, 2 * cfg.delta_radius)
        )

    @cached_property
    def delta(self) -> int:
        if self.cfg.delta is not None:
            return self.cfg.delta
        delta = estimate_delta(self.graph, self.cfg.delta_radius)
        logger.info("Estimated delta", extra={"delta": delta, "radius": self.cfg.delta_radius})
        return delta

    @cached_property
    def tree(self) -> AtomTree:
        cfg = self.cfg
        return build_atom_tree(self.graph, cfg.tree_depth, cfg.horizon, cfg.horizon_audit)

    @cached_property
    def classification(self) -> Classification:
        return classify_types(
            self.tree, self.delta, self.cfg.cone_depth, self.cfg.equivalence_depth
        )

    @cached_property
    def rigid(self) -> RigidStructure:
        return build_rigid_structure(self.tree, self.classification, self.cfg.equivalence_depth)

    @cached_property
    def synthesizer(self) -> ActionSynthesizer:
        return ActionSynthesizer(
            self.tree,
            self.classification,
            self.rigid,
            self.cfg.equivalence_depth,
            self.cfg.state_bound,
        )

    def proximal(self) -> dict[tuple[int, int], ProximalData]:
        if self.graph.source.has_group:
            return self.classification.proximal
        return {
            atom.id: proximal_data(self.graph, atom, self.delta)
            for level in self.tree.levels
            for atom in level
        }

    def element_transducer(self, word: str) -> AsyncTransducer:
        return self.synthesizer.element(word)

    def write(self, name: str, text: str) -> Path:
        self.cfg.output_dir.mkdir(parents=True, exist_ok=True)
        path = self.cfg.output_dir / name
        path.write_text(text, encoding="utf-8")
        self.artifacts.append(path)
        logger.debug("Wrote artifact", extra={"path": str(path)})
        return path

    # ------------------------------------------------------------------
    # Commands
    # ------------------------------------------------------------------

    def ball(self) -> str:
        graph = self.graph
        lines = [
            f"source {graph.source.name}",
            f"radius {graph.radius}",
            f"vertices {graph.size}",
            f"delta {self.delta}",
        ]
        lines += [f"sphere {n} {size}" for n, size in enumerate(graph.layer_sizes())]
        self.write("ball.txt", "\n".join(lines) + "\n")
        return "\n".join(lines)

    def atoms(self, level: int, dump: bool = False) -> str:
        part = partition_level(self.graph, level, self.cfg.horizon)
        report = f"{len(part.atoms)} atoms, {len(part.infinite_atoms)} infinite"
        if dump:
            lines = [
                f"atom {a.index} infinite {int(a.infinite)} min_length {a.min_length} "
                f"members {' '.join(str(int(v)) for v in a.members)}"
                for a in part.atoms
            ]
            self.write(f"atoms_{level}.txt", "\n".join(lines) + "\n")
        return report

    def tree_report(self) -> str:
        tree = self.tree
        lines = []
        for level in tree.levels:
            for atom in level:
                lines.append(
                    f"atom {atom.level}.{atom.index} path {_format_path(tree.slot_path(atom))} "
                    f"children {len(tree.children(atom))}"
                )
        self.write("tree.txt", "\n".join(lines) + "\n")
        return "level sizes " + " ".join(str(len(level)) for level in tree.levels)

    def types(self, fmt: str = "text") -> str:
        tg = self.classification.type_graph
        document = export_type_graph(tg, fmt)
        self.write(f"types.{'dot' if fmt == 'dot' else 'txt'}", document)
        return f"{len(tg.types)} types\n{export_type_graph(tg, 'text')}".rstrip()

    def transducer(self, element: str) -> str:
        machine = self.element_transducer(element)
        small = minimize(machine, self.cfg.transducer_depth)
        slug = _slug(element)
        self.write(f"transducer_{slug}.txt", export_transducer(small, "text"))
        self.write(f"transducer_{slug}.dot", export_transducer(small, "dot"))
        return f"{element}: {len(machine.states)} states, {len(small.states)} after minimization"

    def prefix_code(self) -> PrefixCode:
        tg = self.classification.type_graph
        if isolated_types(tg):
            tg = expand(tg)
        self.write("types_simplified.txt", export_type_graph(simplify(tg), "text"))
        code = canonical_code(tg)
        self.write("code.txt", code.to_text())
        return code

    def encode(self, element: str | None = None, address_depth: int | None = None) -> str:
        depth = self.cfg.tree_depth if address_depth is None else address_depth
        if depth > self.tree.depth:
            raise InputFormatError(
                f"address depth {depth} exceeds the tree depth {self.tree.depth}"
            )
        tg = self.classification.type_graph
        used = expand(tg) if isolated_types(tg) else tg
        code = self.prefix_code()
        lines = [
            f"{_format_path(chain)} {binary_address(chain, used, code) or '-'}"
            for chain in self.tree.chains(depth)
        ]
        self.write(f"addresses_{depth}.txt", "\n".join(lines) + "\n")
        report = f"{len(lines)} addresses at depth {depth}"
        if element is not None:
            machine = expand_transducer(self.element_transducer(element))
            binary = minimize(to_binary(machine, code))
            self.write(f"binary_{_slug(element)}.txt", export_transducer(binary, "text"))
            report += f"; binary {element}: {len(binary.states)} states"
        return report

    # ------------------------------------------------------------------
    # Verification
    # ------------------------------------------------------------------

    def verify(self) -> tuple[str, list[CheckResult]]:
        checks: list[CheckResult] = []

        def check(name: str, body: Callable[[], list[str]]) -> None:
            try:
                problems = body()
            except HoroboundaryError as exc:
                problems = [f"{type(exc).__name__}: {exc}"]
            checks.append(CheckResult(name, not problems, "; ".join(problems[:3])))
            logger.info("Check finished", extra={"check": name, "passed": not problems})

        check("layers", self._check_layers)
        check("partitions", self._check_partitions)
        check("horizon", self._check_horizon)
        check("chains", self._check_chains)
        check("proximal", self._check_proximal)
        check("membership", self._check_membership)
        check("reconstruction", self._check_reconstruction)
        if self.graph.source.has_group:
            check("group relations", self._check_group_relations)
            check("rigid structure", self._check_rigid)
            check("prefix code", self._check_code)
            check("transducers", self._check_transducers)
            check("transducer relations", self._check_transducer_relations)
            check("homomorphism", self._check_homomorphism)
        if self.graph.source.name == golden.SOURCE:
            check("golden counts", self._check_golden_counts)
            check("golden types", self._check_golden_types)
            check("golden transducers", self._check_golden_transducers)

        text = "\n".join(str(c) for c in checks) + "\n"
        self.write("verify.txt", text)
        failed = [c.name for c in checks if not c.passed]
        if failed:
            raise AuditError(f"{len(failed)} check(s) failed: {', '.join(failed)}")
        return f"{len(checks)} checks passed", checks

    def _check_layers(self) -> list[str]:
        graph = self.graph
        return [
            f"vertex {v} at level {graph.length[v]} has no predecessor"
            for v in range(1, graph.size)
            if not graph.predecessors(v)
        ]

    def _check_partitions(self) -> list[str]:
        parts = self.tree.partitions
        problems: list[str] = []
        for n in range(1, self.tree.depth + 1):
            problems += partition_violations(self.graph, parts[n])
            problems += refinement_violations(parts[n - 1], parts[n])
        return problems

    def _check_horizon(self) -> list[str]:
        for n in range(self.tree.depth + 1):
            audit_horizon(self.graph, n, self.cfg.horizon)
        return []

    def _check_chains(self) -> list[str]:
        tree = self.tree
        problems: list[str] = []
        for slots in tree.chains(tree.depth):
            problems += chain_violations(self.graph, tree.chain(slots))
        return problems

    def _check_proximal(self) -> list[str]:
        bound = 8 * self.delta + 4
        problems = []
        for aid, data in self.proximal().items():
            if not data.nearest <= data.visible <= data.proximal:
                problems.append(f"atom {aid}: N <= V <= P fails")
            if diameter(self.graph, data.proximal) > bound:
                problems.append(f"atom {aid}: proximal diameter exceeds {bound}")
        return problems

    def _check_membership(self) -> list[str]:
        rng = random.Random(self.cfg.seed)
        tree, graph = self.tree, self.graph
        prox = self.proximal()
        atoms = [a for level in tree.levels[1:] for a in level]
        problems = []
        for _ in range(MEMBERSHIP_SAMPLES if atoms else 0):
            atom = rng.choice(atoms)
            labels = tree.partitions[atom.level].labels
            pool = graph.sphere(rng.randint(atom.level, tree.depth))
            x = int(rng.choice(pool))
            if labels[x] < 0:
                continue
            if membership_test(graph, x, atom, prox[atom.id]) != (labels[x] == atom.index):
                problems.append(f"membership of {x} in {atom.id} is wrong")
        return problems

    def _check_reconstruction(self) -> list[str]:
        graph = self.graph
        problems = []
        for aid, data in self.proximal().items():
            n = data.level
            if n == 0:
                continue
            atom = self.tree.partitions[n].atoms[aid[1]]
            x = int(atom.members[0])
            row = graph.distances_from(x)
            for b in range(graph.ball_size(n)):
                if reconstruct_distance(graph, b, x, data.proximal) != int(row[b]):
                    problems.append(f"distance {b}->{x} not reconstructed through P({aid})")
                    break
        return problems

    def _check_group_relations(self) -> list[str]:
        results = check_relations(self.graph, self.cfg.faithfulness_radius)
        return [f"relation {rel} is not the identity" for rel, ok in results.items() if not ok]

    def _check_rigid(self) -> list[str]:
        return self.rigid.cocycle_violations() + self.rigid.restriction_violations()

    def _check_code(self) -> list[str]:
        code = self.prefix_code()
        tg = self.classification.type_graph
        used = expand(tg) if isolated_types(tg) else tg
        problems = [
            f"code of {name} is not complete and prefix-free"
            for name in code.words
            if code.kraft_sum(name) != 1 or not code.is_prefix_free(name)
        ]
        for depth in range(1, ADDRESS_CHECK_DEPTH + 1):
            addresses = [binary_address(w, used, code) for w in valid_words(used, used.root, depth)]
            if len(set(addresses)) != len(addresses):
                problems.append(f"addresses of length-{depth} paths collide")
        return problems

    def _letters(self) -> dict[str, int]:
        return {name: g.magnitude for name, g in generators(self.graph).items()}

    def _check_transducers(self) -> list[str]:
        problems: list[str] = []
        depth = self.cfg.transducer_depth
        for name, size in self._letters().items():
            for sign in (1, -1):
                machine = self.synthesizer.letter(name, sign)
                label = name if sign > 0 else f"{name}^-1"
                problems += [f"{label}: {p}" for p in type_violations(machine)]
                problems += [f"{label}: {p}" for p in nondegeneracy_violations(machine)]
                problems += [f"{label}: {p}" for p in lipschitz_violations(machine, size, depth)]
                g = generators(self.graph)[name]
                element = g if sign > 0 else inverse(g)
                for length in range(self.tree.depth + 1):
                    for slots in self.tree.chains(length):
                        expected = image_path(element, self.tree, slots, self.cfg.equivalence_depth)
                        if expected is not None and evaluate(machine, slots) != expected:
                            problems.append(f"{label}: chain {_format_path(slots)} disagrees")
        return problems

    def _check_transducer_relations(self) -> list[str]:
        results = self.synthesizer.relation_audit(self.cfg.transducer_depth)
        return [f"relation {rel} fails on transducers" for rel, ok in results.items() if not ok]

    def _check_homomorphism(self) -> list[str]:
        """``T_g T_h`` against ``T_gh`` for random word pairs of length at most 3.

        When ``gh`` is too long to synthesize directly, the composed machine
        is compared with the image atoms of ``gh`` along every tree chain.
        """
        rng = random.Random(self.cfg.seed)
        letters = sorted(generators(self.graph))
        problems = []
        for _ in range(HOMOMORPHISM_PAIRS):
            g, h = (_random_word(rng, letters) for _ in range(2))
            composed = compose_transducers(
                self.synthesizer.element(h), self.synthesizer.element(g)
            )
            gh = element_from_word(f"{g} {h}", self.graph)
            try:
                direct = self.synthesizer.transducer(gh)
            except SynthesisDivergedError:
                problems += self._chain_disagreements(composed, gh, f"T_({g}) T_({h})")
                continue
            if not bounded_equivalent(composed, direct, HOMOMORPHISM_DEPTH):
                problems.append(f"T_({g}) T_({h}) differs from T_({g} {h})")
        return problems

    def _chain_disagreements(
        self, machine: AsyncTransducer, element: GroupElement, label: str
    ) -> list[str]:
        tree = self.tree
        for length in range(1, tree.depth + 1):
            for slots in tree.chains(length):
                expected = image_path(element, tree, slots, self.cfg.equivalence_depth)
                if expected is None:
                    continue
                out = evaluate(machine, slots)
                common = min(len(out), len(expected))
                if out[:common] != expected[:common]:
                    return [f"{label}: chain {_format_path(slots)} leaves its image atom"]
        return []

    def _check_golden_counts(self) -> list[str]:
        graph = self.graph
        sizes = graph.layer_sizes()
        problems = [
            f"|S_{n}| = {sizes[n]}, expected {want}"
            for n, want in golden.SPHERE_SIZES.items()
            if sizes[n] != want
        ]
        for level, (total, infinite) in golden.ATOM_COUNTS.items():
            part = self.tree.partitions[level]
            got = (len(part.atoms), len(part.infinite_atoms))
            if got != (total, infinite):
                problems.append(f"level {level} atoms {got}, expected {(total, infinite)}")
        return problems

    def _check_golden_types(self) -> list[str]:
        tg = self.classification.type_graph
        if type_graphs_isomorphic(tg, golden.TYPE_GRAPH):
            return []
        return [f"type graph {dict(tg.children)} does not match the reference"]

    def _check_golden_transducers(self) -> list[str]:
        problems = []
        depth = 8
        for name, reference in (("r", golden.r_machine()), ("s", golden.s_machine())):
            machine = minimize(self.synthesizer.letter(name), self.cfg.transducer_depth)
            if machine.type_graph != reference.type_graph:
                problems.append(f"{name}: slot layout differs from the reference")
            elif not bounded_equivalent(machine, reference, depth):
                problems.append(f"{name}: differs from the reference machine")
        s_states = len(minimize(self.synthesizer.letter("s"), self.cfg.transducer_depth).states)
        if s_states != golden.S_CLASS_COUNT:
            problems.append(f"s has {s_states} classes, expected {golden.S_CLASS_COUNT}")
        return problems


def run_pipeline(command: str, cfg: RunConfig, **options: object) -> PipelineResult:
    """Run one command and emit a structured audit record.

    Raises:
        InputFormatError: for an unknown command.
        HoroboundaryError: whatever the command raises, after auditing it.
    """
    pipeline = Pipeline(cfg)
    run_id = str(uuid.uuid4())
    start = time.monotonic()
    status = "success"
    exit_code = 0
    try:
        checks: list[CheckResult] = []
        match command:
            case "ball":
                report = pipeline.ball()
            case "atoms":
                level = options.get("level")
                report = pipeline.atoms(
                    int(level) if isinstance(level, int) else 1, bool(options.get("dump"))
                )
            case "tree":
                report = pipeline.tree_report()
            case "types":
                report = pipeline.types(str(options.get("fmt") or "text"))
            case "transducer":
                report = pipeline.transducer(str(options.get("element") or "r"))
            case "verify":
                report, checks = pipeline.verify()
            case "encode":
                element = options.get("element")
                depth = options.get("address_depth")
                report = pipeline.encode(
                    str(element) if element is not None else None,
                    depth if isinstance(depth, int) else None,
                )
            case _:
                raise InputFormatError(
                    f"unknown command {command!r}; choose from {', '.join(COMMANDS)}"
                )
        return PipelineResult(command, report, pipeline.artifacts, checks)
    except HoroboundaryError as exc:
        status = "error"
        exit_code = exc.exit_code
        raise
    except Exception:  # noqa: BLE001
        status = "error"
        exit_code = 1
        raise
    finally:
        latency_ms = round((time.monotonic() - start) * 1000, 2)
        audit_logger.info(
            json.dumps(
                {
                    "run_id": run_id,
                    "command": command,
                    "source": cfg.source,
                    "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
                    "latency_ms": latency_ms,
                    "status": status,
                    "exit_code": exit_code,
                    "artifacts": [str(p) for p in pipeline.artifacts],
                }
            )
        )
