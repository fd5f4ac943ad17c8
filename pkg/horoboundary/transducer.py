"""Asynchronous transducers over type-graph path spaces.

A transducer reads child slots one at a time and writes a finite (possibly
empty) word of child slots per input symbol.  Every state carries an input
type and an output type: from a state of input type ``T`` the legal inputs
are the child slots of ``T``, and the output word must be a path of the type
graph starting at the state's output type.

Binary machines use the one-type graph ``X -> (X, X)``.
"""

from __future__ import annotations

import logging
from collections import deque
from collections.abc import Iterator, Sequence
from dataclasses import dataclass

import graphviz
import networkx as nx

from horoboundary.classify import TypeGraph, parse_type_graph, type_graph_to_text
from horoboundary.errors import (
    AlphabetMismatchError,
    CodeMismatchError,
    InputFormatError,
    InputRejectedError,
    NonBranchingError,
)
from horoboundary.selfsimilar import PrefixCode, binary_address, expand, isolated_types

logger: logging.Logger = logging.getLogger(__name__)

Word = tuple[int, ...]

BINARY = TypeGraph("X", {"X": ("X", "X")})


@dataclass(frozen=True)
class State:
    id: str
    in_type: str
    out_type: str


@dataclass(frozen=True)
class AsyncTransducer:
    """Deterministic asynchronous transducer.

    Attributes:
        type_graph: Governs legal inputs and outputs.
        states: States keyed by id.
        initial: Id of the initial state.
        transitions: ``(state id, slot) -> (target id, output word)``.
    """

    type_graph: TypeGraph
    states: dict[str, State]
    initial: str
    transitions: dict[tuple[str, int], tuple[str, Word]]

    def step(self, state: str, slot: int) -> tuple[str, Word]:
        try:
            return self.transitions[state, slot]
        except KeyError:
            in_type = self.states[state].in_type
            raise InputRejectedError(
                f"slot {slot} is not a legal input in state {state} (type {in_type})"
            ) from None

    def run(self, word: Sequence[int], start: str | None = None) -> tuple[str, Word]:
        """Final state and concatenated output after reading ``word``."""
        state = self.initial if start is None else start
        out: list[int] = []
        for slot in word:
            state, piece = self.step(state, slot)
            out.extend(piece)
        return state, tuple(out)

    def slots(self, state: str) -> range:
        return range(self.type_graph.out_degree(self.states[state].in_type))

    def reachable(self) -> list[str]:
        """State ids reachable from the initial state, breadth first in slot order."""
        seen = {self.initial: None}
        queue = deque([self.initial])
        while queue:
            q = queue.popleft()
            for slot in self.slots(q):
                target = self.transitions[q, slot][0]
                if target not in seen:
                    seen[target] = None
                    queue.append(target)
        return list(seen)


def evaluate(t: AsyncTransducer, word: Sequence[int]) -> Word:
    """Output word for an input slot word.

    Raises:
        InputRejectedError: if ``word`` is not a path from the initial type.
    """
    return t.run(word)[1]


def identity_transducer(tg: TypeGraph) -> AsyncTransducer:
    states = {f"id_{name}": State(f"id_{name}", name, name) for name in tg.types}
    transitions = {
        (f"id_{name}", slot): (f"id_{kid}", (slot,))
        for name, kids in tg.children.items()
        for slot, kid in enumerate(kids)
    }
    return AsyncTransducer(tg, states, f"id_{tg.root}", transitions)


def valid_words(tg: TypeGraph, start: str, length: int) -> Iterator[Word]:
    """Every slot path of the given length from type ``start``, in lexicographic order."""
    stack: list[tuple[str, Word]] = [(start, ())]
    while stack:
        name, word = stack.pop()
        if len(word) == length:
            yield word
            continue
        kids = tg.children[name]
        stack.extend((kid, word + (slot,)) for slot, kid in reversed(list(enumerate(kids))))


# ---------------------------------------------------------------------------
# Algebra
# ---------------------------------------------------------------------------

def compose(t1: AsyncTransducer, t2: AsyncTransducer) -> AsyncTransducer:
    """The machine that feeds the output of ``t1`` into ``t2`` (``t2`` after ``t1``).

    Raises:
        AlphabetMismatchError: if the type graphs differ or an output of ``t1``
            is not a legal input for ``t2``.
    """
    if t1.type_graph != t2.type_graph:
        raise AlphabetMismatchError("cannot compose transducers over different type graphs")
    start = (t1.initial, t2.initial)
    ids = {start: f"{t1.initial}/{t2.initial}"}
    states: dict[str, State] = {}
    transitions: dict[tuple[str, int], tuple[str, Word]] = {}
    queue = deque([start])
    while queue:
        q1, q2 = queue.popleft()
        s1, s2 = t1.states[q1], t2.states[q2]
        if s1.out_type != s2.in_type:
            raise AlphabetMismatchError(
                f"state {q1} writes type {s1.out_type} but {q2} reads type {s2.in_type}"
            )
        here = ids[q1, q2]
        states[here] = State(here, s1.in_type, s2.out_type)
        for slot in t1.slots(q1):
            p1, word = t1.transitions[q1, slot]
            try:
                p2, out = t2.run(word, start=q2)
            except InputRejectedError as exc:
                raise AlphabetMismatchError(str(exc)) from exc
            if (p1, p2) not in ids:
                ids[p1, p2] = f"{p1}/{p2}"
                queue.append((p1, p2))
            transitions[here, slot] = (ids[p1, p2], out)
    return AsyncTransducer(t1.type_graph, states, ids[start], transitions)


def power(t: AsyncTransducer, k: int) -> AsyncTransducer:
    if k < 0:
        raise InputFormatError("transducer powers must be non-negative; synthesize the inverse")
    result = identity_transducer(t.type_graph)
    for _ in range(k):
        result = compose(result, t)
    return result


def _split(a: Word, b: Word) -> tuple[bool, int, Word]:
    """Prefix comparability of ``a`` and ``b``; returns which side is ahead and the surplus."""
    common = min(len(a), len(b))
    if a[:common] != b[:common]:
        return False, 0, ()
    return (True, 0, a[common:]) if len(a) > common else (True, 1, b[common:])


def bounded_equivalent(t1: AsyncTransducer, t2: AsyncTransducer, depth: int) -> bool:
    """Outputs agree on every legal input word of length ``depth``.

    The two machines may write at different speeds, so agreement means the
    outputs stay prefix-comparable and the machine that is behind never falls
    more than ``depth`` symbols back, checked while reading ``2 * depth``
    symbols.  A machine that stops writing lets the gap grow without bound
    and fails.

    Explores configurations ``(q1, q2, ahead, surplus)`` breadth first; a
    configuration seen before has already been checked with at least as much
    input left.
    """
    if t1.type_graph != t2.type_graph:
        raise AlphabetMismatchError("cannot compare transducers over different type graphs")
    start = (t1.initial, t2.initial, 0, ())
    seen = {start}
    frontier: list[tuple[str, str, int, Word]] = [start]
    for _ in range(2 * depth):
        nxt = []
        for q1, q2, ahead, surplus in frontier:
            if t1.states[q1].in_type != t2.states[q2].in_type:
                return False
            for slot in t1.slots(q1):
                p1, w1 = t1.transitions[q1, slot]
                p2, w2 = t2.transitions[q2, slot]
                full1 = surplus + w1 if ahead == 0 else w1
                full2 = surplus + w2 if ahead == 1 else w2
                ok, side, rest = _split(full1, full2)
                if not ok:
                    logger.debug("Outputs diverge", extra={"states": [p1, p2]})
                    return False
                if len(rest) > depth:
                    logger.debug("Output gap exceeds depth", extra={"states": [p1, p2]})
                    return False
                config = (p1, p2, side, rest)
                if config not in seen:
                    seen.add(config)
                    nxt.append(config)
        frontier = nxt
    return True


def minimize(t: AsyncTransducer, depth: int | None = None) -> AsyncTransducer:
    """Merge states by Moore refinement of the ``(in_type, out_type)`` partition.

    Stops after ``depth`` rounds (or when stable).  Each class is named after
    its first state in breadth-first order.
    """
    order = t.reachable()
    classes = {q: (t.states[q].in_type, t.states[q].out_type) for q in order}
    block = _renumber(order, classes)
    rounds = 0
    while depth is None or rounds < depth:
        signature = {
            q: (
                block[q],
                tuple(
                    (out, block[target])
                    for target, out in (t.transitions[q, s] for s in t.slots(q))
                ),
            )
            for q in order
        }
        refined = _renumber(order, signature)
        rounds += 1
        if len(set(refined.values())) == len(set(block.values())):
            break
        block = refined
    rep: dict[int, str] = {}
    for q in order:
        rep.setdefault(block[q], q)
    states = {rep[b]: t.states[rep[b]] for b in sorted(rep)}
    transitions = {
        (name, slot): (rep[block[t.transitions[name, slot][0]]], t.transitions[name, slot][1])
        for name in states
        for slot in t.slots(name)
    }
    logger.debug("Minimized transducer", extra={"before": len(order), "after": len(states)})
    return AsyncTransducer(t.type_graph, states, rep[block[t.initial]], transitions)


def _renumber(order: list[str], keys: dict[str, object]) -> dict[str, int]:
    index: dict[object, int] = {}
    return {q: index.setdefault(keys[q], len(index)) for q in order}


# ---------------------------------------------------------------------------
# Audits
# ---------------------------------------------------------------------------

def type_violations(t: AsyncTransducer) -> list[str]:
    """Transitions whose target type or output path disagrees with the type graph."""
    tg = t.type_graph
    problems = []
    for q in t.reachable():
        state = t.states[q]
        for slot, kid in enumerate(tg.children[state.in_type]):
            if (q, slot) not in t.transitions:
                problems.append(f"state {q} has no transition on slot {slot}")
                continue
            target, word = t.transitions[q, slot]
            if t.states[target].in_type != kid:
                problems.append(
                    f"state {q} slot {slot}: target reads {t.states[target].in_type}, "
                    f"expected {kid}"
                )
            name = state.out_type
            for symbol in word:
                if not 0 <= symbol < tg.out_degree(name):
                    problems.append(f"state {q} slot {slot}: output leaves type {name}")
                    break
                name = tg.children[name][symbol]
            else:
                if name != t.states[target].out_type:
                    problems.append(
                        f"state {q} slot {slot}: output ends at {name}, target writes "
                        f"{t.states[target].out_type}"
                    )
    return problems


def nondegeneracy_violations(t: AsyncTransducer) -> list[str]:
    """Reachable cycles made entirely of empty-output transitions."""
    silent = nx.DiGraph()
    for q in t.reachable():
        silent.add_node(q)
        for slot in t.slots(q):
            target, word = t.transitions[q, slot]
            if not word:
                silent.add_edge(q, target)
    if nx.is_directed_acyclic_graph(silent):
        return []
    cycle = nx.find_cycle(silent)
    return ["silent cycle " + " -> ".join(str(u) for u, _ in cycle)]


def lipschitz_violations(t: AsyncTransducer, bound: int, depth: int) -> list[str]:
    """After ``n`` inputs the output length must lie in ``[n - bound, n + bound]``."""
    frontier = {(t.initial, 0)}
    problems = []
    for n in range(1, depth + 1):
        nxt = set()
        for q, offset in frontier:
            for slot in t.slots(q):
                target, word = t.transitions[q, slot]
                nxt.add((target, offset + len(word) - 1))
        bad = [off for _, off in nxt if abs(off) > bound]
        if bad:
            problems.append(f"after {n} inputs the output lag reaches {max(bad, key=abs)}")
            break
        frontier = nxt
    return problems


# ---------------------------------------------------------------------------
# Binary conjugate
# ---------------------------------------------------------------------------

def _advance(t: AsyncTransducer, state: str) -> tuple[str, Word]:
    """Follow forced transitions through single-child input types."""
    out: list[int] = []
    while t.type_graph.out_degree(t.states[state].in_type) == 1:
        state, word = t.transitions[state, 0]
        out.extend(word)
    return state, tuple(out)


def _cut_at(tg: TypeGraph, start: str, word: Word, isolated: set[str]) -> tuple[Word, str]:
    """Prefix of ``word`` up to and including its first step into an isolated type."""
    name = start
    for i, symbol in enumerate(word):
        name = tg.children[name][symbol]
        if name in isolated:
            return word[: i + 1], name
    return word, name


def expand_transducer(t: AsyncTransducer) -> AsyncTransducer:
    """The same machine over :func:`~horoboundary.selfsimilar.expand` of its type graph.

    Every isolated branch becomes a binary type read and written by an
    identity state.  Outputs are cut where they enter an isolated type, and
    when the input enters one first, the forced output of the remaining
    single path is written up to that point.

    Raises:
        NonBranchingError: if the input enters an isolated branch whose
            image never does.
    """
    tg = t.type_graph
    isolated = set(isolated_types(tg))
    if not isolated:
        return t
    wide = expand(tg)
    if tg.root in isolated:
        return identity_transducer(wide)
    loop = next(name for name in wide.types if name not in tg.children)
    copy = f"id_{loop}"

    def lifted_out(q: str) -> str:
        out_type = t.states[q].out_type
        return loop if out_type in isolated else out_type

    def forced_tail(q: str, name: str) -> Word:
        out: list[int] = []
        seen: set[tuple[str, str]] = set()
        while name not in isolated:
            if (q, name) in seen:
                raise NonBranchingError(
                    f"state {q} maps an isolated branch onto a branching one"
                )
            seen.add((q, name))
            q, word = t.transitions[q, 0]
            piece, name = _cut_at(tg, name, word, isolated)
            out.extend(piece)
        return tuple(out)

    states = {copy: State(copy, loop, loop)}
    transitions: dict[tuple[str, int], tuple[str, Word]] = {
        (copy, slot): (copy, (slot,)) for slot in range(2)
    }
    queue = deque([t.initial])
    seen = {t.initial}
    while queue:
        q = queue.popleft()
        states[q] = State(q, t.states[q].in_type, lifted_out(q))
        muted = t.states[q].out_type in isolated
        for slot in t.slots(q):
            target, word = t.transitions[q, slot]
            out, name = ((), loop) if muted else _cut_at(tg, t.states[q].out_type, word, isolated)
            if t.states[target].in_type in isolated:
                if name not in isolated and name != loop:
                    out += forced_tail(target, name)
                transitions[q, slot] = (copy, out)
                continue
            transitions[q, slot] = (target, out)
            if target not in seen:
                seen.add(target)
                queue.append(target)
    logger.debug("Expanded transducer", extra={"states": len(states)})
    return AsyncTransducer(wide, states, t.initial, transitions)


def to_binary(t: AsyncTransducer, code: PrefixCode) -> AsyncTransducer:
    """Conjugate ``t`` by the prefix-code encoding into a machine on bits.

    A binary state is an original state plus the bits read so far of the
    current code word.

    Raises:
        NonBranchingError: if the type graph has isolated types.
    """
    tg = t.type_graph
    isolated = isolated_types(tg)
    if isolated:
        raise NonBranchingError(f"types {isolated} are isolated; expand the type graph first")

    def encode(word: Word, start: str) -> Word:
        return tuple(int(b) for b in binary_address(word, tg, code, start))

    start, lead = _advance(t, t.initial)
    lead_bits = encode(lead, t.states[t.initial].out_type)
    key0 = (start, "", lead_bits)
    ids = {key0: f"{start}:{'init' if lead_bits else '-'}"}
    states: dict[str, State] = {}
    transitions: dict[tuple[str, int], tuple[str, Word]] = {}
    queue = deque([key0])
    while queue:
        key = queue.popleft()
        q, bits, pending = key
        here = ids[key]
        states[here] = State(here, "X", "X")
        in_type = t.states[q].in_type
        if in_type not in code.words:
            raise CodeMismatchError(f"type {in_type} has no code")
        words = code.words[in_type]
        for bit in (0, 1):
            read = bits + str(bit)
            if read in words:
                target, out = t.transitions[q, words.index(read)]
                landed, forced = _advance(t, target)
                out_bits = encode(out, t.states[q].out_type)
                out_bits += encode(forced, t.states[target].out_type)
                nxt = (landed, "", ())
            else:
                out_bits = ()
                nxt = (q, read, ())
            if nxt not in ids:
                ids[nxt] = f"{nxt[0]}:{nxt[1] or '-'}"
                queue.append(nxt)
            transitions[here, bit] = (ids[nxt], pending + out_bits)
    logger.debug("Binary conjugate", extra={"states": len(states)})
    return AsyncTransducer(BINARY, states, ids[key0], transitions)


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------

def _format_word(word: Word) -> str:
    return ".".join(str(s) for s in word) if word else "-"


def _parse_word(text: str) -> Word:
    if text == "-":
        return ()
    try:
        return tuple(int(s) for s in text.split("."))
    except ValueError:
        raise InputFormatError(f"cannot parse output word {text!r}") from None


def transducer_to_text(t: AsyncTransducer) -> str:
    lines = [type_graph_to_text(t.type_graph).rstrip("\n")]
    lines += [f"state {s.id} {s.in_type} {s.out_type}" for s in t.states.values()]
    lines.append(f"init {t.initial}")
    lines += [
        f"trans {q} {slot} {target} {_format_word(word)}"
        for (q, slot), (target, word) in t.transitions.items()
    ]
    return "\n".join(lines) + "\n"


def parse_transducer(text: str) -> AsyncTransducer:
    """Inverse of :func:`transducer_to_text`."""
    graph_lines: list[str] = []
    states: dict[str, State] = {}
    initial: str | None = None
    transitions: dict[tuple[str, int], tuple[str, Word]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        parts = raw.split("#", 1)[0].split()
        match parts:
            case []:
                continue
            case ["root" | "type" | "child", *_]:
                graph_lines.append(raw)
            case ["state", name, in_type, out_type]:
                states[name] = State(name, in_type, out_type)
            case ["init", name]:
                initial = name
            case ["trans", name, slot, target, word] if slot.isdigit():
                transitions[name, int(slot)] = (target, _parse_word(word))
            case _:
                raise InputFormatError(f"line {lineno}: cannot parse {raw!r}")
    if initial is None or initial not in states:
        raise InputFormatError("transducer text has no valid 'init' line")
    for (name, _), (target, _) in transitions.items():
        if name not in states or target not in states:
            raise InputFormatError(f"transition between undeclared states {name} -> {target}")
    return AsyncTransducer(parse_type_graph(graph_lines), states, initial, transitions)


def transducer_to_dot(t: AsyncTransducer) -> str:
    dot = graphviz.Digraph(name="transducer", graph_attr={"rankdir": "LR"})
    for s in t.states.values():
        dot.node(
            s.id,
            label=graphviz.nohtml(f"{s.id}\n{s.in_type}>{s.out_type}"),
            shape="doublecircle" if s.id == t.initial else "circle",
        )
    grouped: dict[tuple[str, str], list[str]] = {}
    for (q, slot), (target, word) in t.transitions.items():
        label = f"{slot}|{'.'.join(str(s) for s in word) or 'ε'}"
        grouped.setdefault((q, target), []).append(label)
    for (q, target), labels in grouped.items():
        dot.edge(q, target, label=graphviz.nohtml(", ".join(labels)))
    return dot.source


def export_transducer(t: AsyncTransducer, fmt: str = "text") -> str:
    if fmt == "dot":
        return transducer_to_dot(t)
    if fmt == "text":
        return transducer_to_text(t)
    raise InputFormatError(f"unknown transducer format {fmt!r}; use 'dot' or 'text'")

