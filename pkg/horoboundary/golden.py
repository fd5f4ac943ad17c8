"""Reference values for the {4,5} tiling, transcribed by hand.

The ball counts, type graph, and the two generator machines are the values
``verify`` compares against when the source is ``tiling:4,5``.  Slot ``i``
of the root is the ``i``-th level-one atom counter-clockwise; even root slots
have type B and odd ones type C.
"""

from __future__ import annotations

from horoboundary.classify import TypeGraph
from horoboundary.transducer import AsyncTransducer, State

SOURCE = "tiling:4,5"

SPHERE_SIZES: dict[int, int] = {1: 5, 2: 15}

# level -> (atoms, infinite atoms)
ATOM_COUNTS: dict[int, tuple[int, int]] = {1: (11, 10), 2: (36, 30)}

# state -> (input type, output type, [(target, output word)] per slot)
Rows = dict[str, tuple[str, str, list[tuple[str, str]]]]

TYPE_GRAPH = TypeGraph(
    "A",
    {
        "A": ("B", "C") * 5,
        "B": ("B", "C", "B"),
        "C": ("C", "D", "C"),
        "D": ("B",),
    },
)

_IDENTITY_ROWS: Rows = {
    "id_B": ("B", "B", [("id_B", "0"), ("id_C", "1"), ("id_B", "2")]),
    "id_C": ("C", "C", [("id_C", "0"), ("id_D", "1"), ("id_C", "2")]),
    "id_D": ("D", "D", [("id_B", "0")]),
}

S_ROWS: Rows = {
    "s": ("A", "A", [
        ("s0", ""), ("s1", ""), ("f", "9"), ("id_C", "9.2"), ("id_B", "0.0"),
        ("id_C", "0.1"), ("id_B", "0.2"), ("id_C", "1.0"), ("fbar", "1"), ("s9", ""),
    ]),
    "s0": ("B", "A", [("id_B", "4"), ("id_C", "5"), ("id_B", "6")]),
    "s1": ("C", "A", [("id_C", "7"), ("h", "8"), ("g", "8")]),
    "s9": ("C", "A", [("gbar", "2"), ("hbar", "2"), ("id_C", "3")]),
    "f": ("B", "C", [("f", "0"), ("id_C", "0.2"), ("id_B", "1.0")]),
    "fbar": ("B", "C", [("id_B", "1.0"), ("id_C", "2.0"), ("fbar", "2")]),
    "g": ("C", "B", [("id_C", "1"), ("h", "2"), ("g", "2")]),
    "gbar": ("C", "B", [("gbar", "0"), ("hbar", "0"), ("id_C", "1")]),
    "h": ("D", "B", [("id_B", "0")]),
    "hbar": ("D", "B", [("id_B", "2")]),
    **_IDENTITY_ROWS,
}

R_ROWS: Rows = {
    "r": ("A", "A", [("id_B" if i % 2 == 0 else "id_C", str((i + 2) % 10)) for i in range(10)]),
    **_IDENTITY_ROWS,
}


def machine(rows: Rows, initial: str) -> AsyncTransducer:
    """Build a machine over :data:`TYPE_GRAPH` from ``state -> (in, out, [(target, word)])``."""
    states = {name: State(name, in_type, out_type) for name, (in_type, out_type, _) in rows.items()}
    transitions = {
        (name, slot): (target, tuple(int(s) for s in word.split(".")) if word else ())
        for name, (_, _, row) in rows.items()
        for slot, (target, word) in enumerate(row)
    }
    return AsyncTransducer(TYPE_GRAPH, states, initial, transitions)


def r_machine() -> AsyncTransducer:
    return machine(R_ROWS, "r")


def s_machine() -> AsyncTransducer:
    return machine(S_ROWS, "s")


S_CLASS_COUNT = len(S_ROWS)
