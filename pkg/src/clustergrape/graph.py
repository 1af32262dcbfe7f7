"""Qubit coupling graphs.

A :class:`CouplingGraph` lists the Ising-coupled qubit pairs of an ``n``-qubit
register. Named families follow the usual notation: ``K<n>`` complete,
``C<n>`` cycle, ``L<n>`` linear chain and ``G<r>x<c>`` rectangular grid.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from itertools import combinations

from .exceptions import GraphParseError

__all__ = [
    "CouplingGraph",
    "complete_graph",
    "cycle_graph",
    "path_graph",
    "grid_graph",
    "parse_graph",
    "render_graph",
]


@dataclass(frozen=True)
class CouplingGraph:
    """Undirected simple graph over ``n_qubits`` 0-indexed qubits.

    Edges are stored as a sorted tuple of ``(a, b)`` pairs with ``a < b``.
    Any iterable of pairs is accepted and canonicalised; duplicates collapse.
    """

    n_qubits: int
    edges: tuple[tuple[int, int], ...]
    name: str | None = None

    def __post_init__(self):
        n = int(self.n_qubits)
        if n < 1:
            raise ValueError(f"n_qubits must be positive, got {n}")
        canon = set()
        for a, b in self.edges:
            a, b = int(a), int(b)
            if a == b:
                raise ValueError(f"self-loop on qubit {a}")
            if not (0 <= a < n and 0 <= b < n):
                raise ValueError(f"edge ({a}, {b}) has a label outside [0, {n})")
            canon.add((min(a, b), max(a, b)))
        object.__setattr__(self, "n_qubits", n)
        object.__setattr__(self, "edges", tuple(sorted(canon)))

    def __eq__(self, other):
        # the display name is not part of the graph's identity
        if not isinstance(other, CouplingGraph):
            return NotImplemented
        return self.n_qubits == other.n_qubits and self.edges == other.edges

    def __hash__(self):
        return hash((self.n_qubits, self.edges))

    @property
    def label(self):
        return self.name if self.name is not None else f"graph{self.n_qubits}"

    def degree(self, qubit):
        return sum(qubit in e for e in self.edges)

    def is_connected(self):
        seen = {0}
        stack = [0]
        adj = {q: set() for q in range(self.n_qubits)}
        for a, b in self.edges:
            adj[a].add(b)
            adj[b].add(a)
        while stack:
            q = stack.pop()
            for p in adj[q] - seen:
                seen.add(p)
                stack.append(p)
        return len(seen) == self.n_qubits


def _named(n, edges, name):
    g = CouplingGraph(n, edges, name)
    assert g.is_connected(), name
    return g


def complete_graph(n):
    """All ``n(n-1)/2`` pairs of ``n`` qubits."""
    if n < 2:
        raise ValueError(f"complete graph needs n >= 2, got {n}")
    return _named(n, combinations(range(n), 2), f"K{n}")


def cycle_graph(n):
    """Ring ``0-1-...-(n-1)-0``."""
    if n < 3:
        raise ValueError(f"cycle graph needs n >= 3, got {n}")
    return _named(n, ((i, (i + 1) % n) for i in range(n)), f"C{n}")


def path_graph(n):
    """Linear chain ``0-1-...-(n-1)``."""
    if n < 2:
        raise ValueError(f"path graph needs n >= 2, got {n}")
    return _named(n, ((i, i + 1) for i in range(n - 1)), f"L{n}")


def grid_graph(rows, cols):
    """Rectangular lattice, qubit ``(r, c)`` labelled ``r * cols + c``."""
    if rows < 1 or cols < 1 or rows * cols < 2:
        raise ValueError(f"grid needs at least two sites, got {rows}x{cols}")
    edges = []
    for r in range(rows):
        for c in range(cols):
            q = r * cols + c
            if c + 1 < cols:
                edges.append((q, q + 1))
            if r + 1 < rows:
                edges.append((q, q + cols))
    return _named(rows * cols, edges, f"G{rows}x{cols}")


_TOKEN = re.compile(r"^\s*([kcl])(\d+)\s*$|^\s*g(\d+)x(\d+)\s*$", re.IGNORECASE)
_HEADER = re.compile(r"^\s*n\s*=\s*(\d+)\s*$", re.IGNORECASE)


def _from_token(match):
    family, size, rows, cols = match.groups()
    if family is None:
        return grid_graph(int(rows), int(cols))
    ctor = {"k": complete_graph, "c": cycle_graph, "l": path_graph}[family.lower()]
    return ctor(int(size))


def parse_graph(text):
    """Parse a named family token or an edge list.

    The edge-list form starts with an ``n=<count>`` line followed by one
    ``a b`` pair per line. Blank lines and ``#`` comments are ignored.

    Raises
    ------
    GraphParseError
        On a malformed line, out-of-range label or self-loop.
    """
    match = _TOKEN.match(text)
    if match:
        try:
            return _from_token(match)
        except ValueError as exc:
            raise GraphParseError(str(exc), 1) from exc

    n = None
    edges = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if n is None:
            header = _HEADER.match(line)
            if header is None:
                raise GraphParseError(f"expected 'n=<count>' header, got {line!r}", lineno)
            n = int(header.group(1))
            if n < 1:
                raise GraphParseError("qubit count must be positive", lineno)
            continue
        parts = line.split()
        if len(parts) != 2 or not all(p.isdigit() for p in parts):
            raise GraphParseError(f"expected two qubit labels, got {line!r}", lineno)
        a, b = int(parts[0]), int(parts[1])
        if a == b:
            raise GraphParseError(f"self-loop on qubit {a}", lineno)
        if a >= n or b >= n:
            raise GraphParseError(f"label {max(a, b)} >= n={n}", lineno)
        edges.append((a, b))
    if n is None:
        raise GraphParseError("empty graph description")
    return CouplingGraph(n, edges)


def render_graph(graph):
    """Edge-list text accepted by :func:`parse_graph`."""
    lines = [f"n={graph.n_qubits}"]
    lines.extend(f"{a} {b}" for a, b in graph.edges)
    return "\n".join(lines) + "\n"
