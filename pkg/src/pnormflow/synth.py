"""Seeded generators for small test graphs.

Randomness comes from ``numpy.random.default_rng(seed)`` (PCG64), so a seed
reproduces a graph bit-for-bit within this package.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConnectivityError, ParameterError, ParseError
from .graph import Graph, NodeSet, _read_text


@dataclass(frozen=True)
class GeneratorSpec:
    kind: str
    dims: tuple = ()
    p_in: float | None = None
    p_out: float | None = None
    seed: int | None = None
    max_retries: int = 20

    def __post_init__(self):
        if self.kind not in {"grid", "dumbbell", "planted-partition"}:
            raise ParameterError(f"kind: unknown generator {self.kind!r}")
        if any(int(d) < 1 for d in self.dims):
            raise ParameterError("dims: sizes must be >= 1")
        for name in ("p_in", "p_out"):
            p = getattr(self, name)
            if p is not None and not 0.0 <= p <= 1.0:
                raise ParameterError(f"{name}: probability {p} outside [0, 1]")

    def build(self):
        """Return ``(graph, blocks)``; ``blocks`` is a list of node-id lists."""
        if self.kind == "grid":
            g = gen_grid(*self.dims)
            return g, [list(range(g.n))]
        if self.kind == "dumbbell":
            g = gen_dumbbell(*self.dims)
            half = g.n // 2
            return g, [list(range(half)), list(range(half, g.n))]
        g, blocks = gen_planted_partition(
            list(self.dims), self.p_in, self.p_out, self.seed, self.max_retries
        )
        return g, [sorted(b.members) for b in blocks]


def _grid_edges(rows: int, cols: int, offset: int = 0) -> np.ndarray:
    ids = np.arange(rows * cols, dtype=np.int64).reshape(rows, cols) + offset
    horiz = np.stack([ids[:, :-1].ravel(), ids[:, 1:].ravel()], axis=1)
    vert = np.stack([ids[:-1, :].ravel(), ids[1:, :].ravel()], axis=1)
    return np.concatenate([horiz, vert])


def gen_grid(rows: int, cols: int) -> Graph:
    """4-neighbour lattice; node ``r * cols + c`` sits at row ``r``, column ``c``."""
    if rows < 1 or cols < 1:
        raise ParameterError(f"grid dimensions must be >= 1, got {rows}x{cols}")
    return Graph.from_edges(rows * cols, _grid_edges(rows, cols))


def dumbbell_bridge(side_rows: int, side_cols: int) -> tuple[int, int]:
    """Bridge endpoints of :func:`gen_dumbbell`.

    The left endpoint is the middle node of the left grid's last column and
    the right endpoint the middle node of the right grid's first column.
    """
    r = side_rows // 2
    side = side_rows * side_cols
    return r * side_cols + side_cols - 1, side + r * side_cols


def gen_dumbbell(side_rows: int, side_cols: int) -> Graph:
    """Two ``side_rows x side_cols`` grids joined by one bridge edge.

    Nodes ``0 .. side-1`` form the left grid and ``side .. 2*side-1`` the
    right grid.
    """
    if side_rows < 1 or side_cols < 1:
        raise ParameterError(
            f"dumbbell side dimensions must be >= 1, got {side_rows}x{side_cols}"
        )
    side = side_rows * side_cols
    left = _grid_edges(side_rows, side_cols)
    right = _grid_edges(side_rows, side_cols, offset=side)
    bridge = np.array([dumbbell_bridge(side_rows, side_cols)], dtype=np.int64)
    return Graph.from_edges(2 * side, np.concatenate([left, right, bridge]))


def gen_planted_partition(block_sizes, p_in: float, p_out: float, seed=None,
                          max_retries: int = 20):
    """Planted partition graph with consecutive blocks.

    Every intra-block pair is an edge with probability ``p_in`` and every
    inter-block pair with probability ``p_out``. Draws are repeated with the
    same generator until the graph is connected.

    Returns ``(graph, blocks)`` with ``blocks`` a list of :class:`NodeSet`.
    """
    sizes = [int(s) for s in block_sizes]
    if not sizes or min(sizes) < 1:
        raise ParameterError("block_sizes: every block needs at least one node")
    for name, p in (("p_in", p_in), ("p_out", p_out)):
        if not 0.0 <= p <= 1.0:
            raise ParameterError(f"{name}: probability {p} outside [0, 1]")
    if len(sizes) > 1 and not p_in > p_out:
        raise ParameterError(f"p_in ({p_in}) must exceed p_out ({p_out})")

    n = sum(sizes)
    label = np.repeat(np.arange(len(sizes)), sizes)
    iu, ju = np.triu_indices(n, k=1)
    prob = np.where(label[iu] == label[ju], p_in, p_out)
    rng = np.random.default_rng(seed)
    for _ in range(max_retries):
        keep = rng.random(len(iu)) < prob
        edges = np.stack([iu[keep], ju[keep]], axis=1)
        try:
            g = Graph.from_edges(n, edges)
        except ConnectivityError:
            continue
        starts = np.concatenate([[0], np.cumsum(sizes)])
        blocks = [NodeSet.of(g, range(starts[b], starts[b + 1])) for b in range(len(sizes))]
        return g, blocks
    raise ConnectivityError(
        f"planted partition still disconnected after {max_retries} draws"
    )


def write_blocks(g: Graph, blocks, dest=None, one_based: bool = False) -> str:
    """One block per line, ids separated by single spaces."""
    shift = 1 if one_based else 0
    lines = []
    for b in blocks:
        members = b.members if isinstance(b, NodeSet) else b
        lines.append(" ".join(str(v + shift) for v in sorted(g.to_labels(members))))
    text = "\n".join(lines) + "\n"
    if dest is not None:
        with open(dest, "w") as fh:
            fh.write(text)
    return text


def read_blocks(source, g: Graph | None = None, one_based: bool = False) -> list[list[int]]:
    """Inverse of :func:`write_blocks`; ids become dense when ``g`` is given."""
    shift = 1 if one_based else 0
    blocks = []
    for lineno, line in enumerate(_read_text(source).splitlines(), start=1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        try:
            ids = [int(t) for t in s.split()]
        except ValueError:
            raise ParseError("non-integer node id in block line", lineno) from None
        ids = [i - shift for i in ids]
        blocks.append(g.to_dense(ids) if g is not None else ids)
    return blocks
