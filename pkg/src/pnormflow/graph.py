"""Immutable unweighted undirected graph in compressed sparse row form."""
from __future__ import annotations

import io
import os
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import (
    ConnectivityError,
    GraphValidationError,
    ParseError,
    UndefinedConductanceError,
)


@dataclass(frozen=True, eq=False)
class Graph:
    """CSR adjacency with per-node degrees.

    ``indices[indptr[v]:indptr[v+1]]`` is the sorted neighbour list of ``v``.
    ``labels`` maps dense ids back to the ids used in the input file; it is
    ``None`` when the input ids were already ``0..n-1``.
    """

    indptr: np.ndarray
    indices: np.ndarray
    degrees: np.ndarray
    labels: np.ndarray | None = None
    _label_index: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        for arr in (self.indptr, self.indices, self.degrees):
            arr.setflags(write=False)
        if self.labels is not None:
            self.labels.setflags(write=False)
            object.__setattr__(
                self, "_label_index", {int(l): i for i, l in enumerate(self.labels)}
            )

    @classmethod
    def from_edges(cls, n: int, edges, labels=None, check_connected: bool = True) -> "Graph":
        """Build from an ``(m, 2)`` array-like of node pairs.

        Duplicate and reversed-duplicate pairs are merged. Self-loops raise.
        """
        e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if n < 1:
            raise GraphValidationError("graph must have at least one node")
        if e.size and (e.min() < 0 or e.max() >= n):
            raise GraphValidationError(f"edge endpoint out of range [0, {n})")
        loops = e[:, 0] == e[:, 1]
        if loops.any():
            v = int(e[loops][0, 0])
            raise GraphValidationError(f"self-loop at node {v}")
        lo = np.minimum(e[:, 0], e[:, 1])
        hi = np.maximum(e[:, 0], e[:, 1])
        und = np.unique(np.stack([lo, hi], axis=1), axis=0) if e.size else e
        src = np.concatenate([und[:, 0], und[:, 1]])
        dst = np.concatenate([und[:, 1], und[:, 0]])
        order = np.lexsort((dst, src))
        src, dst = src[order], dst[order]
        degrees = np.bincount(src, minlength=n).astype(np.int64)
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(degrees, out=indptr[1:])
        g = cls(indptr, dst.astype(np.int64), degrees,
                None if labels is None else np.asarray(labels, dtype=np.int64))
        if check_connected and n > 1 and g.n_components() > 1:
            raise ConnectivityError(
                f"graph is disconnected ({g.n_components()} components)"
            )
        if check_connected and n > 1 and g.m == 0:
            raise ConnectivityError("graph has no edges")
        return g

    @property
    def n(self) -> int:
        return len(self.degrees)

    @property
    def m(self) -> int:
        return len(self.indices) // 2

    @property
    def total_volume(self) -> int:
        return int(self.indices.shape[0])

    @property
    def max_degree(self) -> int:
        return int(self.degrees.max())

    def degree(self, v: int) -> int:
        return int(self.degrees[v])

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def edges(self) -> np.ndarray:
        """Oriented edge array, one row ``(u, v)`` with ``u < v`` per edge."""
        src = np.repeat(np.arange(self.n, dtype=np.int64), self.degrees)
        keep = src < self.indices
        return np.stack([src[keep], self.indices[keep]], axis=1)

    def adjacency(self) -> csr_matrix:
        data = np.ones(len(self.indices), dtype=np.float64)
        return csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))

    def n_components(self) -> int:
        return connected_components(self.adjacency(), directed=False)[0]

    # label mapping -------------------------------------------------------
    def to_dense(self, ids: Iterable[int]) -> list[int]:
        """Translate input-file ids to dense ids."""
        out = []
        for i in ids:
            i = int(i)
            if self._label_index is None:
                if not 0 <= i < self.n:
                    raise GraphValidationError(f"node id {i} not in graph")
                out.append(i)
            else:
                try:
                    out.append(self._label_index[i])
                except KeyError:
                    raise GraphValidationError(f"node id {i} not in graph") from None
        return out

    def to_labels(self, nodes: Iterable[int]) -> list[int]:
        if self.labels is None:
            return [int(v) for v in nodes]
        return [int(self.labels[v]) for v in nodes]

    # set queries ---------------------------------------------------------
    def node_set(self, members: Iterable[int]) -> "NodeSet":
        return NodeSet.of(self, members)

    def volume(self, s) -> int:
        return volume(self, s)

    def cut_size(self, s) -> int:
        return cut_size(self, s)

    def conductance(self, s) -> float:
        return conductance(self, s)

    def __repr__(self):
        return f"Graph(n={self.n}, m={self.m})"

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (np.array_equal(self.indptr, other.indptr)
                and np.array_equal(self.indices, other.indices))

    __hash__ = object.__hash__


@dataclass(frozen=True)
class NodeSet:
    """A set of dense node ids together with its volume."""

    members: frozenset
    volume: int

    @classmethod
    def of(cls, g: Graph, members: Iterable[int]) -> "NodeSet":
        mem = frozenset(int(v) for v in members)
        for v in mem:
            if not 0 <= v < g.n:
                raise GraphValidationError(f"node {v} outside [0, {g.n})")
        vol = int(g.degrees[list(mem)].sum()) if mem else 0
        return cls(mem, vol)

    def __len__(self):
        return len(self.members)

    def __iter__(self) -> Iterator[int]:
        return iter(sorted(self.members))

    def __contains__(self, v):
        return v in self.members

    def as_array(self) -> np.ndarray:
        return np.fromiter(sorted(self.members), dtype=np.int64, count=len(self.members))


def _members(g: Graph, s) -> np.ndarray:
    if isinstance(s, NodeSet):
        return s.as_array()
    return np.unique(np.fromiter((int(v) for v in s), dtype=np.int64))


def volume(g: Graph, s) -> int:
    if isinstance(s, NodeSet):
        return s.volume
    idx = _members(g, s)
    return int(g.degrees[idx].sum())


def cut_size(g: Graph, s) -> int:
    idx = _members(g, s)
    if idx.size == 0:
        return 0
    inside = np.zeros(g.n, dtype=bool)
    inside[idx] = True
    crossing = 0
    for v in idx:
        crossing += int((~inside[g.neighbors(v)]).sum())
    return crossing


def conductance(g: Graph, s) -> float:
    idx = _members(g, s)
    if idx.size == 0 or idx.size == g.n:
        raise UndefinedConductanceError("conductance undefined for empty set or V")
    vol = int(g.degrees[idx].sum())
    denom = min(vol, g.total_volume - vol)
    return cut_size(g, idx) / denom


# edge-list I/O -------------------------------------------------------------

def load_edge_list(source, one_based: bool = False, seed_component=None) -> Graph:
    """Parse whitespace-separated node pairs, one edge per line.

    ``source`` may be a path, an open text stream or a string with the file
    contents. Lines starting with ``#`` and blank lines are skipped. Sparse
    ids are compacted and the original ids are kept in ``Graph.labels``.

    If ``seed_component`` (input ids) is given, a disconnected graph is
    restricted to the component containing those nodes instead of raising.
    """
    text = _read_text(source)
    pairs = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        tok = s.split()
        if len(tok) != 2:
            raise ParseError(f"expected two node ids, got {len(tok)} fields", lineno)
        try:
            u, v = int(tok[0]), int(tok[1])
        except ValueError:
            raise ParseError(f"non-integer node id in {s!r}", lineno) from None
        if one_based:
            u, v = u - 1, v - 1
        if u < 0 or v < 0:
            raise ParseError("negative node id", lineno)
        if u == v:
            raise GraphValidationError(f"self-loop at node {tok[0]}", lineno)
        pairs.append((u, v))
    if not pairs:
        raise ParseError("edge list is empty")
    e = np.asarray(pairs, dtype=np.int64)
    ids = np.unique(e)
    if ids[-1] == len(ids) - 1:
        labels, dense = None, e
    else:
        labels, dense = ids, np.searchsorted(ids, e)
    n = len(ids)
    if seed_component is None:
        return Graph.from_edges(n, dense, labels=labels)

    g = Graph.from_edges(n, dense, labels=labels, check_connected=False)
    ncomp, comp = connected_components(g.adjacency(), directed=False)
    if ncomp == 1:
        return g
    seeds = g.to_dense(int(s) - (1 if one_based else 0) for s in seed_component)
    keep = {int(comp[v]) for v in seeds}
    if len(keep) != 1:
        raise ConnectivityError("seed nodes lie in different components")
    mask = comp == keep.pop()
    old = np.flatnonzero(mask)
    remap = -np.ones(n, dtype=np.int64)
    remap[old] = np.arange(len(old))
    sub = dense[mask[dense[:, 0]]]
    orig = old if labels is None else labels[old]
    return Graph.from_edges(len(old), remap[sub], labels=orig)


def write_edge_list(g: Graph, dest=None, one_based: bool = False) -> str:
    """Serialize ``g`` as an edge list using its original labels."""
    e = g.edges()
    if g.labels is not None:
        e = g.labels[e]
    if one_based:
        e = e + 1
    buf = io.StringIO()
    for u, v in e:
        buf.write(f"{u} {v}\n")
    text = buf.getvalue()
    if dest is not None:
        _write_text(dest, text)
    return text


def read_node_set(source, g: Graph | None = None, one_based: bool = False) -> list[int]:
    """Newline-separated ids (input labels); translated to dense ids when ``g`` is given."""
    ids = []
    for lineno, line in enumerate(_read_text(source).splitlines(), start=1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        try:
            ids.extend(int(t) for t in s.split())
        except ValueError:
            raise ParseError(f"non-integer node id in {s!r}", lineno) from None
    if one_based:
        ids = [i - 1 for i in ids]
    return g.to_dense(ids) if g is not None else ids


def write_node_set(g: Graph, nodes: Iterable[int], dest=None, one_based: bool = False) -> str:
    shift = 1 if one_based else 0
    text = "".join(f"{v + shift}\n" for v in sorted(g.to_labels(nodes)))
    if dest is not None:
        _write_text(dest, text)
    return text


def _read_text(source) -> str:
    if hasattr(source, "read"):
        return source.read()
    if isinstance(source, os.PathLike) or (
        isinstance(source, str) and "\n" not in source and os.path.exists(source)
    ):
        with open(source) as fh:
            return fh.read()
    if isinstance(source, str):
        return source
    raise TypeError(f"cannot read edge list from {type(source).__name__}")


def _write_text(dest, text: str) -> None:
    if hasattr(dest, "write"):
        dest.write(text)
    else:
        with open(dest, "w") as fh:
            fh.write(text)
