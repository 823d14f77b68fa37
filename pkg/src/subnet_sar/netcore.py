"""Sparse network storage, row normalisation and block extraction.

Conventions
-----------
``a[i, j] = 1`` means node ``i`` follows node ``j``; the out-degree ``d_i``
is the row count.  Weights are ``w_ij = a_ij / d_i`` and a node with no
followees gets an all-zero row.  Matrices are CSR with sorted column indices
and are treated as immutable once built.
"""
from __future__ import annotations

import io
import os
from dataclasses import dataclass
from typing import IO, Iterable, Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp

from .errors import DomainError, ParseError

__all__ = [
    "AdjacencyMatrix",
    "WeightMatrix",
    "SubnetSelection",
    "load_edge_list",
    "write_edge_list",
    "row_normalize",
    "extract_selection",
    "spmv",
]

Source = Union[str, os.PathLike, IO[str], IO[bytes], bytes]


def _freeze(mat: sp.csr_matrix) -> sp.csr_matrix:
    mat.sort_indices()
    for arr in (mat.data, mat.indices, mat.indptr):
        arr.flags.writeable = False
    return mat


@dataclass(frozen=True, eq=False)
class AdjacencyMatrix:
    """Directed 0/1 graph without self-loops."""

    matrix: sp.csr_matrix

    @classmethod
    def from_edges(cls, src, dst, n_nodes: int) -> "AdjacencyMatrix":
        """Build from parallel arrays of edge endpoints.

        Duplicate edges collapse and self-loops are dropped.
        """
        src = np.asarray(src, dtype=np.int64).ravel()
        dst = np.asarray(dst, dtype=np.int64).ravel()
        if src.shape != dst.shape:
            raise DomainError("src and dst must have equal length")
        if n_nodes < 0:
            raise DomainError("n_nodes must be non-negative")
        if src.size:
            if min(src.min(), dst.min()) < 0:
                raise DomainError("negative node id")
            if max(src.max(), dst.max()) >= n_nodes:
                raise DomainError("node id exceeds n_nodes - 1")
        keep = src != dst
        src, dst = src[keep], dst[keep]
        # dedup through a linear key; n_nodes**2 fits in int64 for n < 3e9
        key = np.unique(src * n_nodes + dst)
        rows, cols = np.divmod(key, n_nodes) if n_nodes else (key, key)
        mat = sp.csr_matrix(
            (np.ones(key.size), (rows, cols)), shape=(n_nodes, n_nodes)
        )
        return cls(_freeze(mat))

    @property
    def n_nodes(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_edges(self) -> int:
        return self.matrix.nnz

    @property
    def out_degree(self) -> np.ndarray:
        return np.diff(self.matrix.indptr)

    @property
    def in_degree(self) -> np.ndarray:
        return np.bincount(self.matrix.indices, minlength=self.n_nodes)

    def edges(self):
        """Return ``(src, dst)`` arrays in row-major order."""
        coo = self.matrix.tocoo()
        return coo.row.astype(np.int64), coo.col.astype(np.int64)

    def neighbors(self, i: int) -> np.ndarray:
        """Out-neighbours (followees) of node ``i``."""
        m = self.matrix
        return m.indices[m.indptr[i]:m.indptr[i + 1]]


@dataclass(frozen=True, eq=False)
class WeightMatrix:
    """Row-normalised spatial weights."""

    matrix: sp.csr_matrix

    @property
    def n_nodes(self) -> int:
        return self.matrix.shape[0]

    @property
    def zero_rows(self) -> int:
        """Number of nodes with out-degree zero."""
        return int(np.count_nonzero(np.diff(self.matrix.indptr) == 0))

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()


@dataclass(frozen=True, eq=False)
class SubnetSelection:
    """A sampled node set and the corresponding blocks of ``W``.

    ``w11`` keeps the full-network out-degrees as denominators, so its rows
    generally sum to less than one.  The off-diagonal blocks are only kept
    when requested because they are needed for the boundary diagnostics
    alone.
    """

    nodes: np.ndarray
    w11: np.ndarray
    w12_frobenius_sq: float
    w21_frobenius_sq: float
    w12: Optional[sp.csr_matrix] = None
    w21: Optional[sp.csr_matrix] = None
    w22: Optional[sp.csr_matrix] = None

    @property
    def n(self) -> int:
        return self.nodes.size

    @property
    def has_blocks(self) -> bool:
        return self.w12 is not None and self.w21 is not None


def _open_text(source: Source):
    if isinstance(source, (str, os.PathLike)):
        return open(source, "r", encoding="utf-8"), True
    if isinstance(source, bytes):
        return io.StringIO(source.decode("utf-8")), True
    if isinstance(source, io.TextIOBase):
        return source, False
    # binary stream
    return io.TextIOWrapper(source, encoding="utf-8"), False


def load_edge_list(source: Source) -> AdjacencyMatrix:
    """Read a ``src<TAB>dst`` edge list.

    Lines starting with ``#`` are comments except ``#nodes N``, which fixes
    the node count.  Without the header the node count is one more than the
    largest id seen.  Duplicate edges collapse and self-loops are dropped.

    Raises
    ------
    ParseError
        A line does not hold exactly two integers.
    DomainError
        A negative id, or an id beyond a declared ``#nodes`` count.
    """
    fh, close = _open_text(source)
    src, dst = [], []
    declared = None
    try:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split()
                if len(parts) == 2 and parts[0] == "nodes":
                    try:
                        declared = int(parts[1])
                    except ValueError:
                        raise ParseError(f"bad node count {parts[1]!r}", lineno)
                    if declared < 0:
                        raise DomainError(f"line {lineno}: negative node count")
                continue
            parts = line.split("\t") if "\t" in line else line.split()
            if len(parts) != 2:
                raise ParseError(f"expected 'src<TAB>dst', got {line!r}", lineno)
            try:
                i, j = int(parts[0]), int(parts[1])
            except ValueError:
                raise ParseError(f"non-integer id in {line!r}", lineno)
            if i < 0 or j < 0:
                raise DomainError(f"line {lineno}: negative node id")
            src.append(i)
            dst.append(j)
    finally:
        if close:
            fh.close()
    max_id = max(max(src, default=-1), max(dst, default=-1))
    if declared is None:
        n_nodes = max_id + 1
    else:
        if max_id >= declared:
            raise DomainError(f"id {max_id} exceeds declared #nodes {declared}")
        n_nodes = declared
    return AdjacencyMatrix.from_edges(src, dst, n_nodes)


def write_edge_list(adj: AdjacencyMatrix, fh: IO[str]) -> None:
    """Write ``adj`` in the format read by :func:`load_edge_list`."""
    fh.write(f"#nodes {adj.n_nodes}\n")
    src, dst = adj.edges()
    for i, j in zip(src.tolist(), dst.tolist()):
        fh.write(f"{i}\t{j}\n")


def row_normalize(adj: AdjacencyMatrix) -> WeightMatrix:
    """Return ``W`` with ``w_ij = a_ij / d_i``; zero-degree rows stay zero."""
    deg = adj.out_degree.astype(float)
    inv = np.divide(1.0, deg, out=np.zeros_like(deg), where=deg > 0)
    mat = adj.matrix.copy()
    mat.data = np.repeat(inv, np.diff(mat.indptr))
    return WeightMatrix(_freeze(mat))


def _as_csr(graph) -> sp.csr_matrix:
    if isinstance(graph, (AdjacencyMatrix, WeightMatrix)):
        return graph.matrix
    if sp.issparse(graph):
        return sp.csr_matrix(graph)
    return sp.csr_matrix(np.asarray(graph, dtype=float))


def extract_selection(
    W: WeightMatrix,
    s1: Sequence[int],
    keep_blocks: bool = False,
    A: Optional[AdjacencyMatrix] = None,
) -> SubnetSelection:
    """Partition ``W`` around the node sequence ``s1``.

    ``A`` is accepted for symmetry with the partition of the adjacency
    matrix; the weights already carry the full-network degrees, so it is not
    needed for the computation.

    Raises
    ------
    DomainError
        ``s1`` has duplicates or out-of-range ids.
    """
    mat = _as_csr(W)
    n_nodes = mat.shape[0]
    nodes = np.asarray(s1, dtype=np.int64).ravel()
    if nodes.size and (nodes.min() < 0 or nodes.max() >= n_nodes):
        raise DomainError("selection index out of range")
    if np.unique(nodes).size != nodes.size:
        raise DomainError("duplicate index in selection")
    if A is not None and A.n_nodes != n_nodes:
        raise DomainError("A and W have different sizes")

    in_s1 = np.zeros(n_nodes, dtype=bool)
    in_s1[nodes] = True

    rows = mat[nodes]
    w11 = rows[:, nodes].toarray()
    # W12: entries of S1 rows whose column leaves S1
    out = ~in_s1[rows.indices]
    w12_sq = float(np.square(rows.data[out]).sum())
    # W21: entries of S2 rows whose column lands in S1, one pass over nnz
    row_of = np.repeat(~in_s1, np.diff(mat.indptr))
    into = row_of & in_s1[mat.indices]
    w21_sq = float(np.square(mat.data[into]).sum())

    w12 = w21 = w22 = None
    if keep_blocks:
        rest = np.flatnonzero(~in_s1)
        w12 = rows[:, rest].tocsr()
        rows2 = mat[rest]
        w21 = rows2[:, nodes].tocsr()
        w22 = rows2[:, rest].tocsr()
    return SubnetSelection(nodes, w11, w12_sq, w21_sq, w12, w21, w22)


def spmv(W, x) -> np.ndarray:
    """Return ``W @ x``.

    Raises
    ------
    DomainError
        ``len(x)`` differs from the number of nodes.
    """
    mat = _as_csr(W)
    x = np.asarray(x, dtype=float)
    if x.shape[0] != mat.shape[1]:
        raise DomainError(f"vector length {x.shape[0]} != {mat.shape[1]}")
    return mat @ x
