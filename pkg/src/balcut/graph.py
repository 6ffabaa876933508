"""Undirected weighted graphs: storage, file formats, cuts and total variation.

A :class:`Graph` stores every undirected edge exactly once as ``(i, j, w)``
with ``i < j`` and keeps a symmetric CSR adjacency next to the edge list.
Vertex sets are plain boolean masks of length ``n``.
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass, field
from typing import BinaryIO, Iterable, TextIO, Union

import numpy as np
from scipy import sparse
from scipy.spatial import cKDTree

__all__ = [
    "Graph",
    "GraphFormatError",
    "parse_graph",
    "read_graph",
    "serialize_graph",
    "cut_value",
    "total_variation",
    "tv_subgradient",
    "two_moons_graph",
    "indicator",
    "FORMATS",
]

FORMATS = ("metis", "matrix-market", "edge-list")

Source = Union[bytes, str, BinaryIO, TextIO]


class GraphFormatError(ValueError):
    """Malformed or invalid graph input. ``line`` is 1-based, or None."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable undirected graph with positive edge weights.

    Use :meth:`from_edges` to build one; it validates the edge list and
    sorts it lexicographically so that equal graphs have equal arrays.

    Attributes
    ----------
    n : int
        Number of vertices.
    heads, tails : ndarray of int64
        Edge endpoints with ``heads < tails``.
    weights : ndarray of float64
        Strictly positive edge weights.
    adjacency : scipy.sparse.csr_matrix
        Symmetric weight matrix holding both directions of every edge.
    """

    n: int
    heads: np.ndarray
    tails: np.ndarray
    weights: np.ndarray
    adjacency: sparse.csr_matrix = field(repr=False)

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int, float]]) -> "Graph":
        n = int(n)
        if n < 1:
            raise ValueError("a graph needs at least one vertex")
        arr = list(edges)
        m = len(arr)
        heads = np.empty(m, dtype=np.int64)
        tails = np.empty(m, dtype=np.int64)
        weights = np.empty(m, dtype=np.float64)
        seen = set()
        for k, (i, j, w) in enumerate(arr):
            i, j, w = int(i), int(j), float(w)
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"edge ({i}, {j}) out of range for n={n}")
            if i == j:
                raise ValueError(f"self-loop at vertex {i}")
            if not (w > 0.0 and np.isfinite(w)):
                raise ValueError(f"edge ({i}, {j}) has nonpositive weight {w!r}")
            if i > j:
                i, j = j, i
            if (i, j) in seen:
                raise ValueError(f"duplicate edge ({i}, {j})")
            seen.add((i, j))
            heads[k], tails[k], weights[k] = i, j, w
        order = np.lexsort((tails, heads))
        heads, tails, weights = heads[order], tails[order], weights[order]
        adj = sparse.coo_matrix(
            (np.concatenate([weights, weights]),
             (np.concatenate([heads, tails]), np.concatenate([tails, heads]))),
            shape=(n, n),
        ).tocsr()
        adj.sort_indices()
        return cls(n, _readonly(heads), _readonly(tails), _readonly(weights), adj)

    @property
    def m(self) -> int:
        return int(self.heads.size)

    def edges(self) -> list[tuple[int, int, float]]:
        return [(int(i), int(j), float(w))
                for i, j, w in zip(self.heads, self.tails, self.weights)]

    def degrees(self) -> np.ndarray:
        """Weighted vertex degrees."""
        return np.asarray(self.adjacency.sum(axis=1)).ravel()

    def unweighted_degrees(self) -> np.ndarray:
        return np.diff(self.adjacency.indptr)

    def laplacian(self) -> sparse.csr_matrix:
        return (sparse.diags(self.degrees()) - self.adjacency).tocsr()

    def n_components(self) -> int:
        from scipy.sparse.csgraph import connected_components
        return int(connected_components(self.adjacency, directed=False)[0])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return (self.n == other.n
                and np.array_equal(self.heads, other.heads)
                and np.array_equal(self.tails, other.tails)
                and np.array_equal(self.weights, other.weights))

    __hash__ = None  # type: ignore[assignment]


def indicator(mask: np.ndarray) -> np.ndarray:
    """Characteristic vector of a boolean vertex mask."""
    return np.asarray(mask, dtype=bool).astype(np.float64)


def _check_vector(g: Graph, f) -> np.ndarray:
    f = np.asarray(f, dtype=np.float64)
    if f.shape != (g.n,):
        raise ValueError(f"expected a vector of length {g.n}, got shape {f.shape}")
    return f


def cut_value(g: Graph, a) -> float:
    """Total weight of the edges leaving the vertex set ``a``."""
    a = np.asarray(a, dtype=bool)
    if a.shape != (g.n,):
        raise ValueError(f"expected a mask of length {g.n}, got shape {a.shape}")
    crossing = a[g.heads] != a[g.tails]
    return float(g.weights[crossing].sum())


def total_variation(g: Graph, f) -> float:
    r"""Graph total variation :math:`\sum_{(i,j) \in E} w_{ij} |f_i - f_j|`."""
    f = _check_vector(g, f)
    return float(np.dot(g.weights, np.abs(f[g.heads] - f[g.tails])))


def tv_subgradient(g: Graph, f) -> np.ndarray:
    """Subgradient of the total variation with ``sign(0) = 0``.

    Component ``i`` is ``sum_j w_ij * sign(f_i - f_j)``; it satisfies the
    Euler identity ``<f, s> == total_variation(g, f)``.
    """
    f = _check_vector(g, f)
    flux = g.weights * np.sign(f[g.heads] - f[g.tails])
    return (np.bincount(g.heads, weights=flux, minlength=g.n)
            - np.bincount(g.tails, weights=flux, minlength=g.n))


# --------------------------------------------------------------------------
# parsing

def _text_lines(source: Source) -> list[str]:
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        data = source.read()
        text = data.decode("utf-8") if isinstance(data, bytes) else data
    return text.split("\n")


def _number(token: str, kind, lineno: int, what: str):
    try:
        return kind(token)
    except ValueError:
        raise GraphFormatError(f"cannot parse {what} {token!r}", lineno) from None


def _build(n: int, entries: list[tuple[int, int, float, int]]) -> Graph:
    """Validate ``(i, j, w, lineno)`` entries (0-based ids) and build a Graph."""
    seen: dict[tuple[int, int], int] = {}
    for i, j, w, lineno in entries:
        if not (0 <= i < n and 0 <= j < n):
            raise GraphFormatError(f"vertex id out of range 1..{n}", lineno)
        if i == j:
            raise GraphFormatError(f"self-loop at vertex {i + 1}", lineno)
        if not (w > 0.0 and np.isfinite(w)):
            raise GraphFormatError(f"nonpositive edge weight {w!r}", lineno)
        key = (min(i, j), max(i, j))
        if key in seen:
            raise GraphFormatError(
                f"duplicate edge {key[0] + 1}-{key[1] + 1} "
                f"(first seen on line {seen[key]})", lineno)
        seen[key] = lineno
    return Graph.from_edges(n, ((i, j, w) for i, j, w, _ in entries))


def _parse_metis(lines: list[str]) -> Graph:
    numbered = [(k + 1, ln.strip()) for k, ln in enumerate(lines)]
    body = [(k, ln) for k, ln in numbered if not ln.startswith("%")]
    while body and body[0][1] == "":
        body.pop(0)
    if not body:
        raise GraphFormatError("empty input, expected METIS header 'n m [fmt [ncon]]'")
    hline, header = body[0]
    tokens = header.split()
    if len(tokens) < 2 or len(tokens) > 4:
        raise GraphFormatError("malformed METIS header, expected 'n m [fmt [ncon]]'", hline)
    n = _number(tokens[0], int, hline, "vertex count")
    m = _number(tokens[1], int, hline, "edge count")
    fmt = tokens[2] if len(tokens) > 2 else "0"
    if len(fmt) > 3 or any(ch not in "01" for ch in fmt):
        raise GraphFormatError(f"unsupported METIS fmt field {fmt!r}", hline)
    fmt = fmt.zfill(3)
    has_sizes, has_vweights, has_eweights = (ch == "1" for ch in fmt)
    ncon = _number(tokens[3], int, hline, "ncon") if len(tokens) > 3 else 1
    if n < 1 or m < 0:
        raise GraphFormatError("vertex count must be positive and edge count nonnegative", hline)
    rows = body[1:]
    # an isolated vertex has a blank line, so only surplus blanks are dropped
    while len(rows) > n and rows[-1][1] == "":
        rows.pop()
    if len(rows) != n:
        raise GraphFormatError(f"expected {n} adjacency lines, found {len(rows)}",
                               rows[-1][0] if rows else hline)

    skip = int(has_sizes) + (ncon if has_vweights else 0)
    stride = 2 if has_eweights else 1
    directed: dict[tuple[int, int], tuple[float, int]] = {}
    for u, (lineno, row) in enumerate(rows):
        toks = row.split()[skip:]
        if len(toks) % stride:
            raise GraphFormatError("neighbor/weight list has odd length", lineno)
        for k in range(0, len(toks), stride):
            v = _number(toks[k], int, lineno, "vertex id") - 1
            w = _number(toks[k + 1], float, lineno, "edge weight") if has_eweights else 1.0
            if not 0 <= v < n:
                raise GraphFormatError(f"vertex id {v + 1} out of range 1..{n}", lineno)
            if v == u:
                raise GraphFormatError(f"self-loop at vertex {u + 1}", lineno)
            if not (w > 0.0 and np.isfinite(w)):
                raise GraphFormatError(f"nonpositive edge weight {w!r}", lineno)
            if (u, v) in directed:
                raise GraphFormatError(f"duplicate edge {u + 1}-{v + 1}", lineno)
            directed[(u, v)] = (w, lineno)

    entries = []
    for (u, v), (w, lineno) in directed.items():
        back = directed.get((v, u))
        if back is None:
            raise GraphFormatError(
                f"edge {u + 1}-{v + 1} has no reverse entry on vertex {v + 1}'s line", lineno)
        if back[0] != w:
            raise GraphFormatError(
                f"asymmetric weight for edge {u + 1}-{v + 1}: {w!r} vs {back[0]!r}", lineno)
        if u < v:
            entries.append((u, v, w, lineno))
    if len(entries) != m:
        raise GraphFormatError(f"header declares {m} edges, adjacency lists hold {len(entries)}",
                               hline)
    return _build(n, entries)


def _parse_matrix_market(lines: list[str]) -> Graph:
    if not lines or not lines[0].lower().startswith("%%matrixmarket"):
        raise GraphFormatError("missing '%%MatrixMarket' banner", 1)
    banner = lines[0].lower().split()
    if len(banner) != 5 or banner[1] != "matrix" or banner[2] != "coordinate":
        raise GraphFormatError("expected '%%MatrixMarket matrix coordinate <field> <symmetry>'", 1)
    fieldtype, symmetry = banner[3], banner[4]
    if fieldtype not in ("real", "integer", "pattern"):
        raise GraphFormatError(f"unsupported field type {fieldtype!r}", 1)
    if symmetry not in ("symmetric", "general"):
        raise GraphFormatError(f"unsupported symmetry {symmetry!r}", 1)

    body = [(k + 1, ln.strip()) for k, ln in enumerate(lines)
            if k > 0 and ln.strip() and not ln.lstrip().startswith("%")]
    if not body:
        raise GraphFormatError("missing size line")
    sline, size = body[0]
    toks = size.split()
    if len(toks) != 3:
        raise GraphFormatError("malformed size line, expected 'rows cols nnz'", sline)
    rows, cols, nnz = (_number(t, int, sline, "size") for t in toks)
    if rows != cols or rows < 1:
        raise GraphFormatError(f"adjacency matrix must be square, got {rows}x{cols}", sline)
    n = rows
    data = body[1:]
    if len(data) != nnz:
        raise GraphFormatError(f"size line declares {nnz} entries, found {len(data)}", sline)

    directed: dict[tuple[int, int], tuple[float, int]] = {}
    for lineno, row in data:
        toks = row.split()
        want = 2 if fieldtype == "pattern" else 3
        if len(toks) != want:
            raise GraphFormatError(f"expected {want} fields", lineno)
        i = _number(toks[0], int, lineno, "row index") - 1
        j = _number(toks[1], int, lineno, "column index") - 1
        w = 1.0 if fieldtype == "pattern" else _number(toks[2], float, lineno, "value")
        if not (0 <= i < n and 0 <= j < n):
            raise GraphFormatError(f"index out of range 1..{n}", lineno)
        if i == j:
            raise GraphFormatError(f"self-loop at vertex {i + 1}", lineno)
        if not (w > 0.0 and np.isfinite(w)):
            raise GraphFormatError(f"nonpositive edge weight {w!r}", lineno)
        if symmetry == "symmetric":
            key = (min(i, j), max(i, j))
            if key in directed:
                raise GraphFormatError(f"duplicate edge {key[0] + 1}-{key[1] + 1}", lineno)
            directed[key] = (w, lineno)
        else:
            if (i, j) in directed:
                raise GraphFormatError(f"duplicate entry ({i + 1}, {j + 1})", lineno)
            directed[(i, j)] = (w, lineno)

    if symmetry == "symmetric":
        entries = [(i, j, w, ln) for (i, j), (w, ln) in directed.items()]
    else:
        entries = []
        for (i, j), (w, lineno) in directed.items():
            back = directed.get((j, i))
            if back is None or back[0] != w:
                raise GraphFormatError(
                    f"asymmetric input: entry ({i + 1}, {j + 1}) has no matching "
                    f"({j + 1}, {i + 1}) entry", lineno)
            if i < j:
                entries.append((i, j, w, lineno))
    return _build(n, entries)


def _parse_edge_list(lines: list[str]) -> Graph:
    n_declared = None
    entries = []
    for k, raw in enumerate(lines):
        lineno = k + 1
        row = raw.strip()
        if not row:
            continue
        if row[0] in "#%":
            tokens = row[1:].split()
            if len(tokens) == 2 and tokens[0] == "vertices:":
                n_declared = _number(tokens[1], int, lineno, "vertex count")
            continue
        toks = row.split()
        if len(toks) not in (2, 3):
            raise GraphFormatError("expected 'i j [w]'", lineno)
        i = _number(toks[0], int, lineno, "vertex id") - 1
        j = _number(toks[1], int, lineno, "vertex id") - 1
        w = _number(toks[2], float, lineno, "edge weight") if len(toks) == 3 else 1.0
        if i < 0 or j < 0:
            raise GraphFormatError("vertex ids are 1-based", lineno)
        entries.append((i, j, w, lineno))
    if n_declared is None:
        if not entries:
            raise GraphFormatError("empty edge list and no '# vertices: N' line")
        n = 1 + max(max(i, j) for i, j, _, _ in entries)
    else:
        n = n_declared
    return _build(n, entries)


_PARSERS = {
    "metis": _parse_metis,
    "matrix-market": _parse_matrix_market,
    "edge-list": _parse_edge_list,
}


def parse_graph(source: Source, format: str) -> Graph:
    """Parse a graph from bytes, text or a file object.

    Parameters
    ----------
    source : bytes, str or file object
        Raw file contents.
    format : {'metis', 'matrix-market', 'edge-list'}
        Input format. Vertex ids in all formats are 1-based.

    Raises
    ------
    GraphFormatError
        On malformed input; the message names the offending line.
    """
    try:
        parser = _PARSERS[format]
    except KeyError:
        raise ValueError(f"unknown graph format {format!r}, expected one of {FORMATS}") from None
    return parser(_text_lines(source))


def guess_format(path: str) -> str:
    ext = os.path.splitext(path)[1].lower()
    if ext in (".graph", ".metis", ".chaco"):
        return "metis"
    if ext == ".mtx":
        return "matrix-market"
    return "edge-list"


def read_graph(path: str, format: str | None = None) -> Graph:
    with open(path, "rb") as fh:
        return parse_graph(fh, format or guess_format(path))


def serialize_graph(g: Graph) -> str:
    """Edge-list text: a ``# vertices: n`` line, then ``i j w`` (1-based).

    Weights are written with ``repr`` so parsing the text back reproduces
    them bit for bit.
    """
    out = io.StringIO()
    out.write(f"# vertices: {g.n}\n")
    for i, j, w in zip(g.heads, g.tails, g.weights):
        out.write(f"{i + 1} {j + 1} {float(w)!r}\n")
    return out.getvalue()


# --------------------------------------------------------------------------
# generators

def two_moons_graph(n: int, k: int, sigma: float | None = None, noise: float = 0.1,
                    seed: int = 0) -> tuple[Graph, np.ndarray]:
    """Symmetric k-NN graph on two interleaved noisy half circles.

    Each moon holds ``n // 2`` points on a unit half circle; the upper one is
    ``(cos t, sin t)``, the lower ``(1 - cos t, 1 - sin t - 0.5)`` for ``t``
    evenly spaced in ``[0, pi]``. Coordinates get i.i.d. Gaussian noise of
    standard deviation ``noise``. Vertices ``i`` and ``j`` are joined when
    either is among the other's ``k`` nearest neighbors, with weight
    ``exp(-|x_i - x_j|^2 / (2 sigma^2))``. ``sigma`` defaults to the mean
    distance from a point to its k-th nearest neighbor.

    Returns
    -------
    graph : Graph
    labels : ndarray of int
        0 for the upper moon, 1 for the lower.
    """
    if n < 2 or n % 2:
        raise ValueError("n must be a positive even number")
    if k < 1:
        raise ValueError("k must be at least 1")
    if k >= n:
        raise ValueError(f"k={k} must be smaller than n={n}")
    half = n // 2
    rng = np.random.default_rng(seed)
    t = np.linspace(0.0, np.pi, half)
    upper = np.column_stack([np.cos(t), np.sin(t)])
    lower = np.column_stack([1.0 - np.cos(t), 1.0 - np.sin(t) - 0.5])
    points = np.vstack([upper, lower]) + noise * rng.standard_normal((n, 2))
    labels = np.repeat([0, 1], half)

    dist, nbr = cKDTree(points).query(points, k=k + 1)
    # column 0 is the point itself
    dist, nbr = dist[:, 1:], nbr[:, 1:]
    if sigma is None:
        sigma = float(dist[:, -1].mean())
    if not sigma > 0:
        raise ValueError("kernel width must be positive")

    rows = np.repeat(np.arange(n), k)
    cols = nbr.ravel()
    lo, hi = np.minimum(rows, cols), np.maximum(rows, cols)
    d = dist.ravel()
    keys, first = np.unique(lo * n + hi, return_index=True)
    w = np.exp(-d[first] ** 2 / (2.0 * sigma ** 2))
    w = np.maximum(w, np.finfo(np.float64).tiny)
    g = Graph.from_edges(n, zip(keys // n, keys % n, w))
    return g, labels
