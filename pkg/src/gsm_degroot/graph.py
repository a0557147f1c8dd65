"""Weighted digraph substrates: generation, weight randomization, validation.

Graphs are stored as sparse row-stochastic matrices: entry (i, j) is the
weight of the directed edge j -> i, so row i lists the incoming weights of
node i and sums to one. The matrix is therefore the opinion update operator
itself: next_opinions = matrix @ opinions.
"""

from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass
from typing import Iterator

import networkx as nx
import numpy as np
from scipy import sparse

from .seeds import derive_seed

FAMILIES = ("barabasi-albert", "sbm", "watts-strogatz", "erdos-renyi")

NORMALIZATION_TOL = 1e-12
_MAX_ATTEMPTS = 100
_MAX_MIX_ROUNDS = 40
_DENSE_BLOCK = 2048


class GraphError(ValueError):
    """Invalid graph structure or weights."""


class GenerationError(RuntimeError):
    """Random generation could not satisfy the structural requirements."""


class ConvergenceError(RuntimeError):
    """Iterative solver hit its iteration cap."""


@dataclass
class GraphGenSpec:
    """Recipe for one random graph.

    family parameters: m (barabasi-albert attachment count), k and
    rewire_prob (watts-strogatz), edge_prob (erdos-renyi), cluster_ratios,
    intra_prob and inter_prob (two-block sbm). Undirected samples become
    digraphs with both directions; ensure_self_loops adds every (i, i) edge
    before weights are assigned; weight_rounds = 0 keeps the uniform
    1/indegree weights instead of randomizing them.
    """

    family: str
    n: int
    seed: int = 0
    m: int = 3
    k: int = 6
    rewire_prob: float = 0.1
    edge_prob: float = 0.1
    cluster_ratios: tuple[float, float] = (0.7, 0.3)
    intra_prob: float = 0.5
    inter_prob: float = 0.1
    ensure_self_loops: bool = False
    weight_rounds: int = 10

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise GraphError(f"unknown graph family: {self.family!r}")
        if self.n < 2:
            raise GraphError(f"need at least 2 nodes, got {self.n}")
        for name in ("rewire_prob", "edge_prob", "intra_prob", "inter_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise GraphError(f"{name} must lie in [0, 1], got {p!r}")
        if self.family == "barabasi-albert" and not 1 <= self.m < self.n:
            raise GraphError(f"attachment count m must satisfy 1 <= m < n, got {self.m}")
        if self.family == "watts-strogatz" and not 2 <= self.k < self.n:
            raise GraphError(f"neighbor count k must satisfy 2 <= k < n, got {self.k}")
        if self.family == "sbm":
            ratios = tuple(float(c) for c in self.cluster_ratios)
            if len(ratios) != 2 or min(ratios) <= 0.0 or abs(sum(ratios) - 1.0) > 1e-9:
                raise GraphError(f"cluster_ratios must be two positive fractions summing to 1, got {self.cluster_ratios!r}")
            self.cluster_ratios = ratios
        if self.weight_rounds < 0 or self.weight_rounds > _MAX_MIX_ROUNDS:
            raise GraphError(f"weight_rounds must lie in [0, {_MAX_MIX_ROUNDS}], got {self.weight_rounds}")


@dataclass
class WeightedDigraph:
    """Fixed digraph with incoming-normalized edge weights.

    Treated as immutable: operations that change weights return a new
    instance. clusters records block sizes for family generators that
    partition the nodes (used for per-cluster population sampling).
    """

    matrix: sparse.csr_array
    clusters: tuple[int, ...] | None = None

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def indegrees(self) -> np.ndarray:
        return np.diff(self.matrix.indptr)

    def incoming_sums(self) -> np.ndarray:
        return np.asarray(self.matrix.sum(axis=1)).ravel()

    def edges(self) -> Iterator[tuple[int, int, float]]:
        """Yield (source, target, weight) sorted by source then target."""
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.row, coo.col))
        for idx in order:
            yield int(coo.col[idx]), int(coo.row[idx]), float(coo.data[idx])

    def dense_operator(self) -> np.ndarray:
        return self.matrix.toarray()


def from_edges(
    n: int,
    edges,
    clusters: tuple[int, ...] | None = None,
    normalize: bool = False,
) -> WeightedDigraph:
    """Build a graph from (source, target, weight) triples.

    Duplicate edges, out-of-range ids, negative weights, and nodes without
    any incoming edge are rejected. With normalize=False the incoming sums
    must already be 1 within NORMALIZATION_TOL.
    """
    triples = list(edges)
    if not triples:
        raise GraphError("no edges")
    src = np.asarray([t[0] for t in triples], dtype=np.int64)
    dst = np.asarray([t[1] for t in triples], dtype=np.int64)
    wts = np.asarray([t[2] for t in triples], dtype=np.float64)
    if src.min() < 0 or dst.min() < 0 or src.max() >= n or dst.max() >= n:
        raise GraphError(f"edge endpoint outside [0, {n})")
    if np.any(wts < 0.0) or not np.all(np.isfinite(wts)):
        raise GraphError("edge weights must be finite and non-negative")
    keys = dst * n + src
    if np.unique(keys).size != keys.size:
        raise GraphError("duplicate edges")
    matrix = sparse.csr_array(
        sparse.coo_array((wts, (dst, src)), shape=(n, n))
    )
    matrix.sort_indices()
    graph = WeightedDigraph(matrix=matrix, clusters=clusters)
    if np.any(graph.indegrees() == 0):
        missing = int(np.flatnonzero(graph.indegrees() == 0)[0])
        raise GraphError(f"node {missing} has no incoming edge")
    sums = graph.incoming_sums()
    if normalize:
        inv = 1.0 / sums
        scaled = matrix.multiply(inv[:, None]).tocsr()
        scaled.sort_indices()
        graph = WeightedDigraph(matrix=sparse.csr_array(scaled), clusters=clusters)
    elif np.max(np.abs(sums - 1.0)) > NORMALIZATION_TOL:
        worst = int(np.argmax(np.abs(sums - 1.0)))
        raise GraphError(f"incoming weights of node {worst} sum to {sums[worst]!r}, not 1")
    return graph


def from_dense(mat: np.ndarray, clusters: tuple[int, ...] | None = None) -> WeightedDigraph:
    """Build a graph from a dense operator; mat[i, j] is the weight of j -> i."""
    arr = np.asarray(mat, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise GraphError(f"operator must be square, got shape {arr.shape}")
    src, dst = np.nonzero(arr.T)
    return from_edges(arr.shape[0], zip(src.tolist(), dst.tolist(), arr.T[src, dst].tolist()))


def identity_graph(n: int) -> WeightedDigraph:
    """Self-loop-only graph; the opinion layer leaves every node untouched."""
    return WeightedDigraph(matrix=sparse.csr_array(sparse.eye(n, format="csr")))


def scale_weights(graph: WeightedDigraph, alpha: float) -> WeightedDigraph:
    """Rescale every weight by alpha, making each incoming sum alpha."""
    if alpha <= 0.0 or not math.isfinite(alpha):
        raise GraphError(f"scale factor must be positive and finite, got {alpha!r}")
    scaled = graph.matrix.copy()
    scaled.data = scaled.data * alpha
    return WeightedDigraph(matrix=scaled, clusters=graph.clusters)


@dataclass(frozen=True)
class GraphReport:
    strongly_connected: bool
    aperiodic: bool
    normalized: bool


def validate(graph: WeightedDigraph) -> GraphReport:
    """Check strong connectivity, aperiodicity, and weight normalization.

    Strong connectivity comes from forward and backward reachability sweeps
    from node 0; aperiodicity from the gcd of (level[u] + 1 - level[v]) over
    edges u -> v of a breadth-first levelling, which is 1 exactly when the
    cycle lengths are coprime.
    """
    sums = graph.incoming_sums()
    normalized = bool(
        np.all(graph.indegrees() >= 1)
        and np.max(np.abs(sums - 1.0)) <= NORMALIZATION_TOL
    )
    pattern = graph.matrix.copy()
    pattern.data = np.ones_like(pattern.data)
    sc = _reaches_all(pattern) and _reaches_all(sparse.csr_array(pattern.T))
    return GraphReport(strongly_connected=sc, aperiodic=_aperiodic(graph.matrix), normalized=normalized)


def _reaches_all(pattern: sparse.csr_array) -> bool:
    n = pattern.shape[0]
    reached = np.zeros(n, dtype=np.float64)
    reached[0] = 1.0
    count = 1
    for _ in range(n):
        reached = np.minimum(reached + (pattern @ reached), 1.0)
        reached[reached > 0] = 1.0
        new_count = int(reached.sum())
        if new_count == n:
            return True
        if new_count == count:
            return False
        count = new_count
    return False


def _aperiodic(matrix: sparse.csr_array) -> bool:
    n = matrix.shape[0]
    out = sparse.csr_array(matrix.T)
    level = np.full(n, -1, dtype=np.int64)
    level[0] = 0
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for v in out.indices[out.indptr[u]:out.indptr[u + 1]]:
            if level[v] < 0:
                level[v] = level[u] + 1
                queue.append(int(v))
    coo = matrix.tocoo()
    srcs, dsts = coo.col, coo.row
    seen = (level[srcs] >= 0) & (level[dsts] >= 0)
    diffs = np.abs(level[srcs[seen]] + 1 - level[dsts[seen]])
    if diffs.size == 0:
        return False
    return int(np.gcd.reduce(diffs)) == 1


def randomize_weights(graph: WeightedDigraph, rounds_per_node: int = 10, seed: int = 0) -> WeightedDigraph:
    """Re-draw incoming weights by repeated random pair transfers.

    Each node's incoming weights restart at 1/indegree; then rounds_per_node
    times, two distinct incoming edges are picked uniformly at random and
    half of the first edge's current weight moves to the second. The mixing
    runs on integer numerators over indegree * 2**rounds_per_node, so every
    halving is exact and the per-node weight mass is conserved exactly.
    Nodes with a single incoming edge keep weight 1.
    """
    if rounds_per_node < 0 or rounds_per_node > _MAX_MIX_ROUNDS:
        raise GraphError(f"rounds_per_node must lie in [0, {_MAX_MIX_ROUNDS}], got {rounds_per_node}")
    rng = np.random.default_rng(seed)
    matrix = graph.matrix.copy()
    indptr = matrix.indptr
    data = matrix.data
    unit = 1 << rounds_per_node
    for node in range(graph.n):
        lo, hi = indptr[node], indptr[node + 1]
        d = int(hi - lo)
        if d < 2:
            data[lo:hi] = 1.0
            continue
        nums = np.full(d, unit, dtype=np.int64)
        if rounds_per_node > 0:
            first = rng.integers(0, d, size=rounds_per_node)
            second = rng.integers(0, d - 1, size=rounds_per_node)
            second += second >= first
            for a, b in zip(first, second):
                half = nums[a] // 2
                nums[a] -= half
                nums[b] += half
        data[lo:hi] = nums / (d * unit)
    return WeightedDigraph(matrix=matrix, clusters=graph.clusters)


def generate(spec: GraphGenSpec) -> WeightedDigraph:
    """Sample a strongly connected graph and draw its incoming weights.

    Structures are resampled with derived seeds until strongly connected,
    up to 100 attempts. Weights start uniform per node and are then mixed
    by randomize_weights unless spec.weight_rounds is 0.
    """
    for attempt in range(_MAX_ATTEMPTS):
        src, dst, clusters = _structure_edges(spec, derive_seed(spec.seed, "structure", attempt))
        try:
            graph = _uniform_graph(spec.n, src, dst, clusters)
        except GraphError:
            continue
        pattern = graph.matrix.copy()
        pattern.data = np.ones_like(pattern.data)
        if not (_reaches_all(pattern) and _reaches_all(sparse.csr_array(pattern.T))):
            continue
        if spec.weight_rounds > 0:
            graph = randomize_weights(graph, spec.weight_rounds, derive_seed(spec.seed, "weights", attempt))
        return graph
    raise GenerationError(
        f"no strongly connected {spec.family!r} sample in {_MAX_ATTEMPTS} attempts (n={spec.n}, seed={spec.seed})"
    )


def _uniform_graph(n: int, src: np.ndarray, dst: np.ndarray, clusters) -> WeightedDigraph:
    if src.size == 0:
        raise GraphError("no edges")
    matrix = sparse.csr_array(
        sparse.coo_array((np.ones(src.size), (dst, src)), shape=(n, n))
    )
    matrix.sort_indices()
    if matrix.nnz != src.size:
        raise GraphError("duplicate edges")
    indeg = np.diff(matrix.indptr)
    if np.any(indeg == 0):
        raise GraphError("isolated node")
    matrix.data = np.repeat(1.0 / indeg, indeg)
    return WeightedDigraph(matrix=matrix, clusters=clusters)


def _structure_edges(spec: GraphGenSpec, seed: int):
    """Directed edge arrays for one structure sample (both directions)."""
    clusters = None
    if spec.family == "barabasi-albert":
        g = nx.barabasi_albert_graph(spec.n, spec.m, seed=seed)
        pairs = np.asarray(list(g.edges()), dtype=np.int64).reshape(-1, 2)
    elif spec.family == "watts-strogatz":
        g = nx.watts_strogatz_graph(spec.n, spec.k, spec.rewire_prob, seed=seed)
        pairs = np.asarray(list(g.edges()), dtype=np.int64).reshape(-1, 2)
    elif spec.family == "erdos-renyi":
        if spec.edge_prob >= 1.0:
            iu = np.triu_indices(spec.n, k=1)
            pairs = np.column_stack(iu).astype(np.int64)
        else:
            g = nx.fast_gnp_random_graph(spec.n, spec.edge_prob, seed=seed)
            pairs = np.asarray(list(g.edges()), dtype=np.int64).reshape(-1, 2)
    else:
        s1 = int(spec.cluster_ratios[0] * spec.n)
        clusters = (s1, spec.n - s1)
        pairs = _sbm_pairs(spec.n, s1, spec.intra_prob, spec.inter_prob, np.random.default_rng(seed))
    src = np.concatenate([pairs[:, 0], pairs[:, 1]])
    dst = np.concatenate([pairs[:, 1], pairs[:, 0]])
    if spec.ensure_self_loops:
        loops = np.arange(spec.n, dtype=np.int64)
        keep = src != dst
        src = np.concatenate([src[keep], loops])
        dst = np.concatenate([dst[keep], loops])
    return src, dst, clusters


def _sbm_pairs(n: int, s1: int, rho: float, r: float, rng: np.random.Generator) -> np.ndarray:
    """Undirected pair sample for a two-block model, row-chunked for memory."""
    chunks = [
        _block_pairs(rng, 0, s1, 0, s1, rho, intra=True),
        _block_pairs(rng, s1, n, s1, n, rho, intra=True),
        _block_pairs(rng, 0, s1, s1, n, r, intra=False),
    ]
    return np.concatenate(chunks, axis=0)


def _block_pairs(rng, row_lo, row_hi, col_lo, col_hi, p, intra):
    rows_out = []
    cols_out = []
    ncols = col_hi - col_lo
    for start in range(row_lo, row_hi, _DENSE_BLOCK):
        stop = min(start + _DENSE_BLOCK, row_hi)
        mask = rng.random((stop - start, ncols)) < p
        if intra:
            # keep source < target to sample each unordered pair once
            rr = np.arange(start, stop)[:, None]
            cc = np.arange(col_lo, col_hi)[None, :]
            mask &= rr < cc
        ri, ci = np.nonzero(mask)
        rows_out.append(ri + start)
        cols_out.append(ci + col_lo)
    rows = np.concatenate(rows_out) if rows_out else np.empty(0, dtype=np.int64)
    cols = np.concatenate(cols_out) if cols_out else np.empty(0, dtype=np.int64)
    return np.column_stack([rows, cols]).astype(np.int64)


def stationary_distribution(graph: WeightedDigraph, tol: float = 1e-12, max_iter: int = 100_000) -> np.ndarray:
    """Left fixed vector of the update operator by power iteration.

    Returns the probability vector pi with l1 residual ||pi @ W - pi|| <= tol.
    Periodic or disconnected chains do not converge and raise
    ConvergenceError naming the iteration cap.
    """
    report = validate(graph)
    if not report.normalized:
        raise GraphError("stationary distribution needs normalized incoming weights")
    n = graph.n
    pi = np.full(n, 1.0 / n)
    matrix = graph.matrix
    for _ in range(max_iter):
        nxt = matrix.T @ pi
        total = nxt.sum()
        if total <= 0.0 or not math.isfinite(total):
            raise ConvergenceError("power iteration left the simplex")
        nxt /= total
        if np.abs(nxt - pi).sum() <= tol:
            return pi
        pi = nxt
    raise ConvergenceError(f"power iteration did not reach tol={tol} within {max_iter} iterations")


def save_edge_list(graph: WeightedDigraph, path) -> None:
    """Write source,target,weight rows with full float precision."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["source", "target", "weight"])
        for source, target, weight in graph.edges():
            writer.writerow([source, target, repr(weight)])


def load_edge_list(path, normalize: bool = False) -> WeightedDigraph:
    """Read a source,target,weight file written by save_edge_list."""
    triples = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:3]] != ["source", "target", "weight"]:
            raise GraphError(f"expected header source,target,weight in {path}")
        for row in reader:
            if not row:
                continue
            triples.append((int(row[0]), int(row[1]), float(row[2])))
    if not triples:
        raise GraphError(f"no edges in {path}")
    n = max(max(s, t) for s, t, _ in triples) + 1
    return from_edges(n, triples, normalize=normalize)
