"""Weighted sensor graphs, Laplacians and the dense spectral oracle.

Vertex indices are 0-based everywhere in code and on disk.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

DEFAULT_SPECTRUM_LIMIT = 2000


class GraphError(ValueError):
    """Invalid graph input (bad edges, too few vertices, size guard)."""


class DisconnectedGraphError(GraphError):
    """The constructed graph has more than one connected component."""


@dataclass(frozen=True, eq=False)
class WeightedGraph:
    """Undirected weighted graph with sorted per-vertex neighbor lists.

    ``edges`` holds each unordered pair once as ``(m, n, w)`` with ``m < n``,
    sorted lexicographically. Construction validates the edge list and, unless
    ``require_connected`` is False, connectivity.
    """

    num_vertices: int
    edges: tuple[tuple[int, int, float], ...]
    positions: np.ndarray | None = None

    def __init__(
        self,
        num_vertices: int,
        edges: Iterable[Sequence[float]],
        positions=None,
        require_connected: bool = True,
    ):
        n = int(num_vertices)
        if n < 1:
            raise GraphError(f"num_vertices must be positive, got {num_vertices}")
        seen = {}
        for e in edges:
            m, k, w = int(e[0]), int(e[1]), float(e[2])
            if m == k:
                raise GraphError(f"self-loop at vertex {m}")
            if not (0 <= m < n and 0 <= k < n):
                raise GraphError(f"edge ({m}, {k}) out of range for N={n}")
            if not (w > 0 and math.isfinite(w)):
                raise GraphError(f"edge ({m}, {k}) has non-positive weight {w}")
            key = (min(m, k), max(m, k))
            if key in seen:
                raise GraphError(f"duplicate edge {key}")
            seen[key] = w
        object.__setattr__(self, "num_vertices", n)
        object.__setattr__(
            self, "edges", tuple((m, k, seen[(m, k)]) for m, k in sorted(seen))
        )
        if positions is not None:
            positions = np.array(positions, dtype=np.float64)
            if positions.shape != (n, 2):
                raise GraphError(f"positions must have shape ({n}, 2)")
            positions.setflags(write=False)
        object.__setattr__(self, "positions", positions)
        if require_connected and not self.is_connected():
            raise DisconnectedGraphError(
                f"graph with N={n} and {len(self.edges)} edges is disconnected"
            )

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        n = self.num_vertices
        if not self.edges:
            return sp.csr_matrix((n, n))
        e = np.array(self.edges)
        rows = np.concatenate([e[:, 0], e[:, 1]]).astype(np.int64)
        cols = np.concatenate([e[:, 1], e[:, 0]]).astype(np.int64)
        vals = np.concatenate([e[:, 2], e[:, 2]])
        return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))

    @cached_property
    def degrees(self) -> np.ndarray:
        d = np.zeros(self.num_vertices)
        for m, k, w in self.edges:
            d[m] += w
            d[k] += w
        return d

    @cached_property
    def neighbor_lists(self) -> tuple[tuple[tuple[int, float], ...], ...]:
        """Per vertex, the sorted tuple of ``(neighbor, weight)`` pairs."""
        nbrs: list[list[tuple[int, float]]] = [[] for _ in range(self.num_vertices)]
        for m, k, w in self.edges:
            nbrs[m].append((k, w))
            nbrs[k].append((m, w))
        return tuple(tuple(sorted(lst)) for lst in nbrs)

    def neighbors(self, n: int) -> tuple[int, ...]:
        return tuple(m for m, _ in self.neighbor_lists[n])

    def has_edge(self, m: int, n: int) -> bool:
        return any(k == n for k, _ in self.neighbor_lists[m])

    def is_connected(self) -> bool:
        if self.num_vertices == 1:
            return True
        ncomp, _ = connected_components(self.adjacency, directed=False)
        return ncomp == 1

    def to_dict(self) -> dict:
        return {
            "n": self.num_vertices,
            "edges": [[m, k, w] for m, k, w in self.edges],
            "positions": None if self.positions is None else self.positions.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict, require_connected: bool = True) -> "WeightedGraph":
        return cls(
            data["n"],
            data["edges"],
            positions=data.get("positions"),
            require_connected=require_connected,
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str, require_connected: bool = True) -> "WeightedGraph":
        return cls.from_dict(json.loads(text), require_connected=require_connected)


@dataclass(frozen=True, eq=False)
class Laplacian:
    """Non-normalized Laplacian ``D - A`` in CSR form plus the degree vector."""

    matrix: sp.csr_matrix
    degrees: np.ndarray

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def __matmul__(self, other):
        return self.matrix @ other

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Eigenvalues (ascending) and orthonormal eigenvectors as columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def n(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def lambda_max(self) -> float:
        return float(self.eigenvalues[-1])


def gaussian_weight(distance, sigma: float):
    """Gaussian kernel ``exp(-d^2 / (2 sigma^2))``."""
    d = np.asarray(distance, dtype=np.float64)
    return np.exp(-(d**2) / (2.0 * sigma**2))


def connection_radius(sigma: float, kappa: float) -> float:
    """Largest distance whose Gaussian weight still reaches ``kappa``."""
    return sigma * math.sqrt(-2.0 * math.log(kappa))


def build_geometric_graph(
    positions,
    sigma: float,
    kappa: float,
    threshold: str = "weight",
    require_connected: bool = True,
) -> WeightedGraph:
    """Thresholded Gaussian kernel graph over points in the unit square.

    Parameters
    ----------
    positions : array-like, shape (N, 2)
        Sensor coordinates.
    sigma : float
        Kernel width.
    kappa : float
        Threshold. With ``threshold="weight"`` (default) an edge is kept iff its
        Gaussian weight is at least ``kappa``. With ``threshold="distance"`` an
        edge is kept iff the distance is at most ``kappa``.
    threshold : {"weight", "distance"}
    require_connected : bool
        Raise :class:`DisconnectedGraphError` when the result is disconnected.
    """
    pts = np.asarray(positions, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise GraphError("positions must be an (N, 2) array")
    if pts.shape[0] < 2:
        raise GraphError("need at least 2 points")
    if not sigma > 0:
        raise GraphError(f"sigma must be positive, got {sigma}")
    if threshold == "weight":
        if not 0 < kappa <= 1:
            raise GraphError(f"kappa must lie in (0, 1], got {kappa}")
        radius = connection_radius(sigma, kappa)
    elif threshold == "distance":
        if not kappa > 0:
            raise GraphError(f"kappa must be positive, got {kappa}")
        radius = kappa
    else:
        raise GraphError(f"unknown threshold mode {threshold!r}")

    # pad the search radius so boundary pairs are decided by the exact test below
    pairs = cKDTree(pts).query_pairs(radius * (1 + 1e-9) + 1e-15, output_type="ndarray")
    pairs = pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))] if len(pairs) else pairs
    dist = np.linalg.norm(pts[pairs[:, 0]] - pts[pairs[:, 1]], axis=1) if len(pairs) else np.empty(0)
    w = gaussian_weight(dist, sigma)
    keep = w >= kappa if threshold == "weight" else dist <= kappa
    keep &= w > 0
    edges = [(int(i), int(j), float(x)) for (i, j), x in zip(pairs[keep], w[keep])]
    return WeightedGraph(len(pts), edges, positions=pts, require_connected=require_connected)


def density_matched_sigma(n: int, sigma: float = 0.074, reference_n: int = 500) -> float:
    """Kernel width giving ``n`` uniform points the same expected neighbor
    count that ``sigma`` gives ``reference_n`` points."""
    return sigma * math.sqrt(reference_n / n)


def random_positions(n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform points in ``[0, 1]^2``."""
    return rng.random((n, 2))


def sample_connected_geometric_graph(
    n: int,
    sigma: float,
    kappa: float,
    rng: np.random.Generator,
    max_tries: int = 1000,
    threshold: str = "weight",
) -> tuple[WeightedGraph, int]:
    """Draw uniform positions until the geometric graph is connected.

    Returns the graph and the number of rejected (disconnected) draws.
    """
    for attempt in range(max_tries):
        try:
            g = build_geometric_graph(random_positions(n, rng), sigma, kappa, threshold)
        except DisconnectedGraphError:
            continue
        return g, attempt
    raise DisconnectedGraphError(
        f"no connected graph after {max_tries} draws (N={n}, sigma={sigma}, kappa={kappa})"
    )


def laplacian(g: WeightedGraph) -> Laplacian:
    a = g.adjacency
    d = g.degrees
    mat = (sp.diags(d) - a).tocsr()
    mat.sort_indices()
    return Laplacian(matrix=mat, degrees=d.copy())


def spectrum(lap: Laplacian, max_size: int = DEFAULT_SPECTRUM_LIMIT) -> Spectrum:
    """Dense eigendecomposition, for use as a test oracle only.

    Eigenvectors are sign-normalized so the largest-magnitude entry of each
    is positive, which makes the output deterministic.
    """
    if lap.n > max_size:
        raise GraphError(f"N={lap.n} exceeds dense spectrum limit {max_size}")
    lam, vecs = np.linalg.eigh(lap.toarray())
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return Spectrum(eigenvalues=lam, eigenvectors=vecs * signs)


def _check_len(s: Spectrum, f: np.ndarray) -> np.ndarray:
    f = np.asarray(f, dtype=np.float64)
    if f.shape[0] != s.n:
        raise ValueError(f"signal length {f.shape[0]} does not match N={s.n}")
    return f


def gft(s: Spectrum, f) -> np.ndarray:
    """Graph Fourier transform: coefficients of ``f`` in the eigenbasis."""
    return s.eigenvectors.T @ _check_len(s, f)


def igft(s: Spectrum, fhat) -> np.ndarray:
    return s.eigenvectors @ _check_len(s, fhat)


def lambda_max_bound(g: WeightedGraph) -> float:
    """Upper bound ``max{d(m) + d(n) : m ~ n}`` on the largest eigenvalue."""
    if not g.edges:
        raise GraphError("lambda_max bound needs at least one edge")
    d = g.degrees
    return float(max(d[m] + d[k] for m, k, _ in g.edges))


def smoothness(g: WeightedGraph, f, r: int = 1) -> float:
    """``f^T L^r f`` by repeated sparse products.

    Splits the power symmetrically: with ``u = L^(r//2) f`` the result is
    ``u.u`` for even ``r`` and the edge sum ``sum_e w (u_m - u_n)^2`` for odd
    ``r``. Both are nonnegative by construction.
    """
    if r < 1:
        raise ValueError("r must be >= 1")
    mat = laplacian(g).matrix
    u = np.asarray(f, dtype=np.float64)
    for _ in range(r // 2):
        u = mat @ u
    if r % 2 == 0:
        return float(u @ u)
    if not g.edges:
        return 0.0
    e = np.array(g.edges)
    m, k = e[:, 0].astype(np.int64), e[:, 1].astype(np.int64)
    return float(np.sum(e[:, 2] * (u[m] - u[k]) ** 2))
