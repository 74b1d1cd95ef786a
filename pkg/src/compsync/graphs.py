"""Graph Laplacians for the standard topologies used in scenarios."""
from __future__ import annotations

import math

import networkx as nx
import numpy as np

from .errors import ConfigError, NotConnected


def laplacian(g: nx.Graph, scale: float = 1.0) -> np.ndarray:
    nodes = sorted(g.nodes)
    return scale * nx.laplacian_matrix(g, nodelist=nodes, weight="weight").toarray().astype(float)


def random_connected(N: int, seed: int, p: float | None = None, max_tries: int = 1000) -> nx.Graph:
    """Erdos-Renyi graph with ``p = 2 ln N / N`` (capped at 1), redrawn until connected."""
    if N < 2:
        raise ConfigError("need at least two agents")
    p = min(1.0, 2.0 * math.log(N) / N) if p is None else p
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        g = nx.gnp_random_graph(N, p, seed=int(rng.integers(2**31)))
        if nx.is_connected(g):
            return g
    raise NotConnected(f"no connected G({N}, {p:.3f}) sample in {max_tries} tries")


def from_edges(N: int, edges) -> nx.Graph:
    g = nx.Graph()
    g.add_nodes_from(range(N))
    for e in edges:
        u, v = int(e[0]), int(e[1])
        if not (0 <= u < N and 0 <= v < N) or u == v:
            raise ConfigError(f"bad edge {e!r} for N={N}")
        g.add_edge(u, v, weight=float(e[2]) if len(e) > 2 else 1.0)
    return g


def make_graph(kind: str, N: int, seed: int = 0, edges=None) -> nx.Graph:
    if N < 2:
        raise ConfigError(f"need at least two agents, got {N}")
    if kind == "path":
        return nx.path_graph(N)
    if kind == "cycle":
        return nx.cycle_graph(N) if N > 2 else nx.path_graph(N)
    if kind == "complete":
        return nx.complete_graph(N)
    if kind in ("random", "random-connected"):
        return random_connected(N, seed)
    if kind == "edges":
        return from_edges(N, edges or [])
    raise ConfigError(f"unknown graph kind {kind!r}")


def parse_graph_spec(text: str, seed: int = 0) -> nx.Graph:
    """Parse ``kind:N`` such as ``complete:10`` or ``random-connected:12``."""
    kind, sep, size = text.partition(":")
    if not sep:
        raise ConfigError(f"graph spec must look like kind:N, got {text!r}")
    try:
        N = int(size)
    except ValueError as exc:
        raise ConfigError(f"bad agent count in graph spec {text!r}") from exc
    return make_graph(kind, N, seed)
