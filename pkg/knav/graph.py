from enum import Enum
from scipy.sparse.csgraph import connected_components
import numpy as np
import logging

logger = logging.getLogger(__name__)


class GraphError(ValueError):
    pass


class Topology(Enum):
    RING = "ring"
    PATH = "path"
    COMPLETE = "complete"
    CUSTOM = "custom"

    @staticmethod
    def fromString(value: str) -> "Topology":
        try:
            return Topology(value.strip().lower())
        except ValueError:
            raise GraphError('Unknown topology "{0}"'.format(value))


class CommGraph(object):
    """
    Undirected, unweighted communication graph between the learning agents.

    Nodes are 0-based internally, edges are stored as sorted pairs ``(i, j)`` with ``i < j``.
    Use :func:`parse_edges` / :func:`format_edges` at the file boundary, where nodes are 1-based.
    """

    def __init__(self, node_count: int, edges=()):
        if node_count < 1:
            raise GraphError("node count must be at least 1, got {0}".format(node_count))
        self.node_count = node_count
        normalized = []
        for i, j in edges:
            if not (0 <= i < node_count and 0 <= j < node_count):
                raise GraphError("edge ({0}, {1}) references a node outside 1..{2}".format(i + 1, j + 1, node_count))
            if i == j:
                raise GraphError("self-loop on node {0}".format(i + 1))
            pair = (min(i, j), max(i, j))
            if pair in normalized:
                raise GraphError("duplicate edge ({0}, {1})".format(pair[0] + 1, pair[1] + 1))
            normalized.append(pair)
        self.edges = tuple(sorted(normalized))

    def __eq__(self, other):
        return isinstance(other, CommGraph) and self.node_count == other.node_count and self.edges == other.edges

    def __hash__(self):
        return hash((self.node_count, self.edges))

    def __repr__(self):
        return "CommGraph(p={0}, edges={1})".format(self.node_count, format_edges(self))

    def neighbors(self, i: int):
        result = [b for a, b in self.edges if a == i] + [a for a, b in self.edges if b == i]
        return sorted(result)

    def adjacency(self) -> np.ndarray:
        adj = np.zeros((self.node_count, self.node_count))
        for i, j in self.edges:
            adj[i, j] = 1.0
            adj[j, i] = 1.0
        return adj


def build_graph(topology, p: int, edges=None) -> CommGraph:
    if isinstance(topology, str):
        topology = Topology.fromString(topology)
    if p < 1:
        raise GraphError("node count must be at least 1, got {0}".format(p))
    if topology is Topology.RING:
        if p == 1:
            pairs = []
        elif p == 2:
            # a ring on two nodes degenerates to a single edge
            pairs = [(0, 1)]
        else:
            pairs = [(i, (i + 1) % p) for i in range(p)]
    elif topology is Topology.PATH:
        pairs = [(i, i + 1) for i in range(p - 1)]
    elif topology is Topology.COMPLETE:
        pairs = [(i, j) for i in range(p) for j in range(i + 1, p)]
    else:
        if edges is None:
            raise GraphError("custom topology needs an edge list")
        pairs = edges
    return CommGraph(p, pairs)


def laplacian(g: CommGraph) -> np.ndarray:
    adj = g.adjacency()
    return np.diag(adj.sum(axis=1)) - adj


def is_connected(g: CommGraph) -> bool:
    if g.node_count == 1:
        return True
    count, _ = connected_components(g.adjacency(), directed=False)
    return count == 1


def lifted_laplacian(L: np.ndarray, N: int) -> np.ndarray:
    if N < 1:
        raise GraphError("lift dimension must be at least 1, got {0}".format(N))
    return np.kron(L, np.eye(N))


def parse_edges(text: str):
    """
    parse "1 2, 2 3, 3 1" (1-based pairs) into 0-based tuples
    """
    result = []
    for chunk in text.replace(";", ",").split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split()
        if len(parts) != 2:
            raise GraphError('cannot parse edge "{0}"'.format(chunk))
        try:
            i, j = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphError('cannot parse edge "{0}"'.format(chunk))
        if i < 1 or j < 1:
            raise GraphError("edge ({0}, {1}): node indices start at 1".format(i, j))
        result.append((i - 1, j - 1))
    return result


def format_edges(g: CommGraph) -> str:
    return ", ".join("{0} {1}".format(i + 1, j + 1) for i, j in g.edges)
