"""Communication graphs, Metropolis mixing weights and spectral diagnostics.

The mixing matrix W is symmetric doubly stochastic with a positive diagonal
(every agent is its own neighbor). Its mixing rate rho is the squared
second-largest eigenvalue magnitude; gossip contracts disagreement by
sqrt(rho) per round, which `verify_fact1` checks numerically on powers of W.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InvariantFailure

TOPOLOGY_KINDS = ("full", "ring", "bipartite")


@dataclass(frozen=True)
class Graph:
    """Undirected graph on n nodes; self-loops are implicit, not stored."""

    n: int
    edges: frozenset  # of (i, j) pairs with i < j

    def neighbors(self, i: int) -> list[int]:
        """Sorted neighbor list including i itself."""
        out = {i}
        for a, b in self.edges:
            if a == i:
                out.add(b)
            elif b == i:
                out.add(a)
        return sorted(out)

    def degree(self, i: int) -> int:
        """Neighbor count excluding the self-loop."""
        return len(self.neighbors(i)) - 1

    def is_connected(self) -> bool:
        seen = {0}
        frontier = [0]
        adj = {k: set() for k in range(self.n)}
        for a, b in self.edges:
            adj[a].add(b)
            adj[b].add(a)
        while frontier:
            cur = frontier.pop()
            for nxt in adj[cur]:
                if nxt not in seen:
                    seen.add(nxt)
                    frontier.append(nxt)
        return len(seen) == self.n


@dataclass(frozen=True)
class MixingMatrix:
    w: np.ndarray
    omega_min: float
    rho: float
    graph: Graph = field(repr=False)

    @property
    def n(self) -> int:
        return self.graph.n

    def neighbors(self, i: int) -> list[int]:
        return self.graph.neighbors(i)

    @property
    def num_edges(self) -> int:
        """Edges excluding self-loops (message-accounting base)."""
        return len(self.graph.edges)


def build_topology(kind: str, n: int) -> Graph:
    """Complete, cycle, or complete-bipartite graph on n nodes."""
    if kind not in TOPOLOGY_KINDS:
        raise ConfigError(f"topology kind {kind!r} not one of {TOPOLOGY_KINDS}")
    if kind == "ring" and n < 3:
        raise ConfigError("ring topology needs n >= 3")
    if n < 2:
        raise ConfigError("topology needs n >= 2")
    edges = set()
    if kind == "full":
        edges = {(i, j) for i in range(n) for j in range(i + 1, n)}
    elif kind == "ring":
        edges = {(i, (i + 1) % n) for i in range(n)}
        edges = {(min(a, b), max(a, b)) for a, b in edges}
    else:  # bipartite: parts {0..ceil(n/2)-1} and the rest, complete across
        cut = (n + 1) // 2
        edges = {(i, j) for i in range(cut) for j in range(cut, n)}
    return Graph(n=n, edges=frozenset(edges))


def metropolis_weights(g: Graph) -> MixingMatrix:
    """Metropolis-Hastings weights; uniform 1/N on the complete graph.

    Cross weights 1/(1 + max degree) keep W symmetric doubly stochastic with
    a positive diagonal for any connected graph.
    """
    if not g.is_connected():
        raise ConfigError("graph is disconnected")
    n = g.n
    if len(g.edges) == n * (n - 1) // 2:
        w = np.full((n, n), 1.0 / n)
    else:
        w = np.zeros((n, n))
        for i, j in g.edges:
            val = 1.0 / (1.0 + max(g.degree(i), g.degree(j)))
            w[i, j] = val
            w[j, i] = val
        for i in range(n):
            w[i, i] = 1.0 - (w[i].sum() - w[i, i])
    omega_min = min(w[i, j] for i in range(n) for j in g.neighbors(i))
    rho = spectral_rho(w)
    return MixingMatrix(w=w, omega_min=float(omega_min), rho=rho, graph=g)


def jacobi_eigenvalues(mat: np.ndarray, max_sweeps: int = 60) -> np.ndarray:
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending."""
    a = np.array(mat, dtype=np.float64, copy=True)
    n = a.shape[0]
    if n == 1:
        return np.diag(a).copy()
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(a, -1) ** 2))
        if off < 1e-15 * max(1.0, np.abs(np.diag(a)).max()):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) < 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot_p = c * a[:, p] - s * a[:, q]
                rot_q = s * a[:, p] + c * a[:, q]
                a[:, p], a[:, q] = rot_p, rot_q
                rot_p = c * a[p, :] - s * a[q, :]
                rot_q = s * a[p, :] + c * a[q, :]
                a[p, :], a[q, :] = rot_p, rot_q
                a[p, q] = a[q, p] = 0.0
    return np.sort(np.diag(a))


def spectral_norm_sym(mat: np.ndarray) -> float:
    """Spectral norm of a (numerically) symmetric matrix."""
    sym = 0.5 * (mat + mat.T)
    vals = jacobi_eigenvalues(sym)
    return float(np.abs(vals).max())


def spectral_rho(w: np.ndarray) -> float:
    """Squared second-largest eigenvalue magnitude of W.

    The principal eigenvalue 1 is removed by deflating with Q = ones/N before
    the eigendecomposition.
    """
    w = np.asarray(w, dtype=np.float64)
    n = w.shape[0]
    if not np.array_equal(w, w.T):
        raise ValueError("mixing matrix must be symmetric")
    deflated = w - np.full((n, n), 1.0 / n)
    vals = jacobi_eigenvalues(deflated)
    rho = float(np.abs(vals).max() ** 2)
    if rho >= 1.0 - 1e-12:
        raise InvariantFailure(f"graph not mixing: rho = {rho}")
    return rho


def verify_fact1(w: np.ndarray, t_max: int) -> dict:
    """Check spectral decay of disagreement under powers of W.

    Asserts ||(I - Q) W^t|| <= sqrt(rho)^t + 1e-9 for t = 1..t_max and returns
    the per-step norms plus the worst slack (norm minus bound).
    """
    w = np.asarray(w, dtype=np.float64)
    n = w.shape[0]
    rho = spectral_rho(w)
    contraction = np.sqrt(rho)
    proj = np.eye(n) - np.full((n, n), 1.0 / n)
    power = np.eye(n)
    norms, slacks = [], []
    for t in range(1, t_max + 1):
        power = power @ w
        norm = spectral_norm_sym(proj @ power)
        bound = contraction**t
        norms.append(norm)
        slacks.append(norm - bound)
        if norm > bound + 1e-9:
            raise InvariantFailure(
                f"mixing decay violated at t={t}: norm {norm} > sqrt(rho)^t {bound}"
            )
    return {"rho": rho, "norms": norms, "max_slack": max(slacks)}


def write_matrix(path, w: np.ndarray) -> None:
    """Plain-text dump, one row per line, space-separated doubles."""
    with open(path, "w") as fh:
        for row in np.asarray(w):
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")
