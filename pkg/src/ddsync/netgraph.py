"""Directed weighted network of agents plus the reference node 0.

Agents 1..N_l are leaders and receive a unit-weight edge from node 0 (the
reference generator); the remaining agents are followers.  ``adjacency``
follows the convention ``adjacency[i, j] > 0`` iff there is an edge from
agent j+1 to agent i+1, so in-degrees are row sums.
"""

from dataclasses import dataclass, field

import numpy as np

from .matops import DEFAULT_TOL, Spectrum, as_matrix, spectrum

__all__ = [
    "NetworkGraph",
    "LaplacianPartition",
    "FollowerCoupling",
    "build_partition",
    "extended_laplacian",
    "has_rooted_spanning_tree",
    "follower_coupling",
    "check_lemma1",
]


@dataclass(frozen=True)
class NetworkGraph:
    """Weighted digraph over the N agents, leaders listed first."""

    n_agents: int
    n_leaders: int
    adjacency: np.ndarray

    def __post_init__(self):
        adj = as_matrix(self.adjacency, "adjacency")
        object.__setattr__(self, "adjacency", adj)
        n = self.n_agents
        if adj.shape != (n, n):
            raise ValueError(f"adjacency must be {n}x{n}, got {adj.shape}")
        if not (1 <= self.n_leaders <= n):
            raise ValueError("need 1 <= n_leaders <= n_agents")
        if np.any(adj < 0.0):
            raise ValueError("adjacency weights must be nonnegative")
        if np.any(np.diag(adj) != 0.0):
            raise ValueError("adjacency diagonal must be zero (no self-loops)")

    @property
    def n_followers(self):
        return self.n_agents - self.n_leaders

    @property
    def in_degrees(self):
        return self.adjacency.sum(axis=1)


@dataclass(frozen=True)
class LaplacianPartition:
    """Blocks of the agent-graph Laplacian diag(d) - A, split at n_leaders.

    ``in_degrees`` are taken over the agent graph only; the unit edges
    from node 0 enter through :func:`extended_laplacian`, not through the
    stored blocks.
    """

    n_leaders: int
    in_degrees: np.ndarray
    l_ll: np.ndarray
    l_lf: np.ndarray
    l_fl: np.ndarray
    l_ff: np.ndarray


@dataclass(frozen=True)
class FollowerCoupling:
    """The follower coupling matrix (I + D_f)^-1 L_ff and its spectrum."""

    matrix: np.ndarray
    spectrum: Spectrum = field(repr=False)


def build_partition(g: NetworkGraph) -> LaplacianPartition:
    """Laplacian of the agent graph, partitioned into leader/follower blocks."""
    d = g.in_degrees
    lap = np.diag(d) - g.adjacency
    nl = g.n_leaders
    return LaplacianPartition(
        n_leaders=nl,
        in_degrees=d,
        l_ll=lap[:nl, :nl],
        l_lf=lap[:nl, nl:],
        l_fl=lap[nl:, :nl],
        l_ff=lap[nl:, nl:],
    )


def extended_laplacian(p: LaplacianPartition) -> np.ndarray:
    """Laplacian of the extended graph including node 0.

    Node 0 feeds each leader with unit weight, which adds 1 to every
    leader's diagonal entry and a -1 column against node 0.  Row sums of
    the result are zero.
    """
    nl = p.n_leaders
    nf = p.l_ff.shape[0]
    n = nl + nf
    full = np.zeros((n + 1, n + 1))
    full[1 : nl + 1, 0] = -1.0
    full[1 : nl + 1, 1 : nl + 1] = p.l_ll + np.eye(nl)
    full[1 : nl + 1, nl + 1 :] = p.l_lf
    full[nl + 1 :, 1 : nl + 1] = p.l_fl
    full[nl + 1 :, nl + 1 :] = p.l_ff
    return full


def has_rooted_spanning_tree(g: NetworkGraph) -> bool:
    """True iff every agent is reachable from node 0 in the extended graph.

    Node 0 reaches the leaders directly; breadth-first search then settles
    reachability, which is equivalent to the existence of a spanning tree
    rooted at node 0.
    """
    reached = np.zeros(g.n_agents, dtype=bool)
    frontier = list(range(g.n_leaders))
    reached[: g.n_leaders] = True
    while frontier:
        j = frontier.pop()
        for i in np.nonzero(g.adjacency[:, j] > 0.0)[0]:
            if not reached[i]:
                reached[i] = True
                frontier.append(int(i))
    return bool(np.all(reached))


def follower_coupling(p: LaplacianPartition) -> FollowerCoupling:
    """(I + D_f)^-1 L_ff with its spectrum, D_f the follower in-degrees."""
    nf = p.l_ff.shape[0]
    if nf < 1:
        raise ValueError("no followers in this partition")
    d_f = p.in_degrees[p.n_leaders :]
    matrix = p.l_ff / (1.0 + d_f)[:, None]
    return FollowerCoupling(matrix=matrix, spectrum=spectrum(matrix))


def check_lemma1(c: FollowerCoupling, tol=DEFAULT_TOL) -> bool:
    """Spectral-disc check on the follower coupling matrix.

    Every eigenvalue must be nonzero (modulus above rank_rel) and lie in
    the open disc of radius 1 around 1, tested with schur_margin slack.
    Both hold whenever the extended graph has a spanning tree rooted at
    node 0.
    """
    for lam in c.spectrum.eigenvalues:
        if abs(lam) <= tol.rank_rel:
            return False
        if abs(lam - 1.0) >= 1.0 - tol.schur_margin:
            return False
    return True
