import numpy as np
import pytest

from ddsync.datagen import ExcitationConfig, collect
from ddsync.fileio import load_paper_example
from ddsync.matops import Tolerances
from ddsync.netgraph import NetworkGraph
from ddsync.plant import AgentModel, ExoSystem, Scenario
from ddsync.synthesis import synthesize


@pytest.fixture(scope="session")
def tol():
    return Tolerances()


@pytest.fixture(scope="session")
def paper_scenario():
    return load_paper_example()


@pytest.fixture(scope="session")
def paper_records(paper_scenario):
    return collect(paper_scenario, ExcitationConfig(seed=42, horizon=6))


@pytest.fixture(scope="session")
def paper_controllers(paper_scenario, paper_records):
    return synthesize(paper_scenario, records=paper_records, mode="data")


def make_rotation_exo(rng, n_pairs=1):
    """Block-diagonal planar rotations with distinct angles: simple
    unit-circle eigenvalues by construction."""
    angles = rng.uniform(0.15, 1.4, size=n_pairs) + np.arange(n_pairs) * 1.4
    blocks = []
    for th in angles:
        c, s = np.cos(th), np.sin(th)
        blocks.append(np.array([[c, s], [-s, c]]))
    n0 = 2 * n_pairs
    s_mat = np.zeros((n0, n0))
    for i, b in enumerate(blocks):
        s_mat[2 * i : 2 * i + 2, 2 * i : 2 * i + 2] = b
    r = rng.standard_normal((1, n0))
    return ExoSystem(s=s_mat, r=r)


def make_rooted_graph(rng, n_agents, n_leaders, extra_edges=2, weighted=False):
    """Random digraph whose extended graph has a spanning tree rooted at 0:
    every follower gets a parent among the already-reachable agents."""
    adj = np.zeros((n_agents, n_agents))
    reachable = list(range(n_leaders))
    for i in range(n_leaders, n_agents):
        parent = int(rng.choice(reachable))
        adj[i, parent] = rng.uniform(0.5, 2.0) if weighted else 1.0
        reachable.append(i)
    for _ in range(extra_edges):
        i, j = rng.integers(0, n_agents, size=2)
        if i != j:
            adj[i, j] = rng.uniform(0.5, 2.0) if weighted else 1.0
    return NetworkGraph(n_agents=n_agents, n_leaders=n_leaders, adjacency=adj)


def make_random_agent(rng, role, p, n=None, m=None):
    """Random agent with m >= p inputs so the regulator equations are
    generically solvable."""
    n = n if n is not None else int(rng.integers(1, 5))
    m = m if m is not None else int(rng.integers(p, p + 3))
    kwargs = {}
    if role == "leader":
        kwargs["e"] = rng.standard_normal((n, p))
        kwargs["f"] = rng.standard_normal((p, p))
    return AgentModel(
        role=role,
        a=rng.standard_normal((n, n)),
        b=rng.standard_normal((n, m)),
        c=rng.standard_normal((p, n)),
        d=rng.standard_normal((p, m)),
        **kwargs,
    )


def make_random_scenario(rng, max_agents=6, p=1):
    n_agents = int(rng.integers(2, max_agents + 1))
    n_leaders = int(rng.integers(1, n_agents))
    exo = make_rotation_exo(rng)
    agents = tuple(
        make_random_agent(rng, "leader" if i < n_leaders else "follower", p)
        for i in range(n_agents)
    )
    graph = make_rooted_graph(rng, n_agents, n_leaders)
    return Scenario(exo=exo, agents=agents, graph=graph)


@pytest.fixture(scope="session")
def scenario_factory():
    return make_random_scenario
