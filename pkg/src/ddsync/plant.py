"""Reference generator and agent state-space models.

The reference generator (exosystem) is ``x0+ = S x0``, ``y0 = R x0``.
Leaders are driven by y0 through E and F; followers are not:

    leader:   x+ = A x + B u + E y0,   y = C x + D u + F y0
    follower: x+ = A x + B u,          y = C x + D u

Two standing requirements on the generator: all eigenvalues of S simple
and on the unit circle, and (R, S) observable.
"""

from dataclasses import dataclass

import numpy as np

from .matops import DEFAULT_TOL, as_matrix, mat_rank
from .netgraph import NetworkGraph, has_rooted_spanning_tree

__all__ = [
    "UNIT_CIRCLE_TOL",
    "SIMPLE_EIG_TOL",
    "ExoSystem",
    "AgentModel",
    "Scenario",
    "validate_exosystem",
    "validate_scenario",
    "step_exo",
    "step_agent",
]

# Fixed criteria for the generator assumptions; the example matrices the
# package ships are exact rotations, so 1e-6 leaves ample slack.
UNIT_CIRCLE_TOL = 1e-6
SIMPLE_EIG_TOL = 1e-6


@dataclass(frozen=True)
class ExoSystem:
    """Autonomous reference generator (S, R)."""

    s: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        s = as_matrix(self.s, "S")
        r = as_matrix(self.r, "R")
        if s.shape[0] != s.shape[1]:
            raise ValueError(f"S must be square, got {s.shape}")
        if r.shape[1] != s.shape[0]:
            raise ValueError(f"R must have {s.shape[0]} columns, got {r.shape[1]}")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "r", r)

    @property
    def n0(self):
        return self.s.shape[0]

    @property
    def p(self):
        return self.r.shape[0]


@dataclass(frozen=True)
class AgentModel:
    """One agent's state-space model; E and F belong to leaders only.

    Dimension consistency is enforced at construction.  Whether E/F
    presence matches the role is reported by :func:`validate_scenario`
    rather than raised, so that malformed scenario files can be
    diagnosed instead of rejected wholesale.
    """

    role: str
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    e: np.ndarray | None = None
    f: np.ndarray | None = None

    def __post_init__(self):
        if self.role not in ("leader", "follower"):
            raise ValueError(f"role must be 'leader' or 'follower', got {self.role!r}")
        a = as_matrix(self.a, "A")
        b = as_matrix(self.b, "B")
        c = as_matrix(self.c, "C")
        d = as_matrix(self.d, "D")
        if a.shape[0] != a.shape[1]:
            raise ValueError(f"A must be square, got {a.shape}")
        n = a.shape[0]
        if b.shape[0] != n:
            raise ValueError(f"B must have {n} rows, got {b.shape[0]}")
        m = b.shape[1]
        if c.shape[1] != n:
            raise ValueError(f"C must have {n} columns, got {c.shape[1]}")
        p = c.shape[0]
        if d.shape != (p, m):
            raise ValueError(f"D must be {p}x{m}, got {d.shape}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "d", d)
        if self.e is not None:
            e = as_matrix(self.e, "E")
            if e.shape != (n, p):
                raise ValueError(f"E must be {n}x{p}, got {e.shape}")
            object.__setattr__(self, "e", e)
        if self.f is not None:
            f = as_matrix(self.f, "F")
            if f.shape != (p, p):
                raise ValueError(f"F must be {p}x{p}, got {f.shape}")
            object.__setattr__(self, "f", f)

    @property
    def n(self):
        return self.a.shape[0]

    @property
    def m(self):
        return self.b.shape[1]

    @property
    def p(self):
        return self.c.shape[0]

    @property
    def is_leader(self):
        return self.role == "leader"


@dataclass(frozen=True)
class Scenario:
    """Full problem instance: generator, agents (leaders first), network."""

    exo: ExoSystem
    agents: tuple
    graph: NetworkGraph

    def __post_init__(self):
        object.__setattr__(self, "agents", tuple(self.agents))

    @property
    def n_agents(self):
        return len(self.agents)

    @property
    def leaders(self):
        return self.agents[: self.graph.n_leaders]

    @property
    def followers(self):
        return self.agents[self.graph.n_leaders :]


def validate_exosystem(exo: ExoSystem, tol=DEFAULT_TOL):
    """Check the two generator assumptions, returning violation strings.

    Empty list means: all eigenvalues of S are simple and on the unit
    circle, and (R, S) is observable.
    """
    violations = []
    ev = np.linalg.eigvals(exo.s)
    for lam in ev:
        if abs(abs(lam) - 1.0) > UNIT_CIRCLE_TOL:
            violations.append(
                f"assumption 1: eigenvalue {lam:.6g} of S has modulus "
                f"{abs(lam):.8g}, off the unit circle"
            )
    for i in range(len(ev)):
        for j in range(i + 1, len(ev)):
            if abs(ev[i] - ev[j]) <= SIMPLE_EIG_TOL:
                violations.append(
                    f"assumption 1: repeated eigenvalue {ev[i]:.6g} of S"
                )
    obs = np.vstack([exo.r @ np.linalg.matrix_power(exo.s, k) for k in range(exo.n0)])
    obs_rank = mat_rank(obs, tol)
    if obs_rank < exo.n0:
        violations.append(
            f"assumption 2: (R, S) not observable (rank {obs_rank} < {exo.n0})"
        )
    return violations


def validate_scenario(s: Scenario, tol=DEFAULT_TOL):
    """Structural checks plus the three standing assumptions.

    Returns a list of violation strings; empty means the scenario is a
    well-posed problem instance.
    """
    violations = list(validate_exosystem(s.exo, tol))

    if s.n_agents != s.graph.n_agents:
        violations.append(
            f"structure: {s.n_agents} agents but graph declares {s.graph.n_agents}"
        )
    n_lead = sum(1 for a in s.agents if a.is_leader)
    if n_lead != s.graph.n_leaders:
        violations.append(
            f"structure: {n_lead} leader models but graph declares {s.graph.n_leaders}"
        )
    for idx, agent in enumerate(s.agents, start=1):
        expected = "leader" if idx <= s.graph.n_leaders else "follower"
        if agent.role != expected:
            violations.append(
                f"structure: agent {idx} has role {agent.role!r}, expected "
                f"{expected!r} (leaders must come first)"
            )
        if agent.p != s.exo.p:
            violations.append(
                f"structure: agent {idx} output dimension {agent.p} != {s.exo.p}"
            )
        if agent.is_leader:
            if agent.e is None or agent.f is None:
                violations.append(f"structure: leader {idx} is missing E or F")
        else:
            if agent.e is not None or agent.f is not None:
                violations.append(f"structure: follower {idx} must not carry E or F")

    if not has_rooted_spanning_tree(s.graph):
        violations.append(
            "assumption 3: extended graph has no spanning tree rooted at node 0"
        )
    return violations


def step_exo(exo: ExoSystem, x0):
    """One generator step: returns (S x0, R x0)."""
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.shape[0] != exo.n0:
        raise ValueError(f"x0 must have length {exo.n0}, got {x0.shape[0]}")
    return exo.s @ x0, exo.r @ x0


def step_agent(agent: AgentModel, x, u, y0=None):
    """One agent step: returns (next state, output).

    ``y0`` is required for leaders and ignored for followers.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    u = np.asarray(u, dtype=float).reshape(-1)
    if x.shape[0] != agent.n:
        raise ValueError(f"state must have length {agent.n}, got {x.shape[0]}")
    if u.shape[0] != agent.m:
        raise ValueError(f"input must have length {agent.m}, got {u.shape[0]}")
    if agent.is_leader:
        if y0 is None:
            raise ValueError("leader step requires the generator output y0")
        y0 = np.asarray(y0, dtype=float).reshape(-1)
        if y0.shape[0] != agent.p:
            raise ValueError(f"y0 must have length {agent.p}, got {y0.shape[0]}")
        x_next = agent.a @ x + agent.b @ u + agent.e @ y0
        y = agent.c @ x + agent.d @ u + agent.f @ y0
    else:
        x_next = agent.a @ x + agent.b @ u
        y = agent.c @ x + agent.d @ u
    return x_next, y
