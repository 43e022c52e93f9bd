"""Offline experiment harness producing per-agent data matrices.

One seeded run simulates the true plants over a horizon T under Gaussian
excitation and assembles, per agent, the matrices

    Y0p (p x T)   reference outputs y0(0..T-1), shared by all agents
    Up  (m x T)   inputs u(0..T-1)
    Xp  (n x T)   states x(0..T-1)
    Xf  (n x T)   shifted states x(1..T)
    Yp  (p x T)   outputs y(0..T-1)

which is everything the data-driven design consumes.
"""

from dataclasses import dataclass

import numpy as np

from .matops import DEFAULT_TOL
from .plant import Scenario, step_agent, step_exo, validate_scenario

__all__ = [
    "ExcitationConfig",
    "DataRecord",
    "default_horizon",
    "collect",
    "verify_consistency",
]


@dataclass(frozen=True)
class ExcitationConfig:
    """Seeded excitation for one collection run.

    ``input_scale`` and ``state_scale`` are the standard deviations of
    the agent inputs and agent initial states.  The generator's initial
    state is always standard normal so the reference signal does not
    vanish when the agent excitation is scaled down.  ``horizon=None``
    uses :func:`default_horizon`.
    """

    seed: int
    horizon: int | None = None
    input_scale: float = 1.0
    state_scale: float = 1.0

    def __post_init__(self):
        if self.horizon is not None and self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if self.input_scale <= 0.0 or self.state_scale <= 0.0:
            raise ValueError("excitation scales must be strictly positive")


@dataclass(frozen=True)
class DataRecord:
    """Per-agent data matrices from one collection run (agent_index is 1-based)."""

    agent_index: int
    role: str
    horizon: int
    y0p: np.ndarray
    up: np.ndarray
    xp: np.ndarray
    xf: np.ndarray
    yp: np.ndarray

    def __post_init__(self):
        t = self.horizon
        for name in ("y0p", "up", "xp", "xf", "yp"):
            m = np.asarray(getattr(self, name), dtype=float)
            if m.ndim != 2 or m.shape[1] != t:
                raise ValueError(f"{name} must have {t} columns, got shape {m.shape}")
            object.__setattr__(self, name, m)
        if self.xp.shape[0] != self.xf.shape[0]:
            raise ValueError("xp and xf must have the same number of rows")

    @property
    def n(self):
        return self.xp.shape[0]

    @property
    def m(self):
        return self.up.shape[0]

    @property
    def p(self):
        return self.yp.shape[0]


def default_horizon(s: Scenario) -> int:
    """max_i(n_i + m_i + p) + 2: enough columns for the generic rank tests."""
    return max(a.n + a.m + a.p for a in s.agents) + 2


def collect(s: Scenario, cfg: ExcitationConfig):
    """Run one seeded offline experiment and return a DataRecord per agent.

    A single generator rollout is shared by all agents; each agent gets an
    independent random initial state and input sequence.  Deterministic
    for a fixed seed.
    """
    violations = validate_scenario(s)
    if violations:
        raise ValueError("scenario invalid: " + "; ".join(violations))
    t_hor = cfg.horizon if cfg.horizon is not None else default_horizon(s)
    rng = np.random.default_rng(cfg.seed)

    x0 = rng.standard_normal(s.exo.n0)
    y0_seq = np.empty((s.exo.p, t_hor))
    for t in range(t_hor):
        x0_next, y0 = step_exo(s.exo, x0)
        y0_seq[:, t] = y0
        x0 = x0_next

    records = []
    for idx, agent in enumerate(s.agents, start=1):
        x = cfg.state_scale * rng.standard_normal(agent.n)
        u_seq = cfg.input_scale * rng.standard_normal((agent.m, t_hor))
        xp = np.empty((agent.n, t_hor))
        xf = np.empty((agent.n, t_hor))
        yp = np.empty((agent.p, t_hor))
        for t in range(t_hor):
            xp[:, t] = x
            x, y = step_agent(agent, x, u_seq[:, t], y0_seq[:, t])
            xf[:, t] = x
            yp[:, t] = y
        records.append(
            DataRecord(
                agent_index=idx,
                role=agent.role,
                horizon=t_hor,
                y0p=y0_seq.copy(),
                up=u_seq,
                xp=xp,
                xf=xf,
                yp=yp,
            )
        )
    return records


def verify_consistency(s: Scenario, r: DataRecord, tol=DEFAULT_TOL) -> bool:
    """True iff the record is exact data from the scenario's own model.

    Stacks the record into the one-shot identity
    [Xf; Yp] = [[A, B, E], [C, D, F]] [Xp; Up; Y0p] (leaders; followers
    drop the E/F/Y0p blocks) and accepts residuals up to residual_abs.
    """
    agent = s.agents[r.agent_index - 1]
    if agent.n != r.n or agent.m != r.m or agent.p != r.p:
        raise ValueError(
            f"record dimensions ({r.n},{r.m},{r.p}) do not match agent "
            f"{r.agent_index} ({agent.n},{agent.m},{agent.p})"
        )
    if agent.is_leader:
        system = np.block([[agent.a, agent.b, agent.e], [agent.c, agent.d, agent.f]])
        data = np.vstack([r.xp, r.up, r.y0p])
    else:
        system = np.block([[agent.a, agent.b], [agent.c, agent.d]])
        data = np.vstack([r.xp, r.up])
    predicted = system @ data
    actual = np.vstack([r.xf, r.yp])
    return float(np.max(np.abs(predicted - actual))) <= tol.residual_abs
