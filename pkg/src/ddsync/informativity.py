"""Informativity checks on collected data and the right-inverse family.

For a leader record the stacked matrix Psi = [Xp; Y0p] plays the role Xp
plays for followers.  Writing sel = [I_n; 0], the pair

    G = Xf Psi^+ sel,        F = Xf (I - Psi^+ Psi)

decides everything: the data admit a common Schur-stabilizing feedback
iff rank(Psi) = n + rank(Y0p) and (G, F) is stabilizable, and every
constrained right inverse of Xp is Psi^+ sel + (I - Psi^+ Psi) Q sel for
a free parameter Q.  Follower records use Psi = Xp (no Y0p block).
"""

from dataclasses import dataclass

import numpy as np

from .datagen import DataRecord
from .matops import DEFAULT_TOL, as_matrix, mat_rank, pbh_stabilizable, pinv

__all__ = [
    "StabilizationData",
    "ThetaParam",
    "InformativityReport",
    "build_leader_stab_data",
    "build_follower_stab_data",
    "leader_informative",
    "follower_informative",
    "right_inverse_from_theta",
]


@dataclass(frozen=True)
class StabilizationData:
    """Stacked data matrix, its pseudoinverse, and the derived (G, F) pair.

    ``n`` is the agent state dimension; ``psi`` has n + k rows where k is
    the number of reference-output rows (0 for followers).
    """

    n: int
    psi: np.ndarray
    psi_pinv: np.ndarray
    g: np.ndarray
    f: np.ndarray
    rank_psi: int
    rank_y0: int

    @property
    def horizon(self):
        return self.psi.shape[1]

    @property
    def selector(self):
        """[I_n; 0] with as many rows as psi."""
        sel = np.zeros((self.psi.shape[0], self.n))
        sel[: self.n, : self.n] = np.eye(self.n)
        return sel

    @property
    def rank_ok(self):
        """rank(psi) equals n plus the rank of the reference block."""
        return self.rank_psi == self.n + self.rank_y0


@dataclass(frozen=True)
class ThetaParam:
    """Free parameter of the right-inverse family, shape (T, n + k)."""

    q: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q", as_matrix(self.q, "q"))


@dataclass(frozen=True)
class InformativityReport:
    """Per-agent verdicts on the three data-driven solvability conditions."""

    agent_index: int
    role: str
    rank_ok: bool
    stab_ok: bool
    regulator_ok: bool
    residual: float
    details: str

    @property
    def ok(self):
        return self.rank_ok and self.stab_ok and self.regulator_ok


def _stab_data(xp, xf, y0p, tol):
    n = xp.shape[0]
    psi = xp if y0p is None else np.vstack([xp, y0p])
    psi_pinv = pinv(psi, tol)
    sel = np.zeros((psi.shape[0], n))
    sel[:n, :n] = np.eye(n)
    g = xf @ psi_pinv @ sel
    f = xf @ (np.eye(psi.shape[1]) - psi_pinv @ psi)
    return StabilizationData(
        n=n,
        psi=psi,
        psi_pinv=psi_pinv,
        g=g,
        f=f,
        rank_psi=mat_rank(psi, tol),
        rank_y0=0 if y0p is None else mat_rank(y0p, tol),
    )


def build_leader_stab_data(r: DataRecord, tol=DEFAULT_TOL) -> StabilizationData:
    """Stabilization data for a leader record: psi = [Xp; Y0p]."""
    if r.role != "leader":
        raise ValueError(f"agent {r.agent_index} is not a leader")
    return _stab_data(r.xp, r.xf, r.y0p, tol)


def build_follower_stab_data(r: DataRecord, tol=DEFAULT_TOL) -> StabilizationData:
    """Stabilization data for a follower record: psi = Xp."""
    if r.role != "follower":
        raise ValueError(f"agent {r.agent_index} is not a follower")
    return _stab_data(r.xp, r.xf, None, tol)


def leader_informative(r: DataRecord, tol=DEFAULT_TOL) -> bool:
    """True iff the leader data admit a common Schur-stabilizing feedback.

    Checks rank(Psi) = n + rank(Y0p) and stabilizability of (G, F); the
    latter is exactly the existence of a constrained right inverse of Xp
    making Xf (Xp)^# Schur while annihilating Y0p.
    """
    sd = build_leader_stab_data(r, tol)
    return sd.rank_ok and pbh_stabilizable(sd.g, sd.f, tol)


def follower_informative(r: DataRecord, tol=DEFAULT_TOL) -> bool:
    """True iff Xp has full row rank and (Xf Xp^+, Xf (I - Xp^+ Xp)) is stabilizable."""
    sd = build_follower_stab_data(r, tol)
    return sd.rank_ok and pbh_stabilizable(sd.g, sd.f, tol)


def right_inverse_from_theta(sd: StabilizationData, theta: ThetaParam) -> np.ndarray:
    """Constrained right inverse of Xp selected by the free parameter.

    Returns (Psi^+ + (I - Psi^+ Psi) Q) sel, which satisfies
    Psi (Xp)^# = sel exactly when rank(Psi) = n + rank(Y0p); every
    constrained right inverse arises this way for some Q.
    """
    if not sd.rank_ok:
        raise ValueError(
            f"rank(psi) = {sd.rank_psi} != {sd.n} + {sd.rank_y0}: the "
            "parametrized family is not a set of constrained right inverses"
        )
    q = theta.q
    t_hor = sd.horizon
    if q.shape != (t_hor, sd.psi.shape[0]):
        raise ValueError(
            f"theta must have shape ({t_hor}, {sd.psi.shape[0]}), got {q.shape}"
        )
    return (sd.psi_pinv + (np.eye(t_hor) - sd.psi_pinv @ sd.psi) @ q) @ sd.selector
