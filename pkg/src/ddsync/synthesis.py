"""Controller design: feedback gains, regulator solutions, observer gains.

Two routes produce the same kind of product.  The model route solves the
regulator equations

    leader:   A Pi + B Gamma + E R = Pi S,   C Pi + D Gamma + F R = R
    follower: A Pi + B Gamma       = Pi S,   C Pi + D Gamma       = R

and feeds each (A, B) to the Riccati design.  The data route never sees
the agent matrices: it works on the collected records, finding a matrix
M with

    leader:   Xf M = Xp M S,  Yp M = R,  Y0p M = R
    follower: Xf M = Xp M S,  Yp M = R

and setting Pi = Xp M, Gamma = Up M, while the feedback gain comes from
a Schur-achieving member of the constrained right-inverse family.  Both
routes also need the reference-observer gains: L with S + L R Schur for
the leaders' local observers, and H with S - lambda H R Schur at every
eigenvalue lambda of the follower coupling matrix.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .datagen import DataRecord
from .errors import DesignFailed, Infeasible, NotInformative, NotStabilizable
from .informativity import (
    InformativityReport,
    build_follower_stab_data,
    build_leader_stab_data,
)
from .matops import (
    DEFAULT_TOL,
    is_schur,
    pbh_stabilizable,
    solve_linear_ls,
    spectral_radius,
    stabilizing_feedback,
)
from .netgraph import FollowerCoupling, build_partition, check_lemma1, follower_coupling
from .plant import AgentModel, ExoSystem, Scenario, validate_scenario

__all__ = [
    "RegulatorSolution",
    "ControllerSet",
    "design_k_leader",
    "design_k_follower",
    "solve_regulator_leader_dd",
    "solve_regulator_follower_dd",
    "solve_regulator_model",
    "design_observer_l",
    "design_observer_h",
    "assess_record",
    "synthesize",
]


@dataclass(frozen=True)
class RegulatorSolution:
    """Regulator pair (Pi, Gamma); ``m`` is the data-mode certificate matrix."""

    m: np.ndarray | None
    pi: np.ndarray
    gamma: np.ndarray
    residual: float


@dataclass(frozen=True)
class ControllerSet:
    """Everything the closed loop needs, with certified spectral radii.

    ``margins`` maps certificate names to spectral radii: "observer_l"
    for S + L R, "observer_h" for the worst S - lambda H R, and one dict
    per agent under "agents" with the closed-loop radii (the data-mode
    certificate from the records plus the post-hoc radius against the
    true model, or the single model-mode radius).
    """

    mode: str
    gains: tuple
    regulators: tuple
    observer_l: np.ndarray
    observer_h: np.ndarray
    margins: dict


def _vec(m):
    """Column-major vectorization, matching kron(B.T, A) vec(X) = vec(A X B)."""
    return np.asarray(m).reshape(-1, order="F")


def _design_k(sd, up, tol):
    """Feedback gain via a Schur-achieving constrained right inverse.

    The Riccati design on (G, F) supplies the free parameter; the
    returned right inverse is verified before use.
    """
    theta = stabilizing_feedback(sd.g, sd.f, tol)
    t_hor = sd.horizon
    xps = sd.psi_pinv @ sd.selector + (np.eye(t_hor) - sd.psi_pinv @ sd.psi) @ theta

    closed = sd.psi[: sd.n, :] @ xps  # Xp (Xp)^# should be I
    ident_err = float(np.max(np.abs(closed - np.eye(sd.n))))
    scale = 1.0 + float(np.max(np.abs(sd.psi)))
    if ident_err > tol.residual_abs * scale:
        raise NotStabilizable(
            f"right inverse failed verification: |Xp (Xp)^# - I| = {ident_err:.3g}"
        )
    if sd.psi.shape[0] > sd.n:
        annihilation = float(np.max(np.abs(sd.psi[sd.n :, :] @ xps)))
        if annihilation > tol.residual_abs * scale:
            raise NotStabilizable(
                f"right inverse failed verification: |Y0p (Xp)^#| = {annihilation:.3g}"
            )
    data_loop = sd.g + sd.f @ theta  # equals Xf (Xp)^#
    if not is_schur(data_loop, tol):
        raise NotStabilizable(
            f"data closed loop not Schur (radius {spectral_radius(data_loop):.6g})"
        )
    return up @ xps, spectral_radius(data_loop)


def design_k_leader(r: DataRecord, tol=DEFAULT_TOL):
    """Gain K = Up (Xp)^# for a leader record; returns (K, certified radius)."""
    sd = build_leader_stab_data(r, tol)
    if not sd.rank_ok:
        raise NotInformative(
            f"agent {r.agent_index}: rank(Psi) = {sd.rank_psi} != "
            f"{sd.n} + {sd.rank_y0}",
            agent_index=r.agent_index,
            condition="ia",
        )
    if not pbh_stabilizable(sd.g, sd.f, tol):
        raise NotInformative(
            f"agent {r.agent_index}: (G, F) not stabilizable",
            agent_index=r.agent_index,
            condition="ib",
        )
    try:
        return _design_k(sd, r.up, tol)
    except NotStabilizable as exc:
        exc.agent_index = r.agent_index
        exc.condition = exc.condition or "ib"
        raise


def design_k_follower(r: DataRecord, tol=DEFAULT_TOL):
    """Gain K = Up (Xp)^# for a follower record; returns (K, certified radius)."""
    sd = build_follower_stab_data(r, tol)
    if not sd.rank_ok:
        raise NotInformative(
            f"agent {r.agent_index}: Xp not of full row rank "
            f"(rank {sd.rank_psi} < {sd.n})",
            agent_index=r.agent_index,
            condition="iia",
        )
    if not pbh_stabilizable(sd.g, sd.f, tol):
        raise NotInformative(
            f"agent {r.agent_index}: (Xf Xp^+, Xf (I - Xp^+ Xp)) not stabilizable",
            agent_index=r.agent_index,
            condition="iib",
        )
    try:
        return _design_k(sd, r.up, tol)
    except NotStabilizable as exc:
        exc.agent_index = r.agent_index
        exc.condition = exc.condition or "iib"
        raise


def _solve_regulator_dd(r, exo, with_reference_row, tol):
    n0 = exo.n0
    eye0 = np.eye(n0)
    blocks = [np.kron(eye0, r.xf) - np.kron(exo.s.T, r.xp), np.kron(eye0, r.yp)]
    rhs = [np.zeros(r.n * n0), _vec(exo.r)]
    if with_reference_row:
        blocks.append(np.kron(eye0, r.y0p))
        rhs.append(_vec(exo.r))
    coeff = np.vstack(blocks)
    target = np.concatenate(rhs)[:, None]
    vec_m, residual = solve_linear_ls(coeff, target, tol)
    m = vec_m.reshape(r.horizon, n0, order="F")
    return RegulatorSolution(
        m=m, pi=r.xp @ m, gamma=r.up @ m, residual=residual
    )


def solve_regulator_leader_dd(r: DataRecord, exo: ExoSystem, tol=DEFAULT_TOL):
    """Minimal-norm M with Xf M = Xp M S, Yp M = R, Y0p M = R.

    Raises Infeasible when no exact solution exists; the residual is on
    the exception as ``residual``.
    """
    if r.role != "leader":
        raise ValueError(f"agent {r.agent_index} is not a leader")
    sol = _solve_regulator_dd(r, exo, True, tol)
    if sol.residual > tol.residual_abs:
        exc = Infeasible(
            f"agent {r.agent_index}: regulator data equations unsolvable "
            f"(residual {sol.residual:.3g})",
            agent_index=r.agent_index,
            condition="ic",
        )
        exc.residual = sol.residual
        raise exc
    return sol


def solve_regulator_follower_dd(r: DataRecord, exo: ExoSystem, tol=DEFAULT_TOL):
    """Minimal-norm M with Xf M = Xp M S and Yp M = R."""
    if r.role != "follower":
        raise ValueError(f"agent {r.agent_index} is not a follower")
    sol = _solve_regulator_dd(r, exo, False, tol)
    if sol.residual > tol.residual_abs:
        exc = Infeasible(
            f"agent {r.agent_index}: regulator data equations unsolvable "
            f"(residual {sol.residual:.3g})",
            agent_index=r.agent_index,
            condition="iic",
        )
        exc.residual = sol.residual
        raise exc
    return sol


def solve_regulator_model(agent: AgentModel, exo: ExoSystem, tol=DEFAULT_TOL):
    """Minimal-norm (Pi, Gamma) solving the model regulator equations."""
    n0 = exo.n0
    n, m_in = agent.n, agent.m
    eye0 = np.eye(n0)
    row_state = np.hstack(
        [np.kron(eye0, agent.a) - np.kron(exo.s.T, np.eye(n)), np.kron(eye0, agent.b)]
    )
    row_out = np.hstack([np.kron(eye0, agent.c), np.kron(eye0, agent.d)])
    if agent.is_leader:
        rhs_state = -_vec(agent.e @ exo.r)
        rhs_out = _vec(exo.r - agent.f @ exo.r)
    else:
        rhs_state = np.zeros(n * n0)
        rhs_out = _vec(exo.r)
    coeff = np.vstack([row_state, row_out])
    target = np.concatenate([rhs_state, rhs_out])[:, None]
    z, residual = solve_linear_ls(coeff, target, tol)
    pi = z[: n * n0].reshape(n, n0, order="F")
    gamma = z[n * n0 :].reshape(m_in, n0, order="F")
    if residual > tol.residual_abs:
        exc = Infeasible(
            f"model regulator equations unsolvable (residual {residual:.3g})",
            condition="ii" if agent.is_leader else "iii",
        )
        exc.residual = residual
        raise exc
    return RegulatorSolution(m=None, pi=pi, gamma=gamma, residual=residual)


def design_observer_l(exo: ExoSystem, tol=DEFAULT_TOL):
    """Gain L with S + L R Schur, via the Riccati design on the dual pair."""
    try:
        k = stabilizing_feedback(exo.s.T, exo.r.T, tol)
    except NotStabilizable as exc:
        raise NotStabilizable(
            "reference observer design failed; (R, S) is likely unobservable"
        ) from exc
    l_gain = k.T
    return l_gain, spectral_radius(exo.s + l_gain @ exo.r)


def _coupling_worst_radius(exo, eigenvalues, h):
    hr = h @ exo.r
    return max(
        float(np.max(np.abs(np.linalg.eigvals(exo.s - lam * hr))))
        for lam in eigenvalues
    )


def design_observer_h(exo: ExoSystem, coupling: FollowerCoupling, tol=DEFAULT_TOL):
    """Gain H with S - lambda H R Schur at every coupling eigenvalue.

    Minimizes the worst-case spectral radius over H by Nelder-Mead from
    32 deterministic pseudo-random starts (scaled by the norm of S); a
    rank-one parametrization is tried as a fallback search space.  The
    returned H is always re-verified eigenvalue by eigenvalue.
    """
    if not check_lemma1(coupling, tol):
        eigs = np.array2string(coupling.spectrum.eigenvalues, precision=6)
        raise DesignFailed(
            "follower coupling spectrum violates the spectral-disc "
            f"precondition: {eigs}"
        )
    lams = coupling.spectrum.eigenvalues
    n0, p = exo.n0, exo.p
    target = 1.0 - tol.schur_margin
    rng = np.random.default_rng(0)
    scale = max(1.0, float(np.linalg.norm(exo.s, 2)))

    def accept(h):
        radii = [
            float(np.max(np.abs(np.linalg.eigvals(exo.s - lam * h @ exo.r))))
            for lam in lams
        ]
        worst = max(radii)
        return (h, worst) if worst < target else None

    def full_obj(flat):
        return _coupling_worst_radius(exo, lams, flat.reshape(n0, p))

    def rank_one_obj(flat):
        return _coupling_worst_radius(exo, lams, np.outer(flat[:n0], flat[n0:]))

    searches = [
        (full_obj, n0 * p, lambda flat: flat.reshape(n0, p)),
        (rank_one_obj, n0 + p, lambda flat: np.outer(flat[:n0], flat[n0:])),
    ]
    for obj, dim, unpack in searches:
        for _ in range(32):
            start = scale * rng.standard_normal(dim)
            res = minimize(
                obj,
                start,
                method="Nelder-Mead",
                options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 600 * dim},
            )
            if res.fun < target:
                verified = accept(unpack(res.x))
                if verified is not None:
                    return verified
    raise DesignFailed(
        "no verified coupling observer gain found within the search budget"
    )


def assess_record(r: DataRecord, exo: ExoSystem, tol=DEFAULT_TOL):
    """Full per-agent informativity verdict, including the regulator solve."""
    if r.role == "leader":
        sd = build_leader_stab_data(r, tol)
        solver = solve_regulator_leader_dd
    else:
        sd = build_follower_stab_data(r, tol)
        solver = solve_regulator_follower_dd
    rank_ok = sd.rank_ok
    stab_ok = pbh_stabilizable(sd.g, sd.f, tol)
    sv = np.linalg.svd(sd.psi, compute_uv=False)
    kept = int(np.count_nonzero(sv > tol.rank_rel * sv[0])) if sv[0] > 0 else 0
    gap = sv[kept - 1] / sv[kept] if 0 < kept < sv.size and sv[kept] > 0 else np.inf
    try:
        sol = solver(r, exo, tol)
        regulator_ok, residual = True, sol.residual
    except Infeasible as exc:
        regulator_ok, residual = False, exc.residual
    details = (
        f"rank(data stack) = {sd.rank_psi}, need {sd.n} + {sd.rank_y0}; "
        f"singular-value gap at cutoff {gap:.3g}; "
        f"stabilizable pair: {'yes' if stab_ok else 'no'}; "
        f"regulator residual {residual:.3g}"
    )
    return InformativityReport(
        agent_index=r.agent_index,
        role=r.role,
        rank_ok=rank_ok,
        stab_ok=stab_ok,
        regulator_ok=regulator_ok,
        residual=residual,
        details=details,
    )


def _check_records(s, records):
    if records is None or len(records) != s.n_agents:
        raise ValueError(
            f"data mode needs one record per agent ({s.n_agents}), got "
            f"{0 if records is None else len(records)}"
        )
    for idx, (agent, rec) in enumerate(zip(s.agents, records), start=1):
        if rec.agent_index != idx:
            raise ValueError(f"record {idx} carries agent_index {rec.agent_index}")
        if rec.role != agent.role:
            raise ValueError(f"record {idx} role {rec.role!r} != {agent.role!r}")
        if rec.n != agent.n or rec.m != agent.m or rec.p != agent.p:
            raise ValueError(
                f"record {idx} dimensions ({rec.n},{rec.m},{rec.p}) do not "
                f"match the scenario ({agent.n},{agent.m},{agent.p})"
            )


def synthesize(s: Scenario, records=None, mode="data", tol=DEFAULT_TOL):
    """Design all gains, regulators and observers for a scenario.

    In data mode the agent matrices of ``s`` are used only to verify the
    finished gains, never to design them.  Raises the specific design
    error (NotInformative / NotStabilizable / Infeasible / DesignFailed)
    with the 1-based agent index and failed condition code attached.
    """
    if mode not in ("data", "model"):
        raise ValueError(f"mode must be 'data' or 'model', got {mode!r}")
    violations = validate_scenario(s, tol)
    if violations:
        raise ValueError("scenario invalid: " + "; ".join(violations))

    l_gain, l_radius = design_observer_l(s.exo, tol)
    if s.graph.n_followers >= 1:
        coupling = follower_coupling(build_partition(s.graph))
        h_gain, h_radius = design_observer_h(s.exo, coupling, tol)
    else:
        h_gain, h_radius = np.zeros((s.exo.n0, s.exo.p)), 0.0

    gains, regulators, agent_margins = [], [], []
    for idx, agent in enumerate(s.agents, start=1):
        if mode == "data":
            if idx == 1:
                _check_records(s, records)
            rec = records[idx - 1]
            if agent.is_leader:
                k, data_radius = design_k_leader(rec, tol)
                reg = solve_regulator_leader_dd(rec, s.exo, tol)
            else:
                k, data_radius = design_k_follower(rec, tol)
                reg = solve_regulator_follower_dd(rec, s.exo, tol)
            true_radius = spectral_radius(agent.a + agent.b @ k)
            margin = {"data_closed_loop": data_radius, "true_closed_loop": true_radius}
        else:
            try:
                k = stabilizing_feedback(agent.a, agent.b, tol)
            except NotStabilizable as exc:
                raise NotStabilizable(
                    f"agent {idx}: (A, B) not stabilizable",
                    agent_index=idx,
                    condition="i",
                ) from exc
            try:
                reg = solve_regulator_model(agent, s.exo, tol)
            except Infeasible as exc:
                exc.agent_index = idx
                raise
            margin = {"closed_loop": spectral_radius(agent.a + agent.b @ k)}
        for name, value in margin.items():
            if value > 1.0 - tol.schur_margin:
                raise DesignFailed(
                    f"agent {idx}: certified margin {name} = {value:.6g} "
                    "is not inside the unit circle",
                    agent_index=idx,
                )
        gains.append(k)
        regulators.append(reg)
        agent_margins.append(margin)

    return ControllerSet(
        mode=mode,
        gains=tuple(gains),
        regulators=tuple(regulators),
        observer_l=l_gain,
        observer_h=h_gain,
        margins={
            "observer_l": l_radius,
            "observer_h": h_radius,
            "agents": agent_margins,
        },
    )
