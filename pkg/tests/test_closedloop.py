import numpy as np
import pytest

from conftest import make_random_agent, make_rotation_exo
from ddsync.closedloop import (
    SimState,
    Trajectory,
    metrics,
    random_state,
    recompute_errors,
    run,
    step,
    zero_state,
)
from ddsync.matops import spectral_radius
from ddsync.netgraph import NetworkGraph, build_partition
from ddsync.plant import Scenario
from ddsync.synthesis import synthesize


def scaled_state(st, factor):
    return SimState(
        t=st.t,
        x0=factor * st.x0,
        x=tuple(factor * x for x in st.x),
        z=tuple(factor * z for z in st.z),
    )


def add_states(a, b):
    return SimState(
        t=a.t,
        x0=a.x0 + b.x0,
        x=tuple(xa + xb for xa, xb in zip(a.x, b.x)),
        z=tuple(za + zb for za, zb in zip(a.z, b.z)),
    )


class TestStep:
    def test_zero_state_is_fixed_point(self, paper_scenario, paper_controllers):
        nxt = step(paper_scenario, paper_controllers, zero_state(paper_scenario))
        assert np.allclose(nxt.x0, 0.0)
        for x, z in zip(nxt.x, nxt.z):
            assert np.allclose(x, 0.0)
            assert np.allclose(z, 0.0)

    def test_synchronized_manifold_is_invariant(self, paper_scenario, paper_controllers):
        rng = np.random.default_rng(3)
        x0 = rng.standard_normal(2)
        init = SimState(
            t=0,
            x0=x0,
            x=tuple(paper_controllers.regulators[i].pi @ x0 for i in range(5)),
            z=tuple(x0.copy() for _ in range(5)),
        )
        tr = run(paper_scenario, paper_controllers, init, 100)
        m = metrics(tr, 100)
        assert max(m.e_tail) <= 1e-8
        assert max(m.delta_tail) <= 1e-12
        assert max(m.eps_tail) <= 1e-8

    def test_isolated_follower_estimate_is_autonomous(self, paper_scenario, paper_controllers):
        # zero in-edges: the blending term vanishes and z+ = S z exactly
        adj = np.zeros((5, 5))
        adj[2, 0] = 1.0  # keep some coupling elsewhere
        lonely = Scenario(
            exo=paper_scenario.exo,
            agents=paper_scenario.agents,
            graph=NetworkGraph(5, 2, adj),
        )
        rng = np.random.default_rng(0)
        st = random_state(lonely, rng)
        nxt = step(lonely, paper_controllers, st)
        for i in (3, 4):  # agents 4 and 5 have no in-edges here
            assert np.allclose(nxt.z[i], lonely.exo.s @ st.z[i])


class TestRun:
    def test_zero_init_stays_zero(self, paper_scenario, paper_controllers):
        tr = run(paper_scenario, paper_controllers, zero_state(paper_scenario), 50)
        for sig in (tr.y0,) + tr.e + tr.delta + tr.eps + tr.u + tr.y:
            assert np.allclose(sig, 0.0)

    def test_records_requested_length(self, paper_scenario, paper_controllers):
        tr = run(paper_scenario, paper_controllers, zero_state(paper_scenario), 1)
        assert len(tr) == 1
        assert tr.states[0].t == 0

    @pytest.mark.parametrize("seed", range(3))
    def test_superposition(self, seed, paper_scenario, paper_controllers):
        rng = np.random.default_rng(seed)
        v = random_state(paper_scenario, rng)
        w = random_state(paper_scenario, rng)
        al, be = rng.standard_normal(2)
        tr_v = run(paper_scenario, paper_controllers, v, 60)
        tr_w = run(paper_scenario, paper_controllers, w, 60)
        tr_mix = run(
            paper_scenario, paper_controllers, add_states(scaled_state(v, al), scaled_state(w, be)), 60
        )
        for i in range(5):
            assert np.max(np.abs(tr_mix.e[i] - al * tr_v.e[i] - be * tr_w.e[i])) <= 1e-9
            assert np.max(np.abs(tr_mix.delta[i] - al * tr_v.delta[i] - be * tr_w.delta[i])) <= 1e-9

    def test_leader_estimation_error_is_autonomous(self, paper_scenario, paper_controllers):
        rng = np.random.default_rng(5)
        init = random_state(paper_scenario, rng)
        tr = run(paper_scenario, paper_controllers, init, 40)
        loop = paper_scenario.exo.s + paper_controllers.observer_l @ paper_scenario.exo.r
        for i in range(2):
            delta0 = tr.delta[i][:, 0]
            power = np.eye(2)
            for t in range(40):
                assert np.max(np.abs(tr.delta[i][:, t] - power @ delta0)) <= 1e-9
                power = loop @ power

    def test_follower_estimation_error_matrix_power(self, paper_scenario, paper_controllers):
        rng = np.random.default_rng(6)
        init = random_state(paper_scenario, rng)
        tr = run(paper_scenario, paper_controllers, init, 40)
        part = build_partition(paper_scenario.graph)
        d_f = part.in_degrees[2:]
        coupling = part.l_ff / (1.0 + d_f)[:, None]
        hr = paper_controllers.observer_h @ paper_scenario.exo.r
        stacked = np.kron(np.eye(3), paper_scenario.exo.s) - np.kron(coupling, hr)
        delta_f = np.vstack([tr.delta[i] for i in range(2, 5)])
        power = np.eye(6)
        for t in range(40):
            assert np.max(np.abs(delta_f[:, t] - power @ delta_f[:, 0])) <= 1e-8
            power = stacked @ power

    def test_internal_stability_with_zero_reference(self, paper_scenario, paper_controllers):
        rng = np.random.default_rng(7)
        st = random_state(paper_scenario, rng)
        init = SimState(t=0, x0=np.zeros(2), x=st.x, z=st.z)
        tr = run(paper_scenario, paper_controllers, init, 2000)
        last = tr.states[-1]
        assert np.max(np.abs(np.concatenate(last.x + last.z))) <= 1e-8

    def test_leaders_only_decay_tracks_observer_radius(self, tol):
        rng = np.random.default_rng(8)
        exo = make_rotation_exo(np.random.default_rng(5))
        agents = tuple(make_random_agent(rng, "leader", p=1, n=2, m=2) for _ in range(2))
        scenario = Scenario(exo=exo, agents=agents, graph=NetworkGraph(2, 2, np.zeros((2, 2))))
        cs = synthesize(scenario, mode="model")
        init = random_state(scenario, np.random.default_rng(9))
        # short run so the decay phase extends past the 10% transient skip
        tr = run(scenario, cs, init, 100)
        m = metrics(tr, 20)
        radius = cs.margins["observer_l"]
        for rate in m.delta_decay:
            assert radius / 2.0 <= rate <= min(1.0, radius * 2.0)

    def test_rejects_nonpositive_steps(self, paper_scenario, paper_controllers):
        with pytest.raises(ValueError):
            run(paper_scenario, paper_controllers, zero_state(paper_scenario), 0)


class TestMetrics:
    def test_zero_trajectory(self, paper_scenario, paper_controllers):
        tr = run(paper_scenario, paper_controllers, zero_state(paper_scenario), 30)
        m = metrics(tr, 10)
        assert max(m.e_tail) == 0.0
        assert max(m.delta_tail) == 0.0
        assert all(np.isnan(r) for r in m.e_decay)  # no nonzero samples to fit

    def test_halving_signal_rate(self):
        steps = 60
        sig = 2.0 ** -np.arange(steps, dtype=float)
        zeros = np.zeros((1, steps))
        tr = Trajectory(
            states=tuple(SimState(t=t, x0=np.zeros(1), x=(np.zeros(1),), z=(np.zeros(1),))
                         for t in range(steps)),
            y0=zeros,
            u=(zeros,), y=(zeros,),
            e=(sig[None, :],), delta=(zeros,), eps=(zeros,),
        )
        m = metrics(tr, 10)
        assert m.e_decay[0] == pytest.approx(0.5, abs=0.05)
        assert m.e_tail[0] == pytest.approx(sig[-10:].max())

    def test_paper_run_converges(self, paper_scenario, paper_controllers):
        init = random_state(paper_scenario, np.random.default_rng(10))
        tr = run(paper_scenario, paper_controllers, init, 2000)
        m = metrics(tr, 100)
        assert max(m.e_tail) <= 1e-6
        for rate in m.e_decay:
            assert np.isnan(rate) or rate < 1.0

    def test_window_bounds(self, paper_scenario, paper_controllers):
        tr = run(paper_scenario, paper_controllers, zero_state(paper_scenario), 10)
        with pytest.raises(ValueError):
            metrics(tr, 11)


class TestStorageConsistency:
    def test_recorded_signals_match_states(self, paper_scenario, paper_controllers):
        init = random_state(paper_scenario, np.random.default_rng(11))
        tr = run(paper_scenario, paper_controllers, init, 50)
        assert recompute_errors(paper_scenario, paper_controllers, tr) <= 1e-12
