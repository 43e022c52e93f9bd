"""Command-line front end.

Pipeline: validate -> collect -> check -> synthesize -> simulate -> report.
Exit codes: 0 success, 1 domain failure (a named solvability condition or
assumption fails), 2 unreadable or malformed input.
"""

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .closedloop import decay_rate, random_state, run
from .datagen import ExcitationConfig, collect, default_horizon
from .errors import SynthesisError
from .fileio import (
    FileFormatError,
    load_controllers,
    load_records,
    load_scenario,
    read_trajectory_csv,
    save_controllers,
    save_records,
    write_trajectory_csv,
)
from .matops import Tolerances
from .plant import validate_scenario
from .synthesis import assess_record, synthesize

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_INPUT = 2


@dataclass(frozen=True)
class RunConfig:
    """Bundled run parameters echoed into output files."""

    seed: int = 0
    horizon: int | None = None
    steps: int = 2000
    tail_window: int = 100
    mode: str = "data"
    init_scale: float = 1.0
    input_scale: float = 1.0
    state_scale: float = 1.0
    threshold: float = 1e-6


def _tolerances(args) -> Tolerances:
    kwargs = {}
    if getattr(args, "tol_rank", None) is not None:
        kwargs["rank_rel"] = args.tol_rank
    if getattr(args, "tol_schur", None) is not None:
        kwargs["schur_margin"] = args.tol_schur
    if getattr(args, "tol_residual", None) is not None:
        kwargs["residual_abs"] = args.tol_residual
    return Tolerances(**kwargs)


def _load_scenario_or_exit(path):
    try:
        return load_scenario(path)
    except (FileFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return None


def cmd_validate(args) -> int:
    scenario = _load_scenario_or_exit(args.scenario)
    if scenario is None:
        return EXIT_INPUT
    tol = _tolerances(args)
    violations = validate_scenario(scenario, tol)
    categories = [
        ("assumption 1 (simple unit-circle generator eigenvalues)", "assumption 1"),
        ("assumption 2 (observable generator)", "assumption 2"),
        ("assumption 3 (spanning tree rooted at node 0)", "assumption 3"),
        ("structure", "structure"),
    ]
    for title, prefix in categories:
        hits = [v for v in violations if v.startswith(prefix)]
        if hits:
            print(f"{title}: FAIL")
            for v in hits:
                print(f"  - {v}")
        else:
            print(f"{title}: OK")
    return EXIT_OK if not violations else EXIT_DOMAIN


def cmd_collect(args) -> int:
    scenario = _load_scenario_or_exit(args.scenario)
    if scenario is None:
        return EXIT_INPUT
    violations = validate_scenario(scenario)
    if violations:
        for v in violations:
            print(f"validation: {v}", file=sys.stderr)
        return EXIT_DOMAIN
    cfg = RunConfig(
        seed=args.seed,
        horizon=args.horizon,
        input_scale=args.input_scale,
        state_scale=args.state_scale,
    )
    records = collect(
        scenario,
        ExcitationConfig(
            seed=cfg.seed,
            horizon=cfg.horizon,
            input_scale=cfg.input_scale,
            state_scale=cfg.state_scale,
        ),
    )
    horizon = records[0].horizon if records else default_horizon(scenario)
    save_records(args.out, records, seed=cfg.seed, horizon=horizon)
    print(f"collected T={horizon} seed={cfg.seed} agents={len(records)} -> {args.out}")
    return EXIT_OK


def _load_check_inputs(args):
    scenario = _load_scenario_or_exit(args.scenario)
    if scenario is None:
        return None
    try:
        records, seed, horizon = load_records(args.data)
    except (FileFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return None
    if len(records) != scenario.n_agents:
        print(
            f"error: data file has {len(records)} records for "
            f"{scenario.n_agents} agents",
            file=sys.stderr,
        )
        return None
    for agent, rec in zip(scenario.agents, records):
        if rec.n != agent.n or rec.m != agent.m or rec.p != agent.p:
            print(
                f"error: record {rec.agent_index} dimensions do not match the scenario",
                file=sys.stderr,
            )
            return None
    return scenario, records


def cmd_check(args) -> int:
    loaded = _load_check_inputs(args)
    if loaded is None:
        return EXIT_INPUT
    scenario, records = loaded
    tol = _tolerances(args)
    reports = [assess_record(r, scenario.exo, tol) for r in records]

    print(f"{'agent':>5}  {'role':<8}  {'rank':<10}  {'stab':<10}  {'regulator':<10}  residual")
    failed = []
    for rep in reports:
        codes = ("ia", "ib", "ic") if rep.role == "leader" else ("iia", "iib", "iic")
        cells = []
        for code, ok in zip(codes, (rep.rank_ok, rep.stab_ok, rep.regulator_ok)):
            cells.append(f"{code}:{'pass' if ok else 'FAIL'}")
            if not ok:
                failed.append((rep.agent_index, code))
        print(
            f"{rep.agent_index:>5}  {rep.role:<8}  {cells[0]:<10}  {cells[1]:<10}  "
            f"{cells[2]:<10}  {rep.residual:.3e}"
        )
    if args.out:
        import json

        doc = [
            {
                "agent_index": rep.agent_index,
                "role": rep.role,
                "rank_ok": rep.rank_ok,
                "stab_ok": rep.stab_ok,
                "regulator_ok": rep.regulator_ok,
                "residual": rep.residual,
                "details": rep.details,
            }
            for rep in reports
        ]
        from .fileio import atomic_write_text

        atomic_write_text(args.out, json.dumps(doc, indent=2) + "\n")
        print(f"report -> {args.out}")
    if failed:
        for agent, code in failed:
            print(f"condition {code} failed for agent {agent}")
        return EXIT_DOMAIN
    return EXIT_OK


def cmd_synthesize(args) -> int:
    scenario = _load_scenario_or_exit(args.scenario)
    if scenario is None:
        return EXIT_INPUT
    tol = _tolerances(args)
    violations = validate_scenario(scenario, tol)
    if violations:
        for v in violations:
            print(f"validation: {v}", file=sys.stderr)
        return EXIT_DOMAIN

    records = None
    if args.mode == "data":
        if not args.data:
            print("error: data mode requires a data file", file=sys.stderr)
            return EXIT_INPUT
        try:
            records, _, _ = load_records(args.data)
        except (FileFormatError, OSError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INPUT
    try:
        controllers = synthesize(scenario, records=records, mode=args.mode, tol=tol)
    except SynthesisError as exc:
        where = f" (agent {exc.agent_index})" if exc.agent_index else ""
        cond = f" [condition {exc.condition}]" if exc.condition else ""
        print(f"synthesis failed{where}{cond}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    save_controllers(args.out, controllers, tol)
    print(f"mode={controllers.mode} observer radii: "
          f"L {controllers.margins['observer_l']:.4f}, "
          f"H {controllers.margins['observer_h']:.4f}")
    for i, margin in enumerate(controllers.margins["agents"], start=1):
        pretty = ", ".join(f"{k} {v:.4f}" for k, v in margin.items())
        print(f"agent {i}: {pretty}")
    print(f"controllers -> {args.out}")
    return EXIT_OK


def _check_controller_consistency(scenario, controllers):
    n0, p = scenario.exo.n0, scenario.exo.p
    if len(controllers.gains) != scenario.n_agents:
        raise FileFormatError(
            f"controllers cover {len(controllers.gains)} agents, scenario has "
            f"{scenario.n_agents}"
        )
    if controllers.observer_l.shape != (n0, p):
        raise FileFormatError("observer_L shape does not match the generator")
    if controllers.observer_h.shape != (n0, p):
        raise FileFormatError("observer_H shape does not match the generator")
    for i, (agent, k, reg) in enumerate(
        zip(scenario.agents, controllers.gains, controllers.regulators), start=1
    ):
        if k.shape != (agent.m, agent.n):
            raise FileFormatError(f"agent {i}: K shape {k.shape} != ({agent.m},{agent.n})")
        if reg.pi.shape != (agent.n, n0):
            raise FileFormatError(f"agent {i}: Pi shape {reg.pi.shape} != ({agent.n},{n0})")
        if reg.gamma.shape != (agent.m, n0):
            raise FileFormatError(
                f"agent {i}: Gamma shape {reg.gamma.shape} != ({agent.m},{n0})"
            )


def cmd_simulate(args) -> int:
    scenario = _load_scenario_or_exit(args.scenario)
    if scenario is None:
        return EXIT_INPUT
    try:
        controllers = load_controllers(args.controllers)
        _check_controller_consistency(scenario, controllers)
    except (FileFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    cfg = RunConfig(seed=args.seed, steps=args.steps, init_scale=args.init_scale)
    rng = np.random.default_rng(cfg.seed)
    init = random_state(scenario, rng, scale=cfg.init_scale)
    trajectory = run(scenario, controllers, init, cfg.steps)
    write_trajectory_csv(args.out, trajectory)
    print(f"simulated {cfg.steps} steps seed={cfg.seed} -> {args.out}")
    return EXIT_OK


def cmd_report(args) -> int:
    try:
        table = read_trajectory_csv(args.trajectory)
    except (FileFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    cfg = RunConfig(tail_window=args.tail_window, threshold=args.threshold)
    steps = table.t.shape[0]
    if steps < 1 or cfg.tail_window < 1 or cfg.tail_window > steps:
        print(
            f"error: tail window {cfg.tail_window} incompatible with "
            f"{steps} recorded steps",
            file=sys.stderr,
        )
        return EXIT_INPUT
    skip = steps // 10
    print(f"{'agent':>5}  {'e tail':>12}  {'e decay':>8}  {'delta tail':>12}  {'eps tail':>12}")
    all_ok = True
    for agent in table.agents:
        e_norms = table.e_norms(agent)
        e_tail = float(np.max(e_norms[steps - cfg.tail_window :]))
        rate = decay_rate(e_norms, skip)
        delta_tail = float(np.max(table.delta[agent][steps - cfg.tail_window :])) \
            if agent in table.delta else float("nan")
        eps_tail = float(np.max(table.eps[agent][steps - cfg.tail_window :])) \
            if agent in table.eps else float("nan")
        ok = e_tail <= cfg.threshold
        all_ok = all_ok and ok
        print(
            f"{agent:>5}  {e_tail:>12.3e}  {rate:>8.4f}  {delta_tail:>12.3e}  "
            f"{eps_tail:>12.3e}  {'' if ok else '<- above threshold'}"
        )
    if not args.no_figures:
        from .plots import render_error_figures

        csv_path = Path(args.trajectory)
        out_dir = Path(args.figures) if args.figures else csv_path.parent
        for path in render_error_figures(table, out_dir, stem=csv_path.stem):
            print(f"figure -> {path}")
    if not all_ok:
        print(f"tracking-error tail above threshold {cfg.threshold:g}")
        return EXIT_DOMAIN
    return EXIT_OK


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="ddsync",
        description=(
            "Design and simulate distributed output-synchronization "
            "controllers for networks of discrete-time LTI agents."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    tol_parent = argparse.ArgumentParser(add_help=False)
    tol_parent.add_argument("--tol-rank", type=float, default=None,
                            help="relative singular-value cutoff for rank tests")
    tol_parent.add_argument("--tol-schur", type=float, default=None,
                            help="required spectral-radius gap below 1")
    tol_parent.add_argument("--tol-residual", type=float, default=None,
                            help="max residual accepted on exact linear solves")

    p = sub.add_parser("validate", parents=[tol_parent],
                       help="check scenario assumptions and structure")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("collect", help="run the seeded offline experiment")
    p.add_argument("scenario")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--horizon", type=int, default=None,
                   help="data horizon T (default: widest agent + 2)")
    p.add_argument("--input-scale", type=float, default=1.0)
    p.add_argument("--state-scale", type=float, default=1.0)
    p.add_argument("--out", default="data.json")
    p.set_defaults(func=cmd_collect)

    p = sub.add_parser("check", parents=[tol_parent],
                       help="per-agent informativity verdicts on collected data")
    p.add_argument("scenario")
    p.add_argument("data")
    p.add_argument("--out", default=None, help="optional JSON report path")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("synthesize", parents=[tol_parent],
                       help="design gains, regulators and observers")
    p.add_argument("scenario")
    p.add_argument("data", nargs="?", default=None)
    p.add_argument("--mode", choices=("data", "model"), default="data")
    p.add_argument("--out", default="controllers.json")
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("simulate", help="closed-loop simulation to CSV")
    p.add_argument("scenario")
    p.add_argument("controllers")
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--init-scale", type=float, default=1.0,
                   help="std dev of the Gaussian initial conditions (0 = zero init)")
    p.add_argument("--out", default="trajectory.csv")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("report", help="tail norms, decay estimates and figures")
    p.add_argument("trajectory")
    p.add_argument("--tail-window", type=int, default=100)
    p.add_argument("--threshold", type=float, default=1e-6)
    p.add_argument("--figures", default=None,
                   help="directory for rendered figures (default: next to the CSV)")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
