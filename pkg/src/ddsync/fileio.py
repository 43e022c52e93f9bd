"""Persistence: JSON for scenarios / data / controllers, CSV for trajectories.

All writes are atomic (write to a temp file in the same directory, then
rename).  Matrices serialize as row-major nested lists; floats keep full
round-trip precision.
"""

import csv
import json
import os
import re
import tempfile
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .datagen import DataRecord
from .matops import Tolerances
from .netgraph import NetworkGraph
from .plant import AgentModel, ExoSystem, Scenario
from .synthesis import ControllerSet, RegulatorSolution

__all__ = [
    "FileFormatError",
    "TrajectoryTable",
    "scenario_to_dict",
    "scenario_from_dict",
    "save_scenario",
    "load_scenario",
    "save_records",
    "load_records",
    "save_controllers",
    "load_controllers",
    "write_trajectory_csv",
    "read_trajectory_csv",
    "paper_example_path",
    "load_paper_example",
    "atomic_write_text",
]


class FileFormatError(ValueError):
    """Unparseable or structurally malformed input file."""


def atomic_write_text(path, text):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name + ".")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _matrix(obj, name):
    if not isinstance(obj, list) or not obj or not all(isinstance(r, list) for r in obj):
        raise FileFormatError(f"{name} must be a non-empty list of rows")
    width = len(obj[0])
    if width == 0 or any(len(r) != width for r in obj):
        raise FileFormatError(f"{name} has ragged or empty rows")
    try:
        m = np.array(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise FileFormatError(f"{name} contains non-numeric entries") from exc
    if not np.all(np.isfinite(m)):
        raise FileFormatError(f"{name} contains non-finite entries")
    return m


def _rows(m):
    return [[float(v) for v in row] for row in np.asarray(m)]


def scenario_to_dict(s: Scenario) -> dict:
    agents = []
    for a in s.agents:
        entry = {
            "role": a.role,
            "A": _rows(a.a),
            "B": _rows(a.b),
            "C": _rows(a.c),
            "D": _rows(a.d),
        }
        if a.e is not None:
            entry["E"] = _rows(a.e)
        if a.f is not None:
            entry["F"] = _rows(a.f)
        agents.append(entry)
    return {
        "exosystem": {"S": _rows(s.exo.s), "R": _rows(s.exo.r)},
        "agents": agents,
        "graph": {
            "n_leaders": s.graph.n_leaders,
            "adjacency": _rows(s.graph.adjacency),
        },
    }


def scenario_from_dict(doc: dict) -> Scenario:
    try:
        exo_doc = doc["exosystem"]
        agents_doc = doc["agents"]
        graph_doc = doc["graph"]
        exo = ExoSystem(s=_matrix(exo_doc["S"], "S"), r=_matrix(exo_doc["R"], "R"))
        agents = []
        for i, entry in enumerate(agents_doc, start=1):
            role = entry["role"]
            kwargs = {}
            if "E" in entry:
                kwargs["e"] = _matrix(entry["E"], f"agent {i} E")
            if "F" in entry:
                kwargs["f"] = _matrix(entry["F"], f"agent {i} F")
            agents.append(
                AgentModel(
                    role=role,
                    a=_matrix(entry["A"], f"agent {i} A"),
                    b=_matrix(entry["B"], f"agent {i} B"),
                    c=_matrix(entry["C"], f"agent {i} C"),
                    d=_matrix(entry["D"], f"agent {i} D"),
                    **kwargs,
                )
            )
        graph = NetworkGraph(
            n_agents=len(agents),
            n_leaders=int(graph_doc["n_leaders"]),
            adjacency=_matrix(graph_doc["adjacency"], "adjacency"),
        )
        return Scenario(exo=exo, agents=tuple(agents), graph=graph)
    except FileFormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise FileFormatError(f"malformed scenario: {exc}") from exc


def save_scenario(path, s: Scenario):
    atomic_write_text(path, json.dumps(scenario_to_dict(s), indent=2) + "\n")


def _load_json(path):
    try:
        with open(path) as handle:
            return json.load(handle)
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"{path}: invalid JSON: {exc}") from exc


def load_scenario(path) -> Scenario:
    return scenario_from_dict(_load_json(path))


def save_records(path, records, seed, horizon):
    doc = {
        "seed": seed,
        "horizon": horizon,
        "records": [
            {
                "agent_index": r.agent_index,
                "role": r.role,
                "Y0p": _rows(r.y0p),
                "Up": _rows(r.up),
                "Xp": _rows(r.xp),
                "Xf": _rows(r.xf),
                "Yp": _rows(r.yp),
            }
            for r in records
        ],
    }
    atomic_write_text(path, json.dumps(doc, indent=2) + "\n")


def load_records(path):
    doc = _load_json(path)
    try:
        horizon = int(doc["horizon"])
        records = []
        for entry in doc["records"]:
            records.append(
                DataRecord(
                    agent_index=int(entry["agent_index"]),
                    role=entry["role"],
                    horizon=horizon,
                    y0p=_matrix(entry["Y0p"], "Y0p"),
                    up=_matrix(entry["Up"], "Up"),
                    xp=_matrix(entry["Xp"], "Xp"),
                    xf=_matrix(entry["Xf"], "Xf"),
                    yp=_matrix(entry["Yp"], "Yp"),
                )
            )
        return records, int(doc.get("seed", 0)), horizon
    except FileFormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise FileFormatError(f"malformed data file: {exc}") from exc


def save_controllers(path, c: ControllerSet, tol: Tolerances):
    agents = []
    for i, (k, reg) in enumerate(zip(c.gains, c.regulators), start=1):
        entry = {
            "agent_index": i,
            "K": _rows(k),
            "Pi": _rows(reg.pi),
            "Gamma": _rows(reg.gamma),
            "regulator_residual": reg.residual,
        }
        if reg.m is not None:
            entry["M"] = _rows(reg.m)
        agents.append(entry)
    doc = {
        "mode": c.mode,
        "tolerances": asdict(tol),
        "observer_L": _rows(c.observer_l),
        "observer_H": _rows(c.observer_h),
        "margins": c.margins,
        "agents": agents,
    }
    atomic_write_text(path, json.dumps(doc, indent=2) + "\n")


def load_controllers(path) -> ControllerSet:
    doc = _load_json(path)
    try:
        gains, regulators = [], []
        for entry in doc["agents"]:
            gains.append(_matrix(entry["K"], "K"))
            regulators.append(
                RegulatorSolution(
                    m=_matrix(entry["M"], "M") if "M" in entry else None,
                    pi=_matrix(entry["Pi"], "Pi"),
                    gamma=_matrix(entry["Gamma"], "Gamma"),
                    residual=float(entry["regulator_residual"]),
                )
            )
        return ControllerSet(
            mode=doc["mode"],
            gains=tuple(gains),
            regulators=tuple(regulators),
            observer_l=_matrix(doc["observer_L"], "observer_L"),
            observer_h=_matrix(doc["observer_H"], "observer_H"),
            margins=doc["margins"],
        )
    except FileFormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise FileFormatError(f"malformed controllers file: {exc}") from exc


def write_trajectory_csv(path, tr):
    """One row per time point: t, then per agent the tracking-error
    components followed by the max norms of delta and eps."""
    header = ["t"]
    n_agents = len(tr.e)
    for i in range(1, n_agents + 1):
        header.extend(f"e{i}_{k}" for k in range(1, tr.e[i - 1].shape[0] + 1))
        header.append(f"delta{i}")
        header.append(f"eps{i}")
    lines = [",".join(header)]
    steps = len(tr)
    for t in range(steps):
        row = [str(t)]
        for i in range(n_agents):
            row.extend(f"{v:.12e}" for v in tr.e[i][:, t])
            row.append(f"{np.max(np.abs(tr.delta[i][:, t])):.12e}")
            row.append(f"{np.max(np.abs(tr.eps[i][:, t])):.12e}")
        lines.append(",".join(row))
    atomic_write_text(path, "\n".join(lines) + "\n")


@dataclass(frozen=True)
class TrajectoryTable:
    """Parsed trajectory CSV: tracking-error components plus norm columns."""

    t: np.ndarray
    e: dict
    delta: dict
    eps: dict

    @property
    def agents(self):
        return sorted(self.e)

    def e_norms(self, agent):
        return np.max(np.abs(self.e[agent]), axis=0)


_E_COL = re.compile(r"^e(\d+)_(\d+)$")
_DELTA_COL = re.compile(r"^delta(\d+)$")
_EPS_COL = re.compile(r"^eps(\d+)$")


def read_trajectory_csv(path) -> TrajectoryTable:
    try:
        with open(path, newline="") as handle:
            reader = csv.reader(handle)
            header = next(reader, None)
            if not header or header[0] != "t":
                raise FileFormatError(f"{path}: missing trajectory header")
            rows = [[float(v) for v in row] for row in reader if row]
    except (OSError, ValueError) as exc:
        if isinstance(exc, FileFormatError):
            raise
        raise FileFormatError(f"{path}: malformed trajectory CSV: {exc}") from exc
    data = np.array(rows, dtype=float) if rows else np.empty((0, len(header)))
    if rows and data.shape[1] != len(header):
        raise FileFormatError(f"{path}: row width does not match header")

    e_cols, delta_cols, eps_cols = {}, {}, {}
    for idx, name in enumerate(header[1:], start=1):
        m = _E_COL.match(name)
        if m:
            e_cols.setdefault(int(m.group(1)), []).append((int(m.group(2)), idx))
            continue
        m = _DELTA_COL.match(name)
        if m:
            delta_cols[int(m.group(1))] = idx
            continue
        m = _EPS_COL.match(name)
        if m:
            eps_cols[int(m.group(1))] = idx
            continue
        raise FileFormatError(f"{path}: unrecognized column {name!r}")
    if not e_cols:
        raise FileFormatError(f"{path}: no tracking-error columns found")

    e = {
        agent: data[:, [idx for _, idx in sorted(cols)]].T
        for agent, cols in e_cols.items()
    }
    delta = {agent: data[:, idx] for agent, idx in delta_cols.items()}
    eps = {agent: data[:, idx] for agent, idx in eps_cols.items()}
    return TrajectoryTable(t=data[:, 0] if rows else np.empty(0), e=e, delta=delta, eps=eps)


def paper_example_path() -> Path:
    """Location of the bundled five-agent example scenario."""
    return Path(resources.files("ddsync").joinpath("data/paper_example.json"))


def load_paper_example() -> Scenario:
    return load_scenario(paper_example_path())
