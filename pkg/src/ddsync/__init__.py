"""Distributed output synchronization for discrete-time LTI multi-agent
systems: model-based and data-driven controller design, informativity
checks, and closed-loop simulation."""

from .closedloop import ConvergenceMetrics, SimState, Trajectory, metrics, run, step
from .datagen import DataRecord, ExcitationConfig, collect, default_horizon, verify_consistency
from .errors import DesignFailed, Infeasible, NotInformative, NotStabilizable, SynthesisError
from .fileio import load_paper_example, load_scenario, paper_example_path, save_scenario
from .informativity import (
    InformativityReport,
    StabilizationData,
    ThetaParam,
    follower_informative,
    leader_informative,
    right_inverse_from_theta,
)
from .matops import Tolerances
from .netgraph import NetworkGraph, build_partition, follower_coupling, has_rooted_spanning_tree
from .plant import AgentModel, ExoSystem, Scenario, validate_exosystem, validate_scenario
from .synthesis import (
    ControllerSet,
    RegulatorSolution,
    assess_record,
    design_observer_h,
    design_observer_l,
    solve_regulator_model,
    synthesize,
)

__version__ = "0.1.0"
