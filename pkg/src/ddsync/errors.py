"""Exception types raised by the synthesis pipeline."""


class SynthesisError(Exception):
    """Base class for design failures.

    Parameters
    ----------
    message : str
        Human-readable description.
    agent_index : int, optional
        1-based index of the agent the failure belongs to, when known.
    condition : str, optional
        Solvability-condition code that failed: "ia"/"ib"/"ic" for
        leaders, "iia"/"iib"/"iic" for followers in data mode, or
        "i"/"ii"/"iii" in model mode.
    """

    def __init__(self, message, agent_index=None, condition=None):
        super().__init__(message)
        self.agent_index = agent_index
        self.condition = condition


class NotStabilizable(SynthesisError):
    """No Schur-stabilizing feedback exists (or the solve did not converge)."""


class NotInformative(SynthesisError):
    """Collected data do not determine a stabilizing controller."""


class Infeasible(SynthesisError):
    """The regulator equations have no (numerically exact) solution."""


class DesignFailed(SynthesisError):
    """A verified design could not be produced within the search budget."""
