"""Errors raised by boundstate."""


class BoundStateError(Exception):
    """Base class for every error raised by the library.

    ``code`` is a stable machine-readable identifier and ``details`` carries the
    diagnostics reported by the CLI error document.
    """

    code = "boundstate_error"

    def __init__(self, message: str, **details):
        super().__init__(message)
        self.details = details

    def as_dict(self) -> dict:
        """Machine-readable representation used by the CLI"""
        return {"error": self.code, "message": str(self), "details": self.details}


class SpectralDomainError(BoundStateError):
    """Exception raised when a spectral quantity is requested outside its domain"""

    code = "spectral_domain"


class QuadratureError(BoundStateError):
    """Exception raised when an adaptive quadrature does not converge"""

    code = "quadrature"


class SolverInstabilityError(BoundStateError):
    """Exception raised when the Green function leaves the unit disc"""

    code = "solver_instability"


class ConsistencyError(BoundStateError):
    """Exception raised when a computed quantity breaks an exact identity"""

    code = "consistency"


class StepSizeError(ConsistencyError):
    """Exception raised when the Fock propagation drifts in trace"""

    code = "step_size"


class BranchCutError(BoundStateError):
    """Exception raised when the self-energy is evaluated on its branch cut"""

    code = "branch_cut"


class MarkovLimitError(BoundStateError):
    """Exception raised when the cavity frequency has no decay channel"""

    code = "markov_limit"


class EnvelopeDomainError(BoundStateError):
    """Exception raised when the steady envelope is requested below critical coupling"""

    code = "envelope_domain"


class SingularWindowError(BoundStateError):
    """Exception raised when a propagation window crosses a zero of u(t)"""

    code = "singular_window"


class TruncationError(BoundStateError):
    """Exception raised when the Fock truncation holds too much population"""

    code = "truncation"


class FrameExtentError(BoundStateError):
    """Exception raised when a Wigner frame does not cover the peaks"""

    code = "frame_extent"


class ScenarioError(BoundStateError):
    """Exception raised when a scenario file is invalid"""

    code = "scenario"
