"""Exception hierarchy for eqlab.

Everything user-facing derives from EqlabError so the CLI can map failures
to diagnostics instead of stack traces.
"""


class EqlabError(Exception):
    """Base class for all eqlab errors."""


# --- symbolic algebra ---

class DegreeLimitError(EqlabError):
    """Operator polynomial exceeds the supported total degree."""


class FrameError(EqlabError):
    """A fiducial frame is structurally invalid."""


class FrameSpanError(FrameError):
    """Expression uses generators outside the frame's span."""


class GramNotPositiveDefinite(FrameError):
    """Frame Gram matrix has a non-positive leading minor."""


class DependentFiducialConditions(FrameError):
    """Annihilation conditions are linearly dependent."""


class SymbolicGramError(FrameError):
    """Gram entries contain unbound symbols; numeric check impossible."""


class NotNormalOrderedError(EqlabError):
    """Expectation requested of an expression without a frame flag."""


class HermiticityError(EqlabError):
    """Expression is not self-adjoint where a Hermitian one is required."""


class NonHermitianHamiltonian(HermiticityError):
    """Model Hamiltonian fails the self-adjointness check."""


# --- numerics ---

class UnknownGeneratorError(EqlabError):
    """Operator refers to a generator not present in the Fock space."""


class DimensionMismatch(EqlabError):
    """Matrix/vector shapes are incompatible."""


class DegenerateGroundSpace(EqlabError):
    """Fiducial conditions do not single out a unique null vector."""


class TruncationLeakage(EqlabError):
    """State has non-negligible weight at the truncation boundary."""


class StepTooLarge(EqlabError):
    """Finite-difference step failed its consistency check."""


class StepRejected(EqlabError):
    """Propagator step could not reach the requested tolerance."""


class GridMismatch(EqlabError):
    """Trajectories sampled on different time grids."""


# --- models ---

class ZetaOutOfRange(EqlabError):
    """Mixing parameter outside the open interval (0, 1)."""


class ModelError(EqlabError):
    """Model failed validation."""


class UnboundParameterError(ModelError):
    """A numeric evaluation needs a parameter that has no value."""
