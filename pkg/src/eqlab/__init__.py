"""eqlab: a laboratory for coherent-state (enhanced) quantization.

Exact operator algebra with normal ordering over fiducial frames, a small
model-definition language, truncated Fock-space numerics, phase-space
metric probes, and full-vs-reduced dynamics.
"""

from .scalars import ComplexRational, ScalarPoly, sym, hbar, rational, imag_unit, HBAR
from .operators import (
    Generator,
    Kind,
    OperatorExpr,
    adjoint,
    canonicalize,
    displace,
    hermitian_check,
    render,
    MAX_TOTAL_DEGREE,
)
from .frames import (
    FiducialFrame,
    fiducial_expectation,
    normal_order,
    wcp_symbolic,
    wick_order,
)
from . import errors

__version__ = "0.1.0"
