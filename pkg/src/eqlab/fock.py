"""Truncated multimode Fock-space numerics.

Basis convention: modes are listed in a fixed order; basis states are
enumerated row-major over occupation numbers, i.e. the first listed mode
varies slowest.  index = sum_k n_k * stride_k with stride_k the product of
the dimensions of all later modes.  The all-zero occupation (index 0) is
the representation vacuum.

Each mode carries a representation frequency omega_rep > 0: the ladder
basis diagonalizes the oscillator of that frequency.  omega_rep is a
numerical choice only; physical answers must converge to the same values
for any omega_rep at sufficient truncation.

Exponential actions use an adaptive Lanczos scheme (exp(-i*tau*H)v for
Hermitian H), with full reorthogonalization and step splitting; accuracy
is checked in the tests against dense matrix exponentials.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    DegenerateGroundSpace,
    DimensionMismatch,
    EqlabError,
    TruncationLeakage,
    UnknownGeneratorError,
)
from .operators import Generator, Kind, OperatorExpr, hermitian_check
from .scalars import ScalarPoly


@dataclass(frozen=True)
class Mode:
    set_id: str
    index: int
    dim: int
    omega_rep: float = 1.0

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("mode dimension must be >= 1")
        if not self.omega_rep > 0:
            raise ValueError("omega_rep must be positive")


@dataclass(frozen=True)
class FockSpace:
    modes: tuple[Mode, ...]
    hbar: float = 1.0

    def __post_init__(self):
        if not self.modes:
            raise ValueError("at least one mode required")
        keys = [(m.set_id, m.index) for m in self.modes]
        if len(set(keys)) != len(keys):
            raise ValueError("duplicate (set, mode) in Fock space")

    @property
    def dim(self) -> int:
        d = 1
        for m in self.modes:
            d *= m.dim
        return d

    def mode_slot(self, set_id: str, index: int) -> int:
        for i, m in enumerate(self.modes):
            if m.set_id == set_id and m.index == index:
                return i
        raise UnknownGeneratorError(f"mode {set_id}[{index}] not in space")

    def strides(self) -> tuple[int, ...]:
        out = []
        acc = 1
        for m in reversed(self.modes):
            out.append(acc)
            acc *= m.dim
        return tuple(reversed(out))

    def basis_index(self, occupations: Sequence[int]) -> int:
        idx = 0
        for n, m, s in zip(occupations, self.modes, self.strides()):
            if not (0 <= n < m.dim):
                raise IndexError("occupation out of range")
            idx += n * s
        return idx

    def occupations(self, index: int) -> tuple[int, ...]:
        out = []
        for s, m in zip(self.strides(), self.modes):
            out.append((index // s) % m.dim)
        return tuple(out)

    def vacuum(self) -> "StateVector":
        v = np.zeros(self.dim, dtype=complex)
        v[0] = 1.0
        return StateVector(v, self, normalized=True)


@dataclass
class MatrixOp:
    """Sparse complex operator on a FockSpace basis."""

    matrix: sp.csr_matrix
    space: FockSpace
    hermitian: bool = False
    provenance: OperatorExpr | str | None = None

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def adjoint(self) -> "MatrixOp":
        return MatrixOp(self.matrix.conjugate().transpose().tocsr(), self.space,
                        self.hermitian, self.provenance)

    def __matmul__(self, other):
        if isinstance(other, MatrixOp):
            return MatrixOp((self.matrix @ other.matrix).tocsr(), self.space)
        return self.matrix @ other


class StateVector:
    """Dense complex amplitudes over the FockSpace basis (immutable)."""

    __slots__ = ("amplitudes", "space", "normalized")

    def __init__(self, amplitudes: np.ndarray, space: FockSpace, normalized: bool = False):
        amps = np.asarray(amplitudes, dtype=complex)
        if amps.shape != (space.dim,):
            raise DimensionMismatch(
                f"state has {amps.shape}, space dimension is {space.dim}"
            )
        amps = amps.copy()
        amps.flags.writeable = False
        self.amplitudes = amps
        self.space = space
        self.normalized = normalized
        if normalized and abs(self.norm() - 1.0) > 1e-12:
            raise EqlabError("state tagged normalized but norm deviates > 1e-12")

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized_copy(self) -> "StateVector":
        n = self.norm()
        if n == 0:
            raise EqlabError("cannot normalize the zero vector")
        return StateVector(self.amplitudes / n, self.space, normalized=True)

    def occupation_tail_mass(self, levels: int = 1) -> float:
        """Largest, over modes, probability of occupations within `levels`
        of the truncation boundary.  The operative truncation-leakage
        indicator (unitary truncated displacements conserve the norm, so
        norm loss alone cannot see leakage)."""
        dims = tuple(m.dim for m in self.space.modes)
        prob = np.abs(self.amplitudes.reshape(dims)) ** 2
        worst = 0.0
        for axis, d in enumerate(dims):
            take = min(levels, d)
            sl = [slice(None)] * len(dims)
            sl[axis] = slice(d - take, d)
            worst = max(worst, float(prob[tuple(sl)].sum()))
        return worst


def _ladder(dim: int) -> sp.csr_matrix:
    return sp.diags(np.sqrt(np.arange(1, dim)), 1, format="csr", dtype=complex)


def _embed(space: FockSpace, slot: int, local: sp.spmatrix) -> sp.csr_matrix:
    m = None
    for i, mode in enumerate(space.modes):
        factor = local if i == slot else sp.identity(mode.dim, format="csr", dtype=complex)
        m = factor if m is None else sp.kron(m, factor, format="csr")
    return m.tocsr()


_GEN_CACHE: dict[tuple[FockSpace, Generator], sp.csr_matrix] = {}


def _generator_matrix(space: FockSpace, g: Generator) -> sp.csr_matrix:
    key = (space, g)
    cached = _GEN_CACHE.get(key)
    if cached is not None:
        return cached
    slot = space.mode_slot(g.set_id, g.mode)
    mode = space.modes[slot]
    a = _ladder(mode.dim)
    ad = a.conjugate().transpose().tocsr()
    if g.kind == Kind.POSITION:
        local = math.sqrt(space.hbar / (2.0 * mode.omega_rep)) * (a + ad)
    else:
        local = 1j * math.sqrt(space.hbar * mode.omega_rep / 2.0) * (ad - a)
    out = _embed(space, slot, local.tocsr())
    _GEN_CACHE[key] = out
    return out


def build_generators(space: FockSpace, set_id: str, index: int) -> tuple[MatrixOp, MatrixOp]:
    """Position/momentum matrices for one mode:
    Q = sqrt(hbar/2w)(a+a^dag), P = i*sqrt(hbar*w/2)(a^dag-a)."""
    q = _generator_matrix(space, Generator(set_id, index, Kind.POSITION))
    p = _generator_matrix(space, Generator(set_id, index, Kind.MOMENTUM))
    return (
        MatrixOp(q, space, hermitian=True, provenance=f"Q {set_id}[{index}]"),
        MatrixOp(p, space, hermitian=True, provenance=f"P {set_id}[{index}]"),
    )


def build_operator(
    e: OperatorExpr,
    space: FockSpace,
    params: Mapping[str, float | complex] | None = None,
) -> MatrixOp:
    """Sparse matrix of an operator polynomial.

    Coefficients are evaluated with the given parameter values plus the
    space's hbar; every free symbol must be bound.  Words map to matrix
    products in word order.  The hermitian flag is set from the exact
    symbolic self-adjointness check.
    """
    known = {(m.set_id, m.index) for m in space.modes}
    for g in e.generators():
        if (g.set_id, g.mode) not in known:
            raise UnknownGeneratorError(
                f"generator {g.set_id}[{g.mode}] not in space"
            )
    values = dict(params or {})
    if "hbar" in values and float(values["hbar"]) != space.hbar:
        raise EqlabError("hbar binding conflicts with the space's hbar")
    values["hbar"] = space.hbar
    dim = space.dim
    total = sp.csr_matrix((dim, dim), dtype=complex)
    for word, coeff in e.items():
        c = coeff.evaluate(values)
        if c == 0:
            continue
        m = None
        for g in word:
            gm = _generator_matrix(space, g)
            m = gm if m is None else m @ gm
        if m is None:
            m = sp.identity(dim, format="csr", dtype=complex)
        total = total + c * m
    return MatrixOp(total.tocsr(), space, hermitian=hermitian_check(e), provenance=e)


@dataclass
class FiducialResult:
    state: StateVector
    residual: float
    gap: float
    ground_value: float


def fiducial_solve(
    conditions: Sequence[MatrixOp],
    space: FockSpace | None = None,
    *,
    gap_tol: float = 1e-10,
    dense_cutoff: int = 1024,
) -> FiducialResult:
    """Joint null vector of the annihilation conditions on the truncation.

    Returns the unit eigenvector of K = sum b_i^dag b_i with the smallest
    eigenvalue, the residual sqrt(sum ||b_i v||^2), and the gap to the next
    eigenvalue.  Deterministic: fixed start vector, fixed phase convention.
    """
    if not conditions:
        raise EqlabError("at least one condition required")
    space = space or conditions[0].space
    for c in conditions:
        if c.space is not space and c.space.dim != space.dim:
            raise DimensionMismatch("conditions on different spaces")
    dim = space.dim
    k = sp.csr_matrix((dim, dim), dtype=complex)
    for c in conditions:
        k = k + (c.matrix.conjugate().transpose() @ c.matrix)
    k = k.tocsr()
    if dim <= dense_cutoff:
        vals, vecs = scipy.linalg.eigh(k.toarray())
        lam0 = float(vals[0])
        lam1 = float(vals[1]) if dim > 1 else math.inf
        vec = vecs[:, 0]
    else:
        v0 = np.full(dim, 1.0 / math.sqrt(dim))
        sigma = -0.1
        vals, vecs = spla.eigsh(k, k=2, sigma=sigma, which="LM", v0=v0)
        order = np.argsort(vals)
        lam0, lam1 = float(vals[order[0]]), float(vals[order[1]])
        vec = vecs[:, order[0]]
    gap = lam1 - lam0
    if gap < gap_tol:
        raise DegenerateGroundSpace(
            f"ground gap {gap:.3e} below {gap_tol:.1e}; conditions ill-posed"
        )
    # fixed phase: largest-magnitude amplitude real positive
    j = int(np.argmax(np.abs(vec)))
    phase = vec[j] / abs(vec[j])
    vec = vec / phase
    vec = vec / np.linalg.norm(vec)
    state = StateVector(vec, space, normalized=True)
    residual = math.sqrt(sum(
        float(np.linalg.norm(c.matrix @ vec) ** 2) for c in conditions
    ))
    return FiducialResult(state, residual, gap, lam0)


def expm_action(
    h: sp.spmatrix,
    v: np.ndarray,
    tau: float,
    *,
    tol: float = 1e-12,
    max_krylov: int = 40,
) -> np.ndarray:
    """exp(-i*tau*H) v for Hermitian H via adaptive Lanczos.

    Splits tau when the Krylov residual estimate cannot reach tol within
    max_krylov vectors.
    """
    nrm = np.linalg.norm(v)
    if nrm == 0 or tau == 0:
        return v.copy()
    out = _lanczos_step(h, v, tau, tol, max_krylov, depth=0)
    return out


def _lanczos_step(h, v, tau, tol, max_krylov, depth):
    if depth > 30:
        raise EqlabError("exponential action failed to converge")
    beta0 = np.linalg.norm(v)
    basis = [v / beta0]
    alphas: list[float] = []
    betas: list[float] = []
    m = 0
    while m < max_krylov:
        w = h @ basis[m]
        a = float(np.real(np.vdot(basis[m], w)))
        w = w - a * basis[m]
        if m > 0:
            w = w - betas[m - 1] * basis[m - 1]
        # full reorthogonalization
        for b in basis:
            w = w - np.vdot(b, w) * b
        alphas.append(a)
        b = float(np.linalg.norm(w))
        m += 1
        if b < 1e-14:  # happy breakdown: exact in this subspace
            y = _tridiag_expm(alphas, betas, tau)
            return beta0 * _combine(basis, y)
        if m >= 2:
            y = _tridiag_expm(alphas, betas, tau)
            err = abs(tau) * b * abs(y[-1])
            if err <= tol:
                return beta0 * _combine(basis, y)
        betas.append(b)
        basis.append(w / b)
    half = _lanczos_step(h, v, tau / 2.0, tol / 2.0, max_krylov, depth + 1)
    return _lanczos_step(h, half, tau / 2.0, tol / 2.0, max_krylov, depth + 1)


def _tridiag_expm(alphas, betas, tau) -> np.ndarray:
    vals, vecs = scipy.linalg.eigh_tridiagonal(alphas, betas[: len(alphas) - 1])
    e1 = vecs[0, :].conj()
    return vecs @ (np.exp(-1j * tau * vals) * e1)


def _combine(basis, y) -> np.ndarray:
    out = y[0] * basis[0]
    for c, b in zip(y[1:], basis[1:]):
        out = out + c * b
    return out


@dataclass
class CoherentResult:
    state: StateVector
    renorm_correction: float
    tail_mass: float


def coherent_state(
    space: FockSpace,
    fiducial: StateVector,
    p: Sequence[float] | float,
    q: Sequence[float] | float,
    shifted_sets: Iterable[str] | None = None,
    *,
    leakage_bound: float = 1e-6,
    tol: float = 1e-13,
) -> CoherentResult:
    """Displaced fiducial: exp(-i sum q_n P_n / hbar) exp(+i sum p_n Q_n / hbar) |fiducial>.

    The order and signs follow the reduced-state definition: the position
    exponential acts first.  p and q are indexed by the displaced modes in
    space order (modes of the shifted sets).  The reported renormalization
    correction is |norm - 1| (tiny for a unitary truncated exponential);
    the operative leakage indicator is the occupation tail mass, which must
    stay below leakage_bound.
    """
    if fiducial.space.dim != space.dim:
        raise DimensionMismatch("fiducial not on the given space")
    sets = set(shifted_sets) if shifted_sets is not None else {m.set_id for m in space.modes}
    shifted = [m for m in space.modes if m.set_id in sets]
    pv = np.atleast_1d(np.asarray(p, dtype=float))
    qv = np.atleast_1d(np.asarray(q, dtype=float))
    if len(pv) != len(shifted) or len(qv) != len(shifted):
        raise DimensionMismatch(
            f"expected {len(shifted)} displacement components, got p:{len(pv)} q:{len(qv)}"
        )
    v = fiducial.amplitudes.copy()
    if np.any(pv != 0):
        qsum = sp.csr_matrix((space.dim, space.dim), dtype=complex)
        for val, mode in zip(pv, shifted):
            if val:
                qsum = qsum + val * _generator_matrix(
                    space, Generator(mode.set_id, mode.index, Kind.POSITION))
        v = expm_action(qsum, v, -1.0 / space.hbar, tol=tol)
    if np.any(qv != 0):
        psum = sp.csr_matrix((space.dim, space.dim), dtype=complex)
        for val, mode in zip(qv, shifted):
            if val:
                psum = psum + val * _generator_matrix(
                    space, Generator(mode.set_id, mode.index, Kind.MOMENTUM))
        v = expm_action(psum, v, 1.0 / space.hbar, tol=tol)
    nrm = float(np.linalg.norm(v))
    renorm = abs(nrm - 1.0)
    state = StateVector(v / nrm, space, normalized=True)
    tail = state.occupation_tail_mass()
    if tail > leakage_bound:
        raise TruncationLeakage(
            f"tail occupation mass {tail:.3e} exceeds bound {leakage_bound:.1e}"
        )
    return CoherentResult(state, renorm, tail)


def expectation(a: MatrixOp, v: StateVector) -> complex:
    """<v|A|v>."""
    if a.matrix.shape[1] != v.amplitudes.shape[0]:
        raise DimensionMismatch(
            f"operator {a.matrix.shape} vs state {v.amplitudes.shape}"
        )
    return complex(np.vdot(v.amplitudes, a.matrix @ v.amplitudes))


def dump_state(v: StateVector, fh) -> None:
    """Textual dump: one `index real imag` line per basis amplitude."""
    for i, a in enumerate(v.amplitudes):
        fh.write(f"{i} {float(a.real)!r} {float(a.imag)!r}\n")


def dump_matrix(m: MatrixOp, fh) -> None:
    """Textual dump: one `row col real imag` line per stored entry."""
    coo = m.matrix.tocoo()
    order = np.lexsort((coo.col, coo.row))
    for k in order:
        fh.write(
            f"{int(coo.row[k])} {int(coo.col[k])} "
            f"{float(coo.data[k].real)!r} {float(coo.data[k].imag)!r}\n"
        )
