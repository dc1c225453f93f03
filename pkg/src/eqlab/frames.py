"""Fiducial frames and normal ordering.

A FiducialFrame is a list of annihilation operators b_i, each an exact
complex-linear combination of canonical generators, thought of as the
conditions b_i|0> = 0 that pin down a Gaussian fiducial vector.  The frame
provides three derived structures:

* the Gram data [b_i, b_j^†] (scalars, proportional to hbar),
* the inverse linear map expressing every generator in terms of
  {b_i, b_i^†}, computed exactly by fraction-free elimination,
* reordering rules b_i b_j^† = b_j^† b_i + [b_i, b_j^†].

Two orderings are built on top:

* normal_order(e, f) rewrites e with all daggered factors on the left,
  inserting the Gram commutators, so the result equals e as an operator.
* wick_order(e, f) moves daggered factors left without commutator terms;
  this is the :(...): symbol map, which changes the operator (it deletes
  the contractions of the written expression).

Both store the result back in generator words and flag it with the frame,
which is what makes fiducial_expectation a simple scalar-part read: the
vacuum expectation of every non-empty normal-ordered word vanishes.

Conditions are used unnormalized throughout; rescaling any b_i rescales
its Gram row/column and its inverse-map coefficients in compensating ways,
so all derived operators are normalization independent.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .errors import (
    DegreeLimitError,
    DependentFiducialConditions,
    EqlabError,
    FrameError,
    FrameSpanError,
    GramNotPositiveDefinite,
    HermiticityError,
    NotNormalOrderedError,
    SymbolicGramError,
)
from .operators import (
    MAX_TOTAL_DEGREE,
    Generator,
    Kind,
    OperatorExpr,
    displace,
    hermitian_check,
)
from .scalars import (
    CR_I,
    CR_ONE,
    CR_ZERO,
    ComplexRational,
    ScalarPoly,
    fraction_sqrt,
    sym,
)

# A b-word: tuple of (condition index, daggered) factors.
BWord = tuple


class FiducialFrame:
    """Annihilation conditions defining a fiducial vector and its ordering."""

    def __init__(self, conditions: Sequence[OperatorExpr], label: str = "frame"):
        conds = []
        for c in conditions:
            if not isinstance(c, OperatorExpr):
                raise TypeError("conditions must be OperatorExpr")
            if c.is_zero or any(len(w) != 1 for w, _ in c.items()):
                raise FrameError(
                    f"{label}: each condition must be a nonzero linear "
                    "combination of generators with no scalar part"
                )
            conds.append(c)
        if not conds:
            raise FrameError(f"{label}: at least one condition required")
        self.label = label
        self.conditions: tuple[OperatorExpr, ...] = tuple(conds)
        span: set[Generator] = set()
        for c in conds:
            span.update(c.generators())
        self.span: tuple[Generator, ...] = tuple(sorted(span))

        self._check_rank()
        if len(self.span) != 2 * len(conds):
            raise FrameError(
                f"{label}: {len(conds)} conditions must involve exactly "
                f"{2 * len(conds)} generators, found {len(self.span)}"
            )
        self._check_commuting()
        # G[i][j] = [b_i, b_j^dagger] as a scalar; R = G / hbar.
        self._gram_comm = self._compute_gram()
        hb = ScalarPoly.symbol("hbar")
        self.gram_raw = [
            [g.div_exact(hb) for g in row] for row in self._gram_comm
        ]
        self._expansion: dict[Generator, list[tuple[int, bool, ScalarPoly]]] | None = None
        self._reorder_cache: dict[BWord, dict[BWord, ScalarPoly]] = {}
        self._map_back_cache: dict[BWord, OperatorExpr] = {}

    # -- construction-time checks --

    def _coeff_matrix(self) -> list[list[ScalarPoly]]:
        cols = {g: j for j, g in enumerate(self.span)}
        rows = []
        for c in self.conditions:
            row = [ScalarPoly.zero()] * len(self.span)
            for w, coeff in c.items():
                row[cols[w[0]]] = coeff
            rows.append(row)
        return rows

    def _check_rank(self):
        rows = self._coeff_matrix()
        if _poly_rank(rows) < len(self.conditions):
            raise DependentFiducialConditions(
                f"{self.label}: annihilation conditions are linearly dependent"
            )

    def _check_commuting(self):
        for i, bi in enumerate(self.conditions):
            for bj in self.conditions[i + 1:]:
                if not (bi * bj - bj * bi).canonical().is_zero:
                    raise FrameError(
                        f"{self.label}: conditions do not mutually commute"
                    )

    def _compute_gram(self) -> list[list[ScalarPoly]]:
        out = []
        adjoints = [c.adjoint() for c in self.conditions]
        for bi in self.conditions:
            row = []
            for bjd in adjoints:
                comm = (bi * bjd - bjd * bi).canonical()
                if not comm.is_scalar:
                    raise FrameError(f"{self.label}: Gram entry is not a scalar")
                row.append(comm.scalar_part())
            out.append(row)
        return out

    # -- Gram views --

    def gram(self) -> list[list[ScalarPoly]]:
        """Normalized Gram matrix M_ij = R_ij / sqrt(R_ii R_jj), exact.

        Raises SymbolicGramError when the diagonal product has no exact
        square root in the scalar ring.
        """
        n = len(self.conditions)
        diag = [self.gram_raw[i][i] for i in range(n)]
        out = [[ScalarPoly.zero()] * n for _ in range(n)]
        for i in range(n):
            for j in range(n):
                root = _sqrt_single_term(diag[i] * diag[j])
                if root is None:
                    raise SymbolicGramError(
                        f"{self.label}: cannot normalize Gram diagonal exactly"
                    )
                out[i][j] = self.gram_raw[i][j].div_exact(root)
        return out

    def is_positive_definite(self) -> bool:
        """Exact Sylvester check on the (Hermitian) Gram matrix.

        Requires numeric (fully bound) Gram entries.
        """
        n = len(self.conditions)
        entries: list[list[ComplexRational]] = []
        for row in self.gram_raw:
            r = []
            for e in row:
                if not e.is_constant:
                    raise SymbolicGramError(
                        f"{self.label}: Gram has unbound symbols; bind "
                        "parameters before the positivity check"
                    )
                r.append(e.constant_value())
            entries.append(r)
        for k in range(1, n + 1):
            minor = [[entries[i][j] for j in range(k)] for i in range(k)]
            d = _det_field(minor)
            if d.im != 0:
                raise FrameError(f"{self.label}: Gram minor not real")
            if d.re <= 0:
                return False
        return True

    def require_positive_definite(self):
        if not self.is_positive_definite():
            raise GramNotPositiveDefinite(
                f"{self.label}: Gram matrix is not positive definite"
            )

    # -- inverse map --

    def _ensure_expansion(self):
        if self._expansion is not None:
            return
        k = len(self.conditions)
        rows = self._coeff_matrix()
        aug = [list(r) for r in rows]
        aug += [[c.conjugate() for c in r] for r in rows]
        try:
            inv = _invert_poly_matrix(aug)
        except EqlabError as exc:
            raise FrameError(
                f"{self.label}: generators are not polynomial in the frame "
                f"operators; bind frame parameters to numbers ({exc})"
            ) from exc
        expansion: dict[Generator, list[tuple[int, bool, ScalarPoly]]] = {}
        for j, g in enumerate(self.span):
            entry = []
            for i in range(k):
                if not inv[j][i].is_zero:
                    entry.append((i, False, inv[j][i]))
                if not inv[j][k + i].is_zero:
                    entry.append((i, True, inv[j][k + i]))
            expansion[g] = entry
        self._expansion = expansion

    # -- b-word machinery --

    def _to_b_basis(self, e: OperatorExpr) -> dict[BWord, ScalarPoly]:
        self._ensure_expansion()
        exp = self._expansion
        out: dict[BWord, ScalarPoly] = {}
        for word, coeff in e.items():
            acc: dict[BWord, ScalarPoly] = {(): coeff}
            for g in word:
                nxt: dict[BWord, ScalarPoly] = {}
                for bw, c in acc.items():
                    for i, dag, k in exp[g]:
                        key = bw + ((i, dag),)
                        cur = nxt.get(key)
                        nc = c * k
                        nxt[key] = nc if cur is None else cur + nc
                acc = nxt
            for bw, c in acc.items():
                cur = out.get(bw)
                out[bw] = c if cur is None else cur + c
        return out

    def _reorder_bword(self, w: BWord) -> dict[BWord, ScalarPoly]:
        cached = self._reorder_cache.get(w)
        if cached is not None:
            return cached
        result = None
        for idx in range(len(w) - 1):
            (i, di), (j, dj) = w[idx], w[idx + 1]
            if (not di) and dj:
                swapped = w[:idx] + ((j, True), (i, False)) + w[idx + 2:]
                result = dict(self._reorder_bword(swapped))
                comm = self._gram_comm[i][j]
                if not comm.is_zero:
                    for bw, c in self._reorder_bword(w[:idx] + w[idx + 2:]).items():
                        cur = result.get(bw)
                        nc = c * comm
                        nv = nc if cur is None else cur + nc
                        if nv.is_zero:
                            result.pop(bw, None)
                        else:
                            result[bw] = nv
                break
            if di == dj and i > j:
                swapped = w[:idx] + ((j, dj), (i, di)) + w[idx + 2:]
                result = dict(self._reorder_bword(swapped))
                break
        if result is None:
            result = {w: ScalarPoly.one()}
        self._reorder_cache[w] = result
        return result

    @staticmethod
    def _wick_bword(w: BWord) -> BWord:
        daggers = sorted(i for i, d in w if d)
        plains = sorted(i for i, d in w if not d)
        return tuple((i, True) for i in daggers) + tuple((i, False) for i in plains)

    def _map_back(self, w: BWord) -> OperatorExpr:
        cached = self._map_back_cache.get(w)
        if cached is not None:
            return cached
        out = OperatorExpr.scalar(1)
        for i, dag in w:
            factor = self.conditions[i].adjoint() if dag else self.conditions[i]
            out = out * factor
        self._map_back_cache[w] = out
        return out

    def contains(self, e: OperatorExpr) -> bool:
        return e.generators() <= set(self.span)

    def __repr__(self):
        return f"FiducialFrame({self.label!r}, {len(self.conditions)} conditions)"


def _sqrt_single_term(p: ScalarPoly) -> ScalarPoly | None:
    """Exact square root of a single-term polynomial with positive rational
    coefficient and even exponents; None if not available."""
    if not p.is_single_term:
        return None
    ((mono, coeff),) = p.items()
    if coeff.im != 0 or coeff.re <= 0:
        return None
    root = fraction_sqrt(coeff.re)
    if root is None:
        return None
    if any(e % 2 for _, e in mono):
        return None
    return ScalarPoly({tuple((s, e // 2) for s, e in mono): ComplexRational(root)})


# -- exact linear algebra over ScalarPoly / ComplexRational --

def _poly_rank(rows: list[list[ScalarPoly]]) -> int:
    """Rank over the fraction field, by fraction-free elimination."""
    m = [list(r) for r in rows]
    nrows = len(m)
    ncols = len(m[0]) if nrows else 0
    rank = 0
    prev = ScalarPoly.one()
    for col in range(ncols):
        pivot_row = None
        for r in range(rank, nrows):
            if not m[r][col].is_zero:
                pivot_row = r
                break
        if pivot_row is None:
            continue
        m[rank], m[pivot_row] = m[pivot_row], m[rank]
        piv = m[rank][col]
        for r in range(rank + 1, nrows):
            factor = m[r][col]
            for c2 in range(ncols):
                m[r][c2] = (piv * m[r][c2] - factor * m[rank][c2]).div_exact(prev)
        prev = piv
        rank += 1
        if rank == nrows:
            break
    return rank


def _invert_poly_matrix(a: list[list[ScalarPoly]]) -> list[list[ScalarPoly]]:
    """Exact inverse via fraction-free Gauss-Jordan (Bareiss style).

    Works over constants (always) and over symbolic entries whenever the
    inverse is itself polynomial; raises otherwise.
    """
    n = len(a)
    width = 2 * n
    b: list[list[ScalarPoly]] = []
    for i, row in enumerate(a):
        if len(row) != n:
            raise EqlabError("matrix must be square")
        ext = list(row) + [ScalarPoly.zero()] * n
        ext[n + i] = ScalarPoly.one()
        b.append(ext)
    prev = ScalarPoly.one()
    for k in range(n):
        pivot_row = None
        for r in range(k, n):
            if not b[r][k].is_zero:
                pivot_row = r
                break
        if pivot_row is None:
            raise EqlabError("matrix is singular")
        b[k], b[pivot_row] = b[pivot_row], b[k]
        piv = b[k][k]
        for i in range(n):
            if i == k:
                continue
            factor = b[i][k]
            for j in range(width):
                if j == k:
                    continue
                b[i][j] = (piv * b[i][j] - factor * b[k][j]).div_exact(prev)
            b[i][k] = ScalarPoly.zero()
        prev = piv
    # left block is now diagonal; each row i solves b[i][i] * x_i = rhs_i
    return [
        [b[i][n + j].div_exact(b[i][i]) for j in range(n)] for i in range(n)
    ]


def _det_field(m: list[list[ComplexRational]]) -> ComplexRational:
    n = len(m)
    a = [list(r) for r in m]
    det = CR_ONE
    for k in range(n):
        pivot_row = None
        for r in range(k, n):
            if not a[r][k].is_zero:
                pivot_row = r
                break
        if pivot_row is None:
            return CR_ZERO
        if pivot_row != k:
            a[k], a[pivot_row] = a[pivot_row], a[k]
            det = -det
        piv = a[k][k]
        det = det * piv
        for r in range(k + 1, n):
            f = a[r][k] / piv
            for c in range(k, n):
                a[r][c] = a[r][c] - f * a[k][c]
    return det


# -- ordering operations --

def _check_span_and_degree(e: OperatorExpr, f: FiducialFrame):
    extra = e.generators() - set(f.span)
    if extra:
        names = ", ".join(f"{g.set_id}[{g.mode}]:{g.kind.name}" for g in sorted(extra))
        raise FrameSpanError(f"expression uses generators outside {f.label}: {names}")
    if e.total_degree() > MAX_TOTAL_DEGREE:
        raise DegreeLimitError(
            f"expression degree {e.total_degree()} exceeds {MAX_TOTAL_DEGREE}"
        )


def normal_order(e: OperatorExpr, f: FiducialFrame) -> OperatorExpr:
    """Identity-preserving rewrite with daggered frame operators moved left.

    canonicalize(normal_order(e, f) - e) == 0 exactly.
    """
    _check_span_and_degree(e, f)
    in_b = f._to_b_basis(e)
    acc: dict[BWord, ScalarPoly] = {}
    for bw, c in in_b.items():
        for bw2, c2 in f._reorder_bword(bw).items():
            cur = acc.get(bw2)
            nc = c * c2
            nv = nc if cur is None else cur + nc
            if nv.is_zero:
                acc.pop(bw2, None)
            else:
                acc[bw2] = nv
    out = OperatorExpr.zero()
    for bw, c in acc.items():
        out = out + f._map_back(bw) * c
    return out.with_frame(f)


def wick_order(e: OperatorExpr, f: FiducialFrame) -> OperatorExpr:
    """The :(...): symbol: reorder daggered factors left with no commutator
    corrections.  Acts on the expression as written; generally changes the
    operator (it removes the contractions)."""
    _check_span_and_degree(e, f)
    in_b = f._to_b_basis(e)
    acc: dict[BWord, ScalarPoly] = {}
    for bw, c in in_b.items():
        key = f._wick_bword(bw)
        cur = acc.get(key)
        nv = c if cur is None else cur + c
        if nv.is_zero:
            acc.pop(key, None)
        else:
            acc[key] = nv
    out = OperatorExpr.zero()
    for bw, c in acc.items():
        out = out + f._map_back(bw) * c
    return out.with_frame(f)


def fiducial_expectation(e: OperatorExpr, f: FiducialFrame) -> ScalarPoly:
    """Vacuum expectation of a normal-ordered expression: its scalar part."""
    if e.ordered_frame is not f:
        raise NotNormalOrderedError(
            "expression is not flagged as normal ordered in this frame"
        )
    return e.scalar_part()


def wcp_symbolic(
    h: OperatorExpr,
    f: FiducialFrame,
    shifted_sets: Iterable[str],
) -> ScalarPoly:
    """Coherent-state diagonal expectation as an exact polynomial.

    Composition: normal order in f (skipped when already flagged), displace
    the shifted sets by the phase-space symbols q<mode>/p<mode>, read off
    the scalar part.  The result is the classical Hamiltonian including any
    hbar-dependent corrections.
    """
    if not hermitian_check(h):
        raise HermiticityError("wcp input must be self-adjoint")
    shifted = set(shifted_sets)
    ordered = h if h.ordered_frame is f else normal_order(h, f)
    shifts = {}
    for g in f.span:
        if g.set_id in shifted:
            name = f"q{g.mode}" if g.kind == Kind.POSITION else f"p{g.mode}"
            shifts[g] = sym(name)
    displaced = displace(ordered, shifts)
    return fiducial_expectation(displaced, f)


def oscillator_frame(
    set_id: str,
    n_modes: int,
    omega: ScalarPoly | Fraction | int,
    label: str | None = None,
) -> FiducialFrame:
    """Frame annihilating the frequency-omega oscillator vacuum:
    conditions omega*Q[n] + i*P[n] for every mode."""
    om = omega if isinstance(omega, ScalarPoly) else ScalarPoly.const(omega)
    conds = []
    for n in range(n_modes):
        q = Generator(set_id, n, Kind.POSITION)
        p = Generator(set_id, n, Kind.MOMENTUM)
        conds.append(
            OperatorExpr.from_generator(q) * om
            + OperatorExpr.from_generator(p) * ScalarPoly.const(CR_I)
        )
    return FiducialFrame(conds, label=label or f"osc({set_id})")
