"""Polynomials in canonical operators with exact scalar coefficients.

A Generator is one canonical operator (position- or momentum-like) tagged
by an operator-set id and a mode index.  An OperatorExpr is a finite sum
of words (ordered products) of generators, each weighted by a ScalarPoly.

The only relations used are the canonical commutation relations

    [position, momentum] = i*hbar   (same set, same mode)

with all cross-set and cross-mode pairs commuting.  `canonicalize` rewrites
every word into the fixed generator order (set id, then mode, then
position before momentum) while preserving the operator identity;
equality of canonical forms is therefore syntactic equality of operators.

Products are capped at total degree MAX_TOTAL_DEGREE to keep the rewriting
combinatorics bounded; the quartic-of-quadratic Hamiltonians used by the
models peak at degree 8.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping, Sequence, Union

from .errors import DegreeLimitError
from .scalars import (
    CR_I,
    ComplexRational,
    ScalarPoly,
    hbar,
)

MAX_TOTAL_DEGREE = 12


class Kind(enum.IntEnum):
    POSITION = 0
    MOMENTUM = 1


@dataclass(frozen=True, order=True)
class Generator:
    """One canonical operator; the field order defines the word order."""

    set_id: str
    mode: int
    kind: Kind


Word = tuple  # tuple[Generator, ...]


def _commutator_scalar(a: Generator, b: Generator) -> ScalarPoly | None:
    """[a, b] when it is a scalar, None when zero.

    Nonzero only for same set and mode with distinct kinds:
    [Q, P] = i*hbar, [P, Q] = -i*hbar.
    """
    if a.set_id != b.set_id or a.mode != b.mode or a.kind == b.kind:
        return None
    if a.kind == Kind.POSITION:
        return ScalarPoly({(("hbar", 1),): CR_I})
    return ScalarPoly({(("hbar", 1),): -CR_I})


class OperatorExpr:
    """Sum of generator words with ScalarPoly coefficients.

    Immutable.  `ordered_frame` is metadata recording that the stored form
    is normal ordered with respect to a fiducial frame; it is set only by
    the frame operations and survives linear combinations and scalar
    displacement, the two transformations that preserve normal order.
    """

    __slots__ = ("_terms", "ordered_frame")

    def __init__(self, terms: Mapping[Word, ScalarPoly] | None = None, ordered_frame=None):
        clean: dict[Word, ScalarPoly] = {}
        if terms:
            for w, c in terms.items():
                if not c.is_zero:
                    clean[w] = c
        self._terms = clean
        self.ordered_frame = ordered_frame

    # -- constructors --

    @classmethod
    def zero(cls) -> "OperatorExpr":
        return cls()

    @classmethod
    def scalar(cls, c) -> "OperatorExpr":
        return cls({(): _as_scalar(c)})

    @classmethod
    def from_generator(cls, g: Generator) -> "OperatorExpr":
        return cls({(g,): ScalarPoly.one()})

    @classmethod
    def monomial(cls, word: Iterable[Generator], coeff=1) -> "OperatorExpr":
        return cls({tuple(word): _as_scalar(coeff)})

    def with_frame(self, frame) -> "OperatorExpr":
        out = OperatorExpr.__new__(OperatorExpr)
        out._terms = self._terms
        out.ordered_frame = frame
        return out

    # -- inspection --

    def items(self):
        return self._terms.items()

    def sorted_terms(self) -> list[tuple[Word, ScalarPoly]]:
        return sorted(self._terms.items(), key=lambda kv: (-len(kv[0]), kv[0]))

    @property
    def is_zero(self) -> bool:
        return not self._terms

    @property
    def is_scalar(self) -> bool:
        return not self._terms or (len(self._terms) == 1 and () in self._terms)

    def scalar_part(self) -> ScalarPoly:
        return self._terms.get((), ScalarPoly.zero())

    def generators(self) -> set[Generator]:
        out: set[Generator] = set()
        for w in self._terms:
            out.update(w)
        return out

    def total_degree(self) -> int:
        return max((len(w) for w in self._terms), default=0)

    def symbols(self) -> set[str]:
        out: set[str] = set()
        for c in self._terms.values():
            out |= c.symbols()
        return out

    # -- algebra --

    def _coerce(self, other) -> "OperatorExpr":
        if isinstance(other, OperatorExpr):
            return other
        if isinstance(other, Generator):
            return OperatorExpr.from_generator(other)
        try:
            return OperatorExpr.scalar(_as_scalar(other))
        except TypeError:
            return NotImplemented

    def __add__(self, other) -> "OperatorExpr":
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        terms = dict(self._terms)
        for w, c in other._terms.items():
            cur = terms.get(w)
            nc = c if cur is None else cur + c
            if nc.is_zero:
                terms.pop(w, None)
            else:
                terms[w] = nc
        frame = self.ordered_frame
        if frame is None or (other.ordered_frame is not frame and not other.is_scalar):
            frame = None
        if other.ordered_frame is not None and self.is_scalar:
            frame = other.ordered_frame
        return OperatorExpr(terms, ordered_frame=frame)

    __radd__ = __add__

    def __sub__(self, other) -> "OperatorExpr":
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other) -> "OperatorExpr":
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return other + (-self)

    def __neg__(self) -> "OperatorExpr":
        out = OperatorExpr.__new__(OperatorExpr)
        out._terms = {w: -c for w, c in self._terms.items()}
        out.ordered_frame = self.ordered_frame
        return out

    def __mul__(self, other) -> "OperatorExpr":
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        if self.total_degree() + other.total_degree() > MAX_TOTAL_DEGREE:
            raise DegreeLimitError(
                f"product degree exceeds the cap of {MAX_TOTAL_DEGREE}"
            )
        scalar_product = self.is_scalar or other.is_scalar
        terms: dict[Word, ScalarPoly] = {}
        for w1, c1 in self._terms.items():
            for w2, c2 in other._terms.items():
                w = w1 + w2
                c = c1 * c2
                cur = terms.get(w)
                nc = c if cur is None else cur + c
                if nc.is_zero:
                    terms.pop(w, None)
                else:
                    terms[w] = nc
        frame = None
        if scalar_product:
            frame = self.ordered_frame if not self.is_scalar else other.ordered_frame
        return OperatorExpr(terms, ordered_frame=frame)

    def __rmul__(self, other) -> "OperatorExpr":
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return other * self

    def __pow__(self, n: int) -> "OperatorExpr":
        if not isinstance(n, int) or n < 0:
            raise TypeError("operator exponent must be a non-negative int")
        out = OperatorExpr.scalar(1)
        for _ in range(n):
            out = out * self
        return out

    def adjoint(self) -> "OperatorExpr":
        """Reverse every word and conjugate every coefficient."""
        terms: dict[Word, ScalarPoly] = {}
        for w, c in self._terms.items():
            rw = tuple(reversed(w))
            cc = c.conjugate()
            cur = terms.get(rw)
            nc = cc if cur is None else cur + cc
            if nc.is_zero:
                terms.pop(rw, None)
            else:
                terms[rw] = nc
        return OperatorExpr(terms)

    def map_coefficients(self, fn) -> "OperatorExpr":
        return OperatorExpr({w: fn(c) for w, c in self._terms.items()},
                            ordered_frame=self.ordered_frame)

    def bind(self, values) -> "OperatorExpr":
        """Bind parameter symbols in all coefficients (exact)."""
        return self.map_coefficients(lambda c: c.bind(values))

    def substitute_generators(self, mapping: Mapping[Generator, "OperatorExpr"]) -> "OperatorExpr":
        """Formal substitution: each generator replaced by an expression,
        words expanded by distribution, no reordering applied."""
        out = OperatorExpr.zero()
        for w, c in self._terms.items():
            acc = OperatorExpr.scalar(c)
            for g in w:
                acc = acc * mapping.get(g, OperatorExpr.from_generator(g))
            out = out + acc
        return out

    def canonical(self) -> "OperatorExpr":
        """Rewrite every word into the fixed generator order using the
        commutation relations.  Preserves the operator identity; idempotent."""
        out = OperatorExpr.zero()
        for w, c in self._terms.items():
            out = out + _canonical_word(w) * c
        return OperatorExpr(out._terms)  # strips any frame metadata

    # -- identity --

    def __eq__(self, other) -> bool:
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self):
        return hash(frozenset((w, hash(c)) for w, c in self._terms.items()))

    def __repr__(self):
        return f"OperatorExpr({render(self)})"

    def __str__(self):
        return render(self)


def _as_scalar(c) -> ScalarPoly:
    if isinstance(c, ScalarPoly):
        return c
    if isinstance(c, (int, Fraction, ComplexRational)):
        return ScalarPoly.const(c)
    raise TypeError(f"cannot use {type(c).__name__} as scalar coefficient")


@lru_cache(maxsize=None)
def _canonical_word(word: Word) -> OperatorExpr:
    for i in range(len(word) - 1):
        a, b = word[i], word[i + 1]
        if a > b:
            swapped = word[:i] + (b, a) + word[i + 2:]
            out = _canonical_word(swapped)
            comm = _commutator_scalar(a, b)
            if comm is not None:
                out = out + _canonical_word(word[:i] + word[i + 2:]) * comm
            return out
    return OperatorExpr.monomial(word)


def canonicalize(e: OperatorExpr) -> OperatorExpr:
    return e.canonical()


def adjoint(e: OperatorExpr) -> OperatorExpr:
    return e.adjoint()


def hermitian_check(e: OperatorExpr) -> bool:
    """True iff e equals its adjoint as an operator identity."""
    return (e - e.adjoint()).canonical().is_zero


ShiftValue = Union[int, Fraction, ComplexRational, ScalarPoly]


def displace(e: OperatorExpr, shifts: Mapping[Generator, ShiftValue]) -> OperatorExpr:
    """Replace each generator g by g + shift(g) and expand.

    Shifts are scalars (numbers or symbol polynomials), so normal-ordered
    structure is preserved and the frame flag carries over.
    """
    mapping: dict[Generator, OperatorExpr] = {}
    for g, s in shifts.items():
        sc = _as_scalar(s)
        if sc.is_zero:
            continue
        mapping[g] = OperatorExpr.from_generator(g) + OperatorExpr.scalar(sc)
    if not mapping:
        return e
    out = e.substitute_generators(mapping)
    return out.with_frame(e.ordered_frame)


# -- rendering --

_POSITION_LETTERS = ("Q", "S")
_MOMENTUM_LETTERS = ("P", "R")


def generator_letter(g: Generator, set_order: Sequence[str]) -> str:
    try:
        i = set_order.index(g.set_id)
    except ValueError:
        raise KeyError(f"set {g.set_id!r} not in render order {set_order}")
    if i > 1:
        raise KeyError("textual rendering supports at most two operator sets")
    return (_POSITION_LETTERS if g.kind == Kind.POSITION else _MOMENTUM_LETTERS)[i]


def _render_word(w: Word, set_order: Sequence[str]) -> str:
    parts = []
    i = 0
    while i < len(w):
        j = i
        while j < len(w) and w[j] == w[i]:
            j += 1
        name = f"{generator_letter(w[i], set_order)}[{w[i].mode}]"
        parts.append(name if j - i == 1 else f"{name}^{j - i}")
        i = j
    return "*".join(parts)


def render(e: OperatorExpr, set_order: Sequence[str] | None = None) -> str:
    """Canonical text form, parseable by the model language."""
    if e.is_zero:
        return "0"
    if set_order is None:
        set_order = sorted({g.set_id for g in e.generators()})
    pieces: list[tuple[str, str]] = []
    for w, c in e.sorted_terms():
        word = _render_word(w, set_order) if w else ""
        coeff = str(c)
        sign = "+"
        if not word:
            body = coeff if not c.is_single_term else coeff
            if coeff.startswith("-"):
                sign, body = "-", coeff[1:]
            else:
                body = coeff
        elif c == ScalarPoly.one():
            body = word
        elif c == -ScalarPoly.one():
            sign, body = "-", word
        elif c.is_single_term:
            if coeff.startswith("-"):
                sign, body = "-", f"{coeff[1:]}*{word}"
            else:
                body = f"{coeff}*{word}"
        else:
            body = f"({coeff})*{word}"
        pieces.append((sign, body))
    first_sign, first_body = pieces[0]
    out = first_body if first_sign == "+" else f"-{first_body}"
    for sign, body in pieces[1:]:
        out += f" {sign} {body}"
    return out
