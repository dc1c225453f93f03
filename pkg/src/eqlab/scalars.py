"""Exact scalar arithmetic for the symbolic engine.

Two layers:

* ComplexRational — complex numbers with exact rational real/imaginary parts.
* ScalarPoly — Laurent polynomials in named real symbols (hbar, model
  parameters, phase-space shift symbols) with ComplexRational coefficients.

No floating point enters either layer; floats appear only when a caller
explicitly evaluates a polynomial at numeric bindings.  Negative exponents
are allowed (e.g. 1/omega terms produced by vacuum normal ordering), which
is why division by a single-term polynomial is always exact.

Equality is syntactic: zero terms are never stored, monomials are kept in
a canonical sorted form, so two ScalarPoly objects are equal iff their term
dictionaries are equal.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterable, Mapping, Union

from .errors import EqlabError

HBAR = "hbar"

Rationalish = Union[int, Fraction]


def _as_fraction(x: Rationalish) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    raise TypeError(f"expected int or Fraction, got {type(x).__name__}")


class ComplexRational:
    """Exact complex number: re + im*i with Fraction components."""

    __slots__ = ("re", "im")

    def __init__(self, re: Rationalish = 0, im: Rationalish = 0):
        self.re = _as_fraction(re)
        self.im = _as_fraction(im)

    # -- algebra --

    def __add__(self, other) -> "ComplexRational":
        other = _coerce_cr(other)
        if other is NotImplemented:
            return NotImplemented
        return ComplexRational(self.re + other.re, self.im + other.im)

    __radd__ = __add__

    def __sub__(self, other) -> "ComplexRational":
        other = _coerce_cr(other)
        if other is NotImplemented:
            return NotImplemented
        return ComplexRational(self.re - other.re, self.im - other.im)

    def __rsub__(self, other) -> "ComplexRational":
        other = _coerce_cr(other)
        if other is NotImplemented:
            return NotImplemented
        return other - self

    def __mul__(self, other) -> "ComplexRational":
        other = _coerce_cr(other)
        if other is NotImplemented:
            return NotImplemented
        return ComplexRational(
            self.re * other.re - self.im * other.im,
            self.re * other.im + self.im * other.re,
        )

    __rmul__ = __mul__

    def __truediv__(self, other) -> "ComplexRational":
        other = _coerce_cr(other)
        if other is NotImplemented:
            return NotImplemented
        d = other.re * other.re + other.im * other.im
        if d == 0:
            raise ZeroDivisionError("division by zero ComplexRational")
        return ComplexRational(
            (self.re * other.re + self.im * other.im) / d,
            (self.im * other.re - self.re * other.im) / d,
        )

    def __rtruediv__(self, other) -> "ComplexRational":
        other = _coerce_cr(other)
        if other is NotImplemented:
            return NotImplemented
        return other / self

    def __neg__(self) -> "ComplexRational":
        return ComplexRational(-self.re, -self.im)

    def __pow__(self, n: int) -> "ComplexRational":
        if not isinstance(n, int):
            raise TypeError("exponent must be int")
        if n < 0:
            return (ComplexRational(1) / self) ** (-n)
        out = ComplexRational(1)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def conjugate(self) -> "ComplexRational":
        return ComplexRational(self.re, -self.im)

    # -- predicates / conversions --

    @property
    def is_zero(self) -> bool:
        return self.re == 0 and self.im == 0

    @property
    def is_real(self) -> bool:
        return self.im == 0

    def to_complex(self) -> complex:
        return complex(self.re) + 1j * complex(self.im)

    def __eq__(self, other) -> bool:
        other = _coerce_cr(other)
        if other is NotImplemented:
            return NotImplemented
        return self.re == other.re and self.im == other.im

    def __hash__(self):
        return hash((self.re, self.im))

    def __repr__(self):
        return f"ComplexRational({self.re!r}, {self.im!r})"

    def __str__(self):
        if self.im == 0:
            return str(self.re)
        if self.re == 0:
            if self.im == 1:
                return "i"
            if self.im == -1:
                return "-i"
            return f"{self.im}*i"
        sign = "+" if self.im > 0 else "-"
        mag = abs(self.im)
        imag = "i" if mag == 1 else f"{mag}*i"
        return f"{self.re} {sign} {imag}"


def _coerce_cr(x) -> "ComplexRational":
    if isinstance(x, ComplexRational):
        return x
    if isinstance(x, (int, Fraction)):
        return ComplexRational(x)
    return NotImplemented


CR_ZERO = ComplexRational(0)
CR_ONE = ComplexRational(1)
CR_I = ComplexRational(0, 1)


# A monomial is a tuple of (symbol, exponent) pairs, sorted by symbol,
# with no zero exponents.  Exponents may be negative (Laurent).
Monomial = tuple  # tuple[tuple[str, int], ...]

MONO_ONE: Monomial = ()


def _mono_mul(a: Monomial, b: Monomial) -> Monomial:
    if not a:
        return b
    if not b:
        return a
    exps: dict[str, int] = dict(a)
    for s, e in b:
        ne = exps.get(s, 0) + e
        if ne:
            exps[s] = ne
        else:
            del exps[s]
    return tuple(sorted(exps.items()))


def _mono_pow(a: Monomial, n: int) -> Monomial:
    if n == 0 or not a:
        return MONO_ONE
    return tuple((s, e * n) for s, e in a)


def _mono_degree(a: Monomial) -> int:
    return sum(e for _, e in a)


def _mono_str(a: Monomial) -> str:
    parts = []
    for s, e in a:
        parts.append(s if e == 1 else f"{s}^{e}")
    return "*".join(parts)


class ScalarPoly:
    """Laurent polynomial in named symbols with exact complex coefficients."""

    __slots__ = ("_terms",)

    def __init__(self, terms: Mapping[Monomial, ComplexRational] | None = None):
        clean: dict[Monomial, ComplexRational] = {}
        if terms:
            for m, c in terms.items():
                if not c.is_zero:
                    clean[m] = c
        self._terms = clean

    # -- constructors --

    @classmethod
    def zero(cls) -> "ScalarPoly":
        return cls()

    @classmethod
    def one(cls) -> "ScalarPoly":
        return cls({MONO_ONE: CR_ONE})

    @classmethod
    def const(cls, c) -> "ScalarPoly":
        cc = _coerce_cr(c)
        if cc is NotImplemented:
            raise TypeError(f"cannot build constant from {type(c).__name__}")
        return cls({MONO_ONE: cc})

    @classmethod
    def symbol(cls, name: str, exponent: int = 1) -> "ScalarPoly":
        if exponent == 0:
            return cls.one()
        return cls({((name, exponent),): CR_ONE})

    # -- inspection --

    def items(self):
        return self._terms.items()

    def sorted_terms(self) -> list[tuple[Monomial, ComplexRational]]:
        return sorted(self._terms.items(), key=lambda kv: (-_mono_degree(kv[0]), kv[0]))

    @property
    def is_zero(self) -> bool:
        return not self._terms

    @property
    def is_constant(self) -> bool:
        return not self._terms or (len(self._terms) == 1 and MONO_ONE in self._terms)

    @property
    def is_single_term(self) -> bool:
        return len(self._terms) == 1

    def constant_value(self) -> ComplexRational:
        if not self.is_constant:
            raise EqlabError(f"not a constant: {self}")
        return self._terms.get(MONO_ONE, CR_ZERO)

    def symbols(self) -> set[str]:
        out: set[str] = set()
        for m in self._terms:
            out.update(s for s, _ in m)
        return out

    def degree_in(self, name: str) -> int:
        """Largest exponent of `name` over all terms (0 if absent)."""
        best = 0
        for m in self._terms:
            for s, e in m:
                if s == name and e > best:
                    best = e
        return best

    # -- ring operations --

    def _coerce(self, other) -> "ScalarPoly":
        if isinstance(other, ScalarPoly):
            return other
        c = _coerce_cr(other)
        if c is NotImplemented:
            return NotImplemented
        return ScalarPoly({MONO_ONE: c})

    def __add__(self, other) -> "ScalarPoly":
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        terms = dict(self._terms)
        for m, c in other._terms.items():
            cur = terms.get(m)
            nc = c if cur is None else cur + c
            if nc.is_zero:
                terms.pop(m, None)
            else:
                terms[m] = nc
        out = ScalarPoly.__new__(ScalarPoly)
        out._terms = terms
        return out

    __radd__ = __add__

    def __sub__(self, other) -> "ScalarPoly":
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other) -> "ScalarPoly":
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return other + (-self)

    def __neg__(self) -> "ScalarPoly":
        out = ScalarPoly.__new__(ScalarPoly)
        out._terms = {m: -c for m, c in self._terms.items()}
        return out

    def __mul__(self, other) -> "ScalarPoly":
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        terms: dict[Monomial, ComplexRational] = {}
        for m1, c1 in self._terms.items():
            for m2, c2 in other._terms.items():
                m = _mono_mul(m1, m2)
                c = c1 * c2
                cur = terms.get(m)
                nc = c if cur is None else cur + c
                if nc.is_zero:
                    terms.pop(m, None)
                else:
                    terms[m] = nc
        out = ScalarPoly.__new__(ScalarPoly)
        out._terms = terms
        return out

    __rmul__ = __mul__

    def __pow__(self, n: int) -> "ScalarPoly":
        if not isinstance(n, int):
            raise TypeError("exponent must be int")
        if n < 0:
            if self.is_single_term:
                ((m, c),) = self._terms.items()
                return ScalarPoly({_mono_pow(m, n): c ** n})
            raise EqlabError("negative power of a multi-term polynomial")
        out = ScalarPoly.one()
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def conjugate(self) -> "ScalarPoly":
        """Complex conjugate; all symbols are treated as real."""
        out = ScalarPoly.__new__(ScalarPoly)
        out._terms = {m: c.conjugate() for m, c in self._terms.items()}
        return out

    # -- division --

    def div_exact(self, divisor: "ScalarPoly") -> "ScalarPoly":
        """Exact division.  Single-term divisors always divide (Laurent);
        multi-term divisors use leading-term reduction and must leave no
        remainder."""
        divisor = self._coerce(divisor)
        if divisor.is_zero:
            raise ZeroDivisionError("division by zero polynomial")
        if divisor.is_single_term:
            ((dm, dc),) = divisor._terms.items()
            inv = _mono_pow(dm, -1)
            terms = {_mono_mul(m, inv): c / dc for m, c in self._terms.items()}
            out = ScalarPoly.__new__(ScalarPoly)
            out._terms = terms
            return out
        return _multi_term_div(self, divisor)

    # -- calculus / substitution / evaluation --

    def diff(self, name: str) -> "ScalarPoly":
        terms: dict[Monomial, ComplexRational] = {}
        for m, c in self._terms.items():
            for i, (s, e) in enumerate(m):
                if s == name:
                    nc = c * e
                    nm = list(m)
                    if e == 1:
                        del nm[i]
                    else:
                        nm[i] = (s, e - 1)
                    key = tuple(nm)
                    cur = terms.get(key)
                    nv = nc if cur is None else cur + nc
                    if nv.is_zero:
                        terms.pop(key, None)
                    else:
                        terms[key] = nv
                    break
        return ScalarPoly(terms)

    def bind(self, values: Mapping[str, Rationalish | ComplexRational]) -> "ScalarPoly":
        """Substitute exact numeric values for some symbols."""
        out = ScalarPoly.zero()
        for m, c in self._terms.items():
            coeff = c
            rest = []
            for s, e in m:
                if s in values:
                    v = _coerce_cr(values[s])
                    if v is NotImplemented:
                        raise TypeError(f"binding for {s} must be exact")
                    coeff = coeff * (v ** e)
                else:
                    rest.append((s, e))
            out = out + ScalarPoly({tuple(rest): coeff})
        return out

    def evaluate(self, values: Mapping[str, float | complex]) -> complex:
        """Numeric evaluation; every symbol must be bound."""
        total = 0j
        for m, c in self._terms.items():
            x = c.to_complex()
            for s, e in m:
                if s not in values:
                    raise EqlabError(f"unbound symbol {s!r} in evaluation")
                x *= complex(values[s]) ** e
            total += x
        return total

    def evaluate_exact(self, values: Mapping[str, Rationalish | ComplexRational]) -> ComplexRational:
        total = CR_ZERO
        for m, c in self._terms.items():
            x = c
            for s, e in m:
                if s not in values:
                    raise EqlabError(f"unbound symbol {s!r} in evaluation")
                v = _coerce_cr(values[s])
                x = x * (v ** e)
            total = total + x
        return total

    # -- hbar bookkeeping --

    def hbar_part(self, degree_zero: bool) -> "ScalarPoly":
        """Terms with hbar exponent == 0 (degree_zero) or != 0 (otherwise)."""
        terms = {}
        for m, c in self._terms.items():
            has = any(s == HBAR for s, _ in m)
            if has != degree_zero:
                terms[m] = c
        return ScalarPoly(terms)

    # -- identity --

    def __eq__(self, other) -> bool:
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self):
        return hash(frozenset(self._terms.items()))

    def __repr__(self):
        return f"ScalarPoly({self})"

    def __str__(self):
        if not self._terms:
            return "0"
        pieces: list[tuple[str, str]] = []  # (sign, body)
        for m, c in self.sorted_terms():
            mono = _mono_str(m)
            if c.is_real:
                sign = "-" if c.re < 0 else "+"
                mag = abs(c.re)
                if not mono:
                    body = str(mag)
                elif mag == 1:
                    body = mono
                else:
                    body = f"{mag}*{mono}"
            elif c.re == 0:
                sign = "-" if c.im < 0 else "+"
                mag = abs(c.im)
                im = "i" if mag == 1 else f"{mag}*i"
                body = im if not mono else f"{im}*{mono}"
            else:
                sign = "+"
                body = f"({c})" if not mono else f"({c})*{mono}"
            pieces.append((sign, body))
        first_sign, first_body = pieces[0]
        out = first_body if first_sign == "+" else f"-{first_body}"
        for sign, body in pieces[1:]:
            out += f" {sign} {body}"
        return out


def _multi_term_div(num: ScalarPoly, div: ScalarPoly) -> ScalarPoly:
    """Division by a multi-term polynomial; raises if not exact."""
    symbols = sorted(num.symbols() | div.symbols())
    index = {s: i for i, s in enumerate(symbols)}

    def vec(m: Monomial):
        v = [0] * len(symbols)
        for s, e in m:
            v[index[s]] = e
        return (sum(v), tuple(v))  # graded-lex key

    def lead(p: ScalarPoly):
        return max(p.items(), key=lambda kv: vec(kv[0]))

    dm, dc = lead(div)
    dm_inv = _mono_pow(dm, -1)
    quotient = ScalarPoly.zero()
    rem = num
    max_steps = (len(num._terms) + 1) * (len(div._terms) + 1) + 64
    steps = 0
    while not rem.is_zero:
        steps += 1
        if steps > max_steps:
            raise EqlabError("polynomial division is not exact")
        rm, rc = lead(rem)
        qt = ScalarPoly({_mono_mul(rm, dm_inv): rc / dc})
        quotient = quotient + qt
        rem = rem - qt * div
    return quotient


def sym(name: str) -> ScalarPoly:
    """Shorthand for a degree-1 symbol polynomial."""
    return ScalarPoly.symbol(name)


def hbar() -> ScalarPoly:
    return ScalarPoly.symbol(HBAR)


def rational(num: int, den: int = 1) -> ScalarPoly:
    return ScalarPoly.const(Fraction(num, den))


def imag_unit() -> ScalarPoly:
    return ScalarPoly.const(CR_I)


def fraction_sqrt(x: Fraction) -> Fraction | None:
    """Exact square root of a non-negative rational, or None."""
    if x < 0:
        return None
    if x == 0:
        return Fraction(0)
    rn = math.isqrt(x.numerator)
    rd = math.isqrt(x.denominator)
    if rn * rn == x.numerator and rd * rd == x.denominator:
        return Fraction(rn, rd)
    return None
