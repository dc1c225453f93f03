"""Model-definition language (.eqm files).

Line-oriented statements; newlines inside parentheses or ordering brackets
do not terminate a statement.  Comments run from `#` to end of line.

    param <name> [= <rational>]     declare a parameter (optionally bound)
    set <id> <N>                    declare an operator set with N modes
    frame <name> : <expr>           add one annihilation condition to a frame
    fiducial <name>                 pick the frame whose conditions pin |0>
    shifted <id> [<id> ...]         sets acted on by phase-space displacement
    truncation [<id>] <D>           per-mode Fock dimension (optionally per set)
    H = <expr>                      the Hamiltonian

Expression grammar (EBNF, also in the README):

    expr    = term { ("+" | "-") term } ;
    term    = unary { "*" unary } ;
    unary   = "-" unary | "+" unary | power ;
    power   = atom [ "^" [ "-" ] INT ] ;
    atom    = RATIONAL | "i" | IDENT | generator | "(" expr ")" | wick ;
    wick    = ":[" expr "]:" "@" IDENT ;
    generator = ("Q" | "P" | "S" | "R") "[" INT "]" ;
    RATIONAL  = INT [ "/" INT ] ;

Operator precedence: ^ binds tighter than unary minus, which binds tighter
than *, which binds tighter than +/-.  Q/P address the first declared set,
S/R the second.  Numbers are exact rationals; `i` is the imaginary unit;
`:[ ... ]: @name` marks a region to be Wick-ordered in the named frame.

Parsing never raises on bad input: every failure is a ParseDiagnostic with
a 1-based (line, column, length) span; columns may point one past the end
of a line for missing-token errors.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from .errors import (
    DegreeLimitError,
    EqlabError,
    FrameError,
    GramNotPositiveDefinite,
    ModelError,
    NonHermitianHamiltonian,
    SymbolicGramError,
)
from .frames import FiducialFrame, wick_order
from .operators import Generator, Kind, OperatorExpr, hermitian_check, render
from .scalars import CR_I, ScalarPoly, sym

GENERATOR_LETTERS = {"Q": (0, Kind.POSITION), "P": (0, Kind.MOMENTUM),
                     "S": (1, Kind.POSITION), "R": (1, Kind.MOMENTUM)}
_RESERVED = {"i", "Q", "P", "S", "R", "param", "set", "frame", "fiducial",
             "shifted", "truncation", "H"}


# --------------------------------------------------------------------------
# expression AST


@dataclass(frozen=True)
class Lit:
    value: Fraction

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("literals are non-negative; use Neg")


@dataclass(frozen=True)
class Imag:
    pass


@dataclass(frozen=True)
class Ref:
    name: str


@dataclass(frozen=True)
class Gen:
    set_id: str
    mode: int
    kind: Kind


@dataclass(frozen=True)
class Neg:
    inner: object


@dataclass(frozen=True)
class Add:
    items: tuple


@dataclass(frozen=True)
class Mul:
    items: tuple


@dataclass(frozen=True)
class Pow:
    base: object
    exponent: int


@dataclass(frozen=True)
class WickRegion:
    inner: object
    frame: str


# --------------------------------------------------------------------------
# model spec


@dataclass(frozen=True)
class ModelSpec:
    parameters: tuple  # ((name, Fraction | None), ...)
    operator_sets: tuple  # ((set_id, n_modes), ...)
    frames: tuple  # ((name, (expr, ...)), ...)
    fiducial: str | None
    shifted_sets: tuple
    truncation_default: int | None
    truncation_overrides: tuple  # ((set_id, D), ...)
    hamiltonian: object | None

    @property
    def total_modes(self) -> int:
        return sum(n for _, n in self.operator_sets)

    @property
    def set_order(self) -> tuple:
        return tuple(s for s, _ in self.operator_sets)

    def parameter_values(self) -> dict:
        return {name: value for name, value in self.parameters if value is not None}

    def fiducial_conditions(self) -> tuple:
        for name, conds in self.frames:
            if name == self.fiducial:
                return conds
        return ()


@dataclass(frozen=True)
class ParseDiagnostic:
    severity: str  # "error" | "warning"
    line: int
    column: int
    length: int
    message: str
    expected: str | None = None

    def render(self, filename: str = "<input>") -> str:
        return f"{filename}:{self.line}:{self.column}: {self.severity}: {self.message}"


@dataclass
class ParseResult:
    spec: ModelSpec | None
    diagnostics: list

    @property
    def ok(self) -> bool:
        return self.spec is not None


# --------------------------------------------------------------------------
# lexer

_SIMPLE = {"+": "PLUS", "-": "MINUS", "*": "STAR", "^": "CARET", "/": "SLASH",
           "=": "EQUALS", "(": "LPAREN", ")": "RPAREN", "[": "LBRACK",
           "]": "RBRACK", ":": "COLON", "@": "AT"}


@dataclass(frozen=True)
class Token:
    type: str
    text: str
    line: int
    column: int

    @property
    def length(self) -> int:
        return max(1, len(self.text))


def _lex(text: str, diagnostics: list) -> list:
    tokens: list[Token] = []
    line, col = 1, 1
    depth = 0
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
                col += 1
            continue
        if ch == "\n":
            if depth == 0:
                tokens.append(Token("NEWLINE", "\n", line, col))
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(Token("IDENT", text[i:j], line, col))
            col += j - i
            i = j
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            tokens.append(Token("INT", text[i:j], line, col))
            col += j - i
            i = j
            continue
        if ch == ":" and i + 1 < n and text[i + 1] == "[":
            tokens.append(Token("WICKOPEN", ":[", line, col))
            depth += 1
            i += 2
            col += 2
            continue
        if ch == "]" and i + 1 < n and text[i + 1] == ":":
            tokens.append(Token("WICKCLOSE", "]:", line, col))
            depth = max(0, depth - 1)
            i += 2
            col += 2
            continue
        if ch in _SIMPLE:
            tokens.append(Token(_SIMPLE[ch], ch, line, col))
            if ch in "([":
                depth += 1
            elif ch in ")]":
                depth = max(0, depth - 1)
            i += 1
            col += 1
            continue
        diagnostics.append(ParseDiagnostic(
            "error", line, col, 1, f"unexpected character {ch!r}"))
        i += 1
        col += 1
    tokens.append(Token("EOF", "", line, col))
    return tokens


# --------------------------------------------------------------------------
# parser

class _StatementError(Exception):
    """Internal: abandon the current statement after a diagnostic."""


class _Parser:
    def __init__(self, text: str):
        self.diagnostics: list[ParseDiagnostic] = []
        self.tokens = _lex(text, self.diagnostics)
        self.pos = 0
        # accumulating model state
        self.params: dict[str, Fraction | None] = {}
        self.sets: list[tuple[str, int]] = []
        self.frames: dict[str, list] = {}
        self.frame_order: list[str] = []
        self.fiducial: str | None = None
        self.shifted: list[str] = []
        self.trunc_default: int | None = None
        self.trunc_overrides: dict[str, int] = {}
        self.hamiltonian = None

    # -- token helpers --

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        t = self.tokens[self.pos]
        if t.type != "EOF":
            self.pos += 1
        return t

    def error(self, tok: Token, message: str, expected: str | None = None):
        line, column, length = tok.line, tok.column, tok.length
        if tok.type == "EOF" and self.pos > 0:
            # point just past the last real token, not past the final newline
            prev = self.tokens[self.pos - 1]
            line, column, length = prev.line, prev.column + prev.length, 1
        self.diagnostics.append(ParseDiagnostic(
            "error", line, column, length, message, expected))
        raise _StatementError()

    def expect(self, type_: str, what: str) -> Token:
        t = self.peek()
        if t.type != type_:
            shown = t.text if t.text else "end of input"
            self.error(t, f"expected {what}, found {shown!r}", expected=what)
        return self.advance()

    def skip_statement(self):
        while self.peek().type not in ("NEWLINE", "EOF"):
            self.advance()

    # -- driver --

    def parse(self) -> ParseResult:
        while self.peek().type != "EOF":
            t = self.peek()
            if t.type == "NEWLINE":
                self.advance()
                continue
            try:
                self.statement()
            except _StatementError:
                self.skip_statement()
        errors = [d for d in self.diagnostics if d.severity == "error"]
        if errors:
            return ParseResult(None, self.diagnostics)
        spec = ModelSpec(
            parameters=tuple(self.params.items()),
            operator_sets=tuple(self.sets),
            frames=tuple((n, tuple(self.frames[n])) for n in self.frame_order),
            fiducial=self.fiducial,
            shifted_sets=tuple(self.shifted),
            truncation_default=self.trunc_default,
            truncation_overrides=tuple(sorted(self.trunc_overrides.items())),
            hamiltonian=self.hamiltonian,
        )
        return ParseResult(spec, self.diagnostics)

    def end_statement(self):
        t = self.peek()
        if t.type not in ("NEWLINE", "EOF"):
            self.error(t, f"unexpected {t.text!r} after statement",
                       expected="end of line")
        if t.type == "NEWLINE":
            self.advance()

    def statement(self):
        t = self.peek()
        if t.type != "IDENT":
            self.error(t, f"expected a statement keyword, found {t.text!r}")
        kw = t.text
        if kw == "param":
            self.advance()
            self.param_statement()
        elif kw == "set":
            self.advance()
            self.set_statement()
        elif kw == "frame":
            self.advance()
            self.frame_statement()
        elif kw == "fiducial":
            self.advance()
            self.fiducial_statement()
        elif kw == "shifted":
            self.advance()
            self.shifted_statement()
        elif kw == "truncation":
            self.advance()
            self.truncation_statement()
        elif kw == "H":
            self.advance()
            self.hamiltonian_statement()
        else:
            self.error(t, f"unknown statement {kw!r}",
                       expected="param/set/frame/fiducial/shifted/truncation/H")
        self.end_statement()

    # -- statements --

    def _fresh_name(self, tok: Token) -> str:
        name = tok.text
        if name in _RESERVED:
            self.error(tok, f"{name!r} is reserved")
        if len(name) >= 2 and name[0] in "pq" and name[1:].isdigit():
            self.error(tok, f"{name!r} collides with phase-space shift symbols")
        return name

    def param_statement(self):
        tok = self.expect("IDENT", "parameter name")
        name = self._fresh_name(tok)
        if name in self.params:
            self.error(tok, f"duplicate parameter {name!r}")
        value = None
        if self.peek().type == "EQUALS":
            self.advance()
            value = self.signed_rational()
        self.params[name] = value

    def set_statement(self):
        tok = self.expect("IDENT", "set id")
        name = self._fresh_name(tok)
        if any(s == name for s, _ in self.sets):
            self.error(tok, f"duplicate set {name!r}")
        if len(self.sets) >= 2:
            self.error(tok, "at most two operator sets are supported")
        count = self.expect("INT", "mode count")
        n = int(count.text)
        if n < 1:
            self.error(count, "mode count must be >= 1")
        self.sets.append((name, n))

    def frame_statement(self):
        tok = self.expect("IDENT", "frame name")
        name = tok.text
        if name in _RESERVED:
            self.error(tok, f"{name!r} is reserved")
        self.expect("COLON", "':'")
        cond = self.expr()
        if name not in self.frames:
            self.frames[name] = []
            self.frame_order.append(name)
        self.frames[name].append(cond)

    def fiducial_statement(self):
        tok = self.expect("IDENT", "frame name")
        if self.fiducial is not None:
            self.error(tok, "duplicate fiducial statement")
        if tok.text not in self.frames:
            self.error(tok, f"unknown frame {tok.text!r}")
        self.fiducial = tok.text

    def shifted_statement(self):
        got_any = False
        while self.peek().type == "IDENT":
            tok = self.advance()
            if not any(s == tok.text for s, _ in self.sets):
                self.error(tok, f"unknown set {tok.text!r}")
            if tok.text in self.shifted:
                self.error(tok, f"set {tok.text!r} already shifted")
            self.shifted.append(tok.text)
            got_any = True
        if not got_any:
            self.error(self.peek(), "expected at least one set id")

    def truncation_statement(self):
        t = self.peek()
        set_id = None
        if t.type == "IDENT":
            self.advance()
            if not any(s == t.text for s, _ in self.sets):
                self.error(t, f"unknown set {t.text!r}")
            set_id = t.text
        dtok = self.expect("INT", "truncation dimension")
        d = int(dtok.text)
        if set_id is None:
            if self.trunc_default is not None:
                self.error(dtok, "duplicate truncation statement")
            self.trunc_default = d
        else:
            if set_id in self.trunc_overrides:
                self.error(dtok, f"duplicate truncation for set {set_id!r}")
            self.trunc_overrides[set_id] = d

    def hamiltonian_statement(self):
        tok = self.expect("EQUALS", "'='")
        if self.hamiltonian is not None:
            self.error(tok, "duplicate Hamiltonian")
        self.hamiltonian = self.expr()

    # -- expressions --

    def signed_rational(self) -> Fraction:
        neg = False
        while self.peek().type in ("MINUS", "PLUS"):
            if self.advance().type == "MINUS":
                neg = not neg
        num = self.expect("INT", "number")
        value = Fraction(int(num.text))
        if self.peek().type == "SLASH":
            self.advance()
            den = self.expect("INT", "denominator")
            if int(den.text) == 0:
                self.error(den, "zero denominator")
            value = Fraction(int(num.text), int(den.text))
        return -value if neg else value

    def expr(self):
        items = [self.term()]
        signs = [False]
        while self.peek().type in ("PLUS", "MINUS"):
            neg = self.advance().type == "MINUS"
            items.append(self.term())
            signs.append(neg)
        if len(items) == 1 and not signs[0]:
            return items[0]
        flat = []
        for item, neg in zip(items, signs):
            flat.append(Neg(item) if neg else item)
        return Add(tuple(flat))

    def term(self):
        items = [self.unary()]
        while self.peek().type == "STAR":
            self.advance()
            items.append(self.unary())
        return items[0] if len(items) == 1 else Mul(tuple(items))

    def unary(self):
        if self.peek().type == "MINUS":
            self.advance()
            return Neg(self.unary())
        if self.peek().type == "PLUS":
            self.advance()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek().type == "CARET":
            self.advance()
            neg = False
            if self.peek().type == "MINUS":
                self.advance()
                neg = True
            etok = self.expect("INT", "exponent")
            e = int(etok.text)
            if e > 64:
                self.error(etok, f"exponent {e} too large (cap 64)")
            return Pow(base, -e if neg else e)
        return base

    def atom(self):
        t = self.peek()
        if t.type == "INT":
            self.advance()
            value = Fraction(int(t.text))
            if self.peek().type == "SLASH":
                self.advance()
                den = self.expect("INT", "denominator")
                if int(den.text) == 0:
                    self.error(den, "zero denominator")
                value = Fraction(int(t.text), int(den.text))
            return Lit(value)
        if t.type == "IDENT":
            if t.text == "i":
                self.advance()
                return Imag()
            if t.text in GENERATOR_LETTERS:
                return self.generator()
            if t.text in self.params:
                self.advance()
                return Ref(t.text)
            self.error(t, f"unknown identifier {t.text!r}",
                       expected="declared parameter or generator")
        if t.type == "LPAREN":
            self.advance()
            inner = self.expr()
            self.expect("RPAREN", "')'")
            return inner
        if t.type == "WICKOPEN":
            self.advance()
            inner = self.expr()
            self.expect("WICKCLOSE", "']:'")
            self.expect("AT", "'@'")
            ftok = self.expect("IDENT", "frame name")
            if ftok.text not in self.frames:
                self.error(ftok, f"unknown frame {ftok.text!r}")
            return WickRegion(inner, ftok.text)
        shown = t.text if t.text else "end of input"
        self.error(t, f"expected an expression, found {shown!r}",
                   expected="expression")

    def generator(self):
        letter = self.advance()
        slot, kind = GENERATOR_LETTERS[letter.text]
        if slot >= len(self.sets):
            which = "first" if slot == 0 else "second"
            self.error(letter,
                       f"generator letter {letter.text!r} needs a {which} "
                       "operator set declared before use")
        set_id, n_modes = self.sets[slot]
        self.expect("LBRACK", "'['")
        mtok = self.expect("INT", "mode index")
        mode = int(mtok.text)
        if mode >= n_modes:
            self.error(mtok,
                       f"mode {mode} out of range for set {set_id!r} "
                       f"({n_modes} modes)")
        self.expect("RBRACK", "']'")
        return Gen(set_id, mode, kind)


def parse_model(text: str) -> ParseResult:
    """Parse model source; never raises on malformed input."""
    return _Parser(text).parse()


def parse_expression(text: str, spec: ModelSpec) -> tuple:
    """Parse a bare expression in a model's namespace.

    Returns (ast, diagnostics); ast is None when there are errors.
    """
    p = _Parser("")
    p.params = dict(spec.parameters)
    p.sets = list(spec.operator_sets)
    p.frames = {name: list(conds) for name, conds in spec.frames}
    p.diagnostics = []
    p.tokens = _lex(text, p.diagnostics)
    p.pos = 0
    try:
        ast = p.expr()
        t = p.peek()
        if t.type != "EOF":
            p.error(t, f"unexpected {t.text!r} after expression")
    except _StatementError:
        ast = None
    errors = [d for d in p.diagnostics if d.severity == "error"]
    return (None if errors else ast), p.diagnostics


# --------------------------------------------------------------------------
# rendering

def _gen_letter(node: Gen, set_order) -> str:
    slot = list(set_order).index(node.set_id)
    letters = ("Q", "P") if slot == 0 else ("S", "R")
    return letters[0] if node.kind == Kind.POSITION else letters[1]


def render_expr_in(node, set_order) -> str:
    """render_expr with generator letters resolved for a set order."""

    def walk(n, level):
        if isinstance(n, Gen):
            text = f"{_gen_letter(n, set_order)}[{n.mode}]"
            return text
        if isinstance(n, Lit):
            text = str(n.value)
            return f"({text})" if ("/" in text and level > 1) else text
        if isinstance(n, Imag):
            return "i"
        if isinstance(n, Ref):
            return n.name
        if isinstance(n, Neg):
            inner = walk(n.inner, 2)
            text = f"-{inner}"
            return f"({text})" if level > 2 else text
        if isinstance(n, Add):
            parts = []
            for i, item in enumerate(n.items):
                if i == 0:
                    parts.append(walk(item, 0))
                elif isinstance(item, Neg):
                    parts.append(f" - {walk(item.inner, 2)}")
                else:
                    parts.append(f" + {walk(item, 1)}")
            text = "".join(parts)
            return f"({text})" if level > 0 else text
        if isinstance(n, Mul):
            text = "*".join(walk(item, 2) for item in n.items)
            return f"({text})" if level > 1 else text
        if isinstance(n, Pow):
            return f"{walk(n.base, 4)}^{n.exponent}"
        if isinstance(n, WickRegion):
            return f":[ {walk(n.inner, 0)} ]:@{n.frame}"
        raise TypeError(f"not an AST node: {n!r}")

    return walk(node, 0)


def render_model(spec: ModelSpec) -> str:
    lines = []
    for name, value in spec.parameters:
        lines.append(f"param {name}" if value is None else f"param {name} = {value}")
    for set_id, n in spec.operator_sets:
        lines.append(f"set {set_id} {n}")
    for name, conds in spec.frames:
        for cond in conds:
            lines.append(f"frame {name} : {render_expr_in(cond, spec.set_order)}")
    if spec.fiducial:
        lines.append(f"fiducial {spec.fiducial}")
    if spec.shifted_sets:
        lines.append("shifted " + " ".join(spec.shifted_sets))
    if spec.truncation_default is not None:
        lines.append(f"truncation {spec.truncation_default}")
    for set_id, d in spec.truncation_overrides:
        lines.append(f"truncation {set_id} {d}")
    if spec.hamiltonian is not None:
        lines.append(f"H = {render_expr_in(spec.hamiltonian, spec.set_order)}")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# validation

@dataclass
class CheckedModel:
    """A validated model: constructed frames, resolved Hamiltonian."""

    spec: ModelSpec
    name: str
    parameters: dict  # name -> Fraction (bound values only)
    hbar_value: Fraction
    frames: dict  # name -> FiducialFrame
    fiducial_frame: FiducialFrame | None
    hamiltonian: OperatorExpr
    shifted_sets: tuple
    truncations: dict  # (set_id, mode_index) -> D

    @property
    def set_order(self) -> tuple:
        return self.spec.set_order

    @property
    def modes(self) -> tuple:
        out = []
        for set_id, n in self.spec.operator_sets:
            out.extend((set_id, k) for k in range(n))
        return tuple(out)

    @property
    def shifted_modes(self) -> tuple:
        return tuple((s, k) for s, k in self.modes if s in self.shifted_sets)

    def numeric_parameters(self) -> dict:
        return {name: float(v) for name, v in self.parameters.items()}

    def wcp_polynomial(self) -> ScalarPoly:
        from .frames import wcp_symbolic
        if self.fiducial_frame is None:
            raise ModelError("model has no fiducial frame")
        return wcp_symbolic(self.hamiltonian, self.fiducial_frame, self.shifted_sets)


def _eval_ast(node, params: Mapping[str, Fraction], frames: Mapping[str, FiducialFrame]) -> OperatorExpr:
    if isinstance(node, Lit):
        return OperatorExpr.scalar(ScalarPoly.const(node.value))
    if isinstance(node, Imag):
        return OperatorExpr.scalar(ScalarPoly.const(CR_I))
    if isinstance(node, Ref):
        if node.name != "hbar" and node.name in params:
            return OperatorExpr.scalar(ScalarPoly.const(params[node.name]))
        return OperatorExpr.scalar(sym(node.name))
    if isinstance(node, Gen):
        return OperatorExpr.from_generator(Generator(node.set_id, node.mode, node.kind))
    if isinstance(node, Neg):
        return -_eval_ast(node.inner, params, frames)
    if isinstance(node, Add):
        out = OperatorExpr.zero()
        for item in node.items:
            out = out + _eval_ast(item, params, frames)
        return out
    if isinstance(node, Mul):
        out = OperatorExpr.scalar(1)
        for item in node.items:
            out = out * _eval_ast(item, params, frames)
        return out
    if isinstance(node, Pow):
        base = _eval_ast(node.base, params, frames)
        if node.exponent >= 0:
            return base ** node.exponent
        if base.is_scalar:
            return OperatorExpr.scalar(base.scalar_part() ** node.exponent)
        raise ModelError("negative powers of operators are not defined")
    if isinstance(node, WickRegion):
        frame = frames.get(node.frame)
        if frame is None:
            raise ModelError(
                f"ordering region references frame {node.frame!r}, which is "
                "not available in this context"
            )
        inner = _eval_ast(node.inner, params, frames)
        return wick_order(inner, frame)
    raise TypeError(f"not an AST node: {node!r}")


def evaluate_expression(node, checked: "CheckedModel") -> OperatorExpr:
    """Evaluate a parsed expression in a validated model's environment."""
    return _eval_ast(node, checked.parameters, checked.frames)


def validate(
    spec: ModelSpec,
    *,
    name: str = "model",
    param_overrides: Mapping[str, Fraction] | None = None,
    truncation_override: int | None = None,
) -> CheckedModel:
    """Build frames, verify their invariants, resolve the Hamiltonian.

    Raises ModelError (or a more specific subclass of EqlabError, e.g.
    GramNotPositiveDefinite / NonHermitianHamiltonian) on any failure.
    """
    declared = dict(spec.parameters)
    params: dict[str, Fraction] = {k: v for k, v in declared.items() if v is not None}
    for key, value in (param_overrides or {}).items():
        if key not in declared:
            raise ModelError(f"unknown parameter override {key!r}")
        params[key] = Fraction(value)

    hbar_value = params.get("hbar", Fraction(1))

    frames: dict[str, FiducialFrame] = {}
    for fname, conds in spec.frames:
        exprs = []
        for cond in conds:
            e = _eval_ast(cond, params, {})
            missing = e.symbols() - {"hbar"}
            if missing:
                raise ModelError(
                    f"frame {fname!r} uses unbound parameters: "
                    + ", ".join(sorted(missing))
                )
            exprs.append(e)
        frame = FiducialFrame(exprs, label=fname)
        try:
            frame.require_positive_definite()
        except SymbolicGramError as exc:
            raise ModelError(str(exc)) from exc
        frames[fname] = frame

    fiducial_frame = frames.get(spec.fiducial) if spec.fiducial else None
    if spec.fiducial and fiducial_frame is None:
        raise ModelError(f"fiducial frame {spec.fiducial!r} not declared")
    if fiducial_frame is not None:
        if len(fiducial_frame.conditions) != spec.total_modes:
            raise ModelError(
                f"fiducial frame has {len(fiducial_frame.conditions)} conditions "
                f"for {spec.total_modes} modes"
            )

    if spec.hamiltonian is None:
        raise ModelError("model has no Hamiltonian")
    try:
        hamiltonian = _eval_ast(spec.hamiltonian, params, frames)
    except DegreeLimitError as exc:
        raise ModelError(str(exc)) from exc
    if not hermitian_check(hamiltonian):
        raise NonHermitianHamiltonian(f"{name}: Hamiltonian is not self-adjoint")

    trunc_default = truncation_override or spec.truncation_default
    if trunc_default is None:
        trunc_default = 64 if spec.total_modes == 1 else 24
    overrides = dict(spec.truncation_overrides)
    truncations = {}
    for set_id, n in spec.operator_sets:
        d = overrides.get(set_id, trunc_default)
        if truncation_override is not None:
            d = truncation_override
        if d < 4:
            raise ModelError(f"truncation {d} for set {set_id!r} is below 4")
        for k in range(n):
            truncations[(set_id, k)] = d

    return CheckedModel(
        spec=spec,
        name=name,
        parameters=params,
        hbar_value=hbar_value,
        frames=frames,
        fiducial_frame=fiducial_frame,
        hamiltonian=hamiltonian,
        shifted_sets=spec.shifted_sets,
        truncations=truncations,
    )
