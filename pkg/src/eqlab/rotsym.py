"""Rotationally symmetric oscillator model with a reducible operator pair.

The classical target is N oscillators with a rotation-invariant quartic:

    H_cl = 1/2 sum_n (p_n^2 + m0^2 q_n^2) + lambda0 (sum_n q_n^2)^2

The quantum construction uses two commuting canonical sets {P_n, Q_n} and
{R_n, S_n} with a fiducial vector pinned by

    [m(Q_n + zeta S_n) + i P_n] |0> = 0
    [m(S_n + zeta Q_n) + i R_n] |0> = 0        0 < zeta < 1

and a Hamiltonian whose quadratic and quartic pieces are Wick ordered in
that frame, with displacements acting on the {P_n, Q_n} set only.  The
coherent-state expectation then reproduces H_cl exactly with

    m0^2 = m^2 (1 + zeta^2),      lambda0 = v zeta^4 m^4.

Without the second set, the same Wick-ordered quartic unavoidably drags
p_n^2 into the quartic term; verify_match exposes both facts.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .dsl import CheckedModel, ModelSpec, parse_model, validate
from .errors import ModelError, ZetaOutOfRange
from .scalars import ScalarPoly, fraction_sqrt, sym


def _as_fraction(x, what: str) -> Fraction:
    if isinstance(x, (int, Fraction)):
        return Fraction(x)
    raise TypeError(f"{what} must be an exact rational, got {type(x).__name__}")


@dataclass(frozen=True)
class RotsymParams:
    n_modes: int
    m: Fraction
    zeta: Fraction
    v: Fraction

    def __post_init__(self):
        if self.n_modes < 1:
            raise ValueError("n_modes must be >= 1")
        object.__setattr__(self, "m", _as_fraction(self.m, "m"))
        object.__setattr__(self, "zeta", _as_fraction(self.zeta, "zeta"))
        object.__setattr__(self, "v", _as_fraction(self.v, "v"))
        if self.m <= 0:
            raise ValueError("m must be positive")
        if not (0 < self.zeta < 1):
            raise ZetaOutOfRange(f"zeta = {self.zeta} outside (0, 1)")
        if self.v < 0:
            raise ValueError("v must be non-negative")

    @property
    def m0_squared(self) -> Fraction:
        return effective_parameters(self.m, self.zeta, self.v)[0]

    @property
    def lambda0(self) -> Fraction:
        return effective_parameters(self.m, self.zeta, self.v)[1]


def effective_parameters(m: Fraction, zeta: Fraction, v: Fraction) -> tuple:
    """(m0^2, lambda0) = (m^2 (1 + zeta^2), v zeta^4 m^4), exact."""
    m = _as_fraction(m, "m")
    zeta = _as_fraction(zeta, "zeta")
    v = _as_fraction(v, "v")
    if not (0 < zeta < 1):
        raise ZetaOutOfRange(f"zeta = {zeta} outside (0, 1)")
    return (m * m * (1 + zeta * zeta), v * zeta ** 4 * m ** 4)


def invert_parameters(m0_squared, lambda0, zeta) -> tuple:
    """Recover (m, v) from (m0^2, lambda0, zeta).

    m^2 = m0^2/(1+zeta^2) and v = lambda0/(zeta^4 m^4) are exact; m itself
    is returned as an exact Fraction when m^2 is a perfect rational square,
    as a float otherwise.
    """
    m0_squared = _as_fraction(m0_squared, "m0_squared")
    lambda0 = _as_fraction(lambda0, "lambda0")
    zeta = _as_fraction(zeta, "zeta")
    if not (0 < zeta < 1):
        raise ZetaOutOfRange(f"zeta = {zeta} outside (0, 1)")
    if m0_squared <= 0:
        raise ValueError("m0_squared must be positive")
    if lambda0 < 0:
        raise ValueError("lambda0 must be non-negative")
    m_squared = m0_squared / (1 + zeta * zeta)
    v = lambda0 / (zeta ** 4 * m_squared ** 2)
    root = fraction_sqrt(m_squared)
    m = root if root is not None else math.sqrt(float(m_squared))
    return (m, v)


def build_classical(n_modes: int, m0_squared, lambda0) -> ScalarPoly:
    """The classical Hamiltonian as an exact polynomial in p<n>, q<n>.

    m0_squared/lambda0 may be exact rationals or symbol polynomials (pass
    e.g. sym("m0")**2 to keep the mass symbolic).
    """
    if n_modes < 1:
        raise ValueError("n_modes must be >= 1")
    msq = m0_squared if isinstance(m0_squared, ScalarPoly) else \
        ScalarPoly.const(_as_fraction(m0_squared, "m0_squared"))
    lam = lambda0 if isinstance(lambda0, ScalarPoly) else \
        ScalarPoly.const(_as_fraction(lambda0, "lambda0"))
    half = ScalarPoly.const(Fraction(1, 2))
    quad = ScalarPoly.zero()
    qsq = ScalarPoly.zero()
    for n in range(n_modes):
        quad = quad + sym(f"p{n}") ** 2 + msq * sym(f"q{n}") ** 2
        qsq = qsq + sym(f"q{n}") ** 2
    return half * quad + lam * qsq ** 2


def reducible_model_source(params: RotsymParams, truncation: int = 24) -> str:
    """Model-language source for the reducible construction.

    The ordering frame is spelled out explicitly (same conditions as the
    fiducial), so the choice is auditable in the generated text.
    """
    n = params.n_modes
    lines = [
        "# rotationally symmetric model, reducible operator pair",
        "param hbar = 1",
        f"param m = {params.m}",
        f"param zeta = {params.zeta}",
        f"param v = {params.v}",
        f"set pq {n}",
        f"set rs {n}",
    ]
    for k in range(n):
        lines.append(f"frame zf : m*(Q[{k}] + zeta*S[{k}]) + i*P[{k}]")
        lines.append(f"frame zf : m*(S[{k}] + zeta*Q[{k}]) + i*R[{k}]")
    lines.append("fiducial zf")
    lines.append("shifted pq")
    lines.append(f"truncation {truncation}")
    quad_pq = " + ".join(
        f"P[{k}]^2 + m^2*(Q[{k}] + zeta*S[{k}])^2" for k in range(n)
    )
    quad_rs = " + ".join(
        f"R[{k}]^2 + m^2*(S[{k}] + zeta*Q[{k}])^2" for k in range(n)
    )
    lines.append(
        f"H = 1/2*:[ {quad_pq} ]:@zf"
        f" + 1/2*:[ {quad_rs} ]:@zf"
        f" + v*:[ ({quad_rs})^2 ]:@zf"
    )
    return "\n".join(lines) + "\n"


def irreducible_model_source(n_modes: int, m: Fraction, w: Fraction,
                             truncation: int = 24) -> str:
    """Single-set contrast model: Wick-ordered quadratic plus coupling-w
    quartic of the same quadratic.  Its coherent expectation keeps p_n
    inside the quartic, unlike the reducible construction."""
    m = _as_fraction(m, "m")
    w = _as_fraction(w, "w")
    lines = [
        "# rotationally symmetric interaction with a single (irreducible) set",
        "param hbar = 1",
        f"param m = {m}",
        f"param w = {w}",
        f"set pq {n_modes}",
    ]
    for k in range(n_modes):
        lines.append(f"frame vac : m*Q[{k}] + i*P[{k}]")
    lines.append("fiducial vac")
    lines.append("shifted pq")
    lines.append(f"truncation {truncation}")
    quad = " + ".join(f"P[{k}]^2 + m^2*Q[{k}]^2" for k in range(n_modes))
    lines.append(f"H = 1/2*:[ {quad} ]:@vac + w*:[ ({quad})^2 ]:@vac")
    return "\n".join(lines) + "\n"


def build_reducible_model(params: RotsymParams, truncation: int = 24) -> CheckedModel:
    source = reducible_model_source(params, truncation)
    result = parse_model(source)
    if not result.ok:
        raise ModelError(
            "generated model failed to parse: "
            + "; ".join(d.render() for d in result.diagnostics)
        )
    return validate(result.spec, name=f"rotsym(N={params.n_modes})")


@dataclass
class MatchReport:
    """Outcome of checking the reducible construction against its target."""

    params: RotsymParams
    exact_match: bool
    classical_rendered: str
    wcp_rendered: str
    numeric_points: list  # dicts: p, q, numeric, classical, abs_dev
    max_abs_dev: float | None
    truncation: int | None

    def to_json_dict(self) -> dict:
        return {
            "N": self.params.n_modes,
            "m": str(self.params.m),
            "zeta": str(self.params.zeta),
            "v": str(self.params.v),
            "m0sq": str(self.params.m0_squared),
            "lambda0": str(self.params.lambda0),
            "exact_match": self.exact_match,
            "classical_rendered": self.classical_rendered,
            "wcp_rendered": self.wcp_rendered,
            "numeric_points": self.numeric_points,
            "max_abs_dev": self.max_abs_dev,
            "truncation": self.truncation,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=2)


def verify_match(
    params: RotsymParams,
    *,
    truncation: int = 24,
    numeric: bool | None = None,
    grid: Sequence[float] = (-1.0, 0.0, 1.0),
) -> MatchReport:
    """Exact symbolic comparison of the coherent-state expectation with the
    classical target, plus (optionally) numeric spot checks.

    The symbolic check is syntactic equality of polynomials; the numeric
    part builds the truncated model and evaluates a small (p, q) grid.
    Numeric checks default to on for N=1 only (cost grows as D^(2N)).
    """
    model = build_reducible_model(params, truncation)
    wcp = model.wcp_polynomial()
    classical = build_classical(params.n_modes, params.m0_squared, params.lambda0)
    exact = wcp == classical

    if numeric is None:
        numeric = params.n_modes == 1
    points = []
    max_dev = None
    if numeric:
        from .correspondence import wcp_numeric

        pts = []
        for pval in grid:
            for qval in grid:
                pts.append(([pval] * params.n_modes, [qval] * params.n_modes))
        report = wcp_numeric(model, pts)
        for pt in report.points:
            cl = classical.evaluate(
                {**{f"p{k}": pt.p[k] for k in range(params.n_modes)},
                 **{f"q{k}": pt.q[k] for k in range(params.n_modes)},
                 "hbar": float(model.hbar_value)}
            ).real
            points.append({
                "p": list(pt.p),
                "q": list(pt.q),
                "numeric": pt.numeric,
                "classical": cl,
                "abs_dev": abs(pt.numeric - cl),
            })
        max_dev = max(pt["abs_dev"] for pt in points)

    return MatchReport(
        params=params,
        exact_match=exact,
        classical_rendered=str(classical),
        wcp_rendered=str(wcp),
        numeric_points=points,
        max_abs_dev=max_dev,
        truncation=truncation if numeric else None,
    )
