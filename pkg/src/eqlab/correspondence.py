"""Numeric/symbolic comparison of coherent-state expectations and the
phase-space metric induced on coherent rays.

wcp_numeric builds a truncated model (operators, fiducial, coherent
states) and compares <p,q|H|p,q> against the exact polynomial from the
symbolic route, point by point.

fubini_study_metric measures

    2*hbar * [ ||d|psi>||^2 - |<psi|d|psi>|^2 ]

on the coherent family by central differences.  Stencil states are phase
aligned against the center state (the metric lives on rays, so any phase
convention must drop out; alignment makes that exact by construction and
is verified by a random-phase test).  The metric is evaluated at the
requested step and at half the step; the Richardson-extrapolated value is
returned and the half-step consistency defect guards against oversized
steps: with a relative defect below 1e-3 the extrapolated entries carry
O(defect^2) error, comfortably inside the 1e-6 claims checked in tests.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np

from .dsl import CheckedModel
from .errors import EqlabError, ModelError, StepTooLarge, TruncationLeakage
from .fock import (
    FiducialResult,
    FockSpace,
    MatrixOp,
    Mode,
    StateVector,
    build_operator,
    coherent_state,
    expectation,
    fiducial_solve,
)
from .scalars import ScalarPoly

_MASS_PARAM_ORDER = ("m", "omega", "m0")


def default_omega_rep(model: CheckedModel) -> float:
    """Basis frequency for the truncated representation: the model's mass
    parameter when it has one (fastest convergence near the model's own
    Gaussian), else 1.  A numerical choice only."""
    for name in _MASS_PARAM_ORDER:
        value = model.parameters.get(name)
        if value is not None and value > 0:
            return float(value)
    return 1.0


def model_space(
    model: CheckedModel,
    *,
    truncation: int | None = None,
    omega_rep: float | None = None,
) -> FockSpace:
    w = omega_rep if omega_rep is not None else default_omega_rep(model)
    modes = []
    for set_id, k in model.modes:
        d = truncation if truncation is not None else model.truncations[(set_id, k)]
        modes.append(Mode(set_id, k, d, w))
    return FockSpace(tuple(modes), hbar=float(model.hbar_value))


def model_fiducial(model: CheckedModel, space: FockSpace) -> FiducialResult:
    if model.fiducial_frame is None:
        raise ModelError("model has no fiducial frame")
    conditions = [
        build_operator(c, space, model.numeric_parameters())
        for c in model.fiducial_frame.conditions
    ]
    return fiducial_solve(conditions, space)


@dataclass
class WcpPoint:
    p: tuple
    q: tuple
    numeric: float
    symbolic: float
    abs_dev: float
    rel_dev: float
    leakage_flagged: bool
    tail_mass: float


@dataclass
class WcpReport:
    model: str
    hbar: float
    truncation: dict
    points: list
    max_abs_dev: float

    def to_json_dict(self) -> dict:
        return {
            "model": self.model,
            "hbar": self.hbar,
            "truncation": {f"{s}[{k}]": d for (s, k), d in self.truncation.items()},
            "points": [
                {
                    "p": list(pt.p),
                    "q": list(pt.q),
                    "numeric": pt.numeric,
                    "symbolic": pt.symbolic,
                    "abs_dev": pt.abs_dev,
                    "rel_dev": pt.rel_dev,
                    "leakage_flagged": pt.leakage_flagged,
                    "tail_mass": pt.tail_mass,
                }
                for pt in self.points
            ],
            "max_abs_dev": self.max_abs_dev,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=2)

    def write_csv(self, fh) -> None:
        n = len(self.points[0].p) if self.points else 0
        writer = csv.writer(fh, lineterminator="\n")
        header = [f"p{k}" for k in range(n)] + [f"q{k}" for k in range(n)]
        writer.writerow(header + ["H_num", "H_sym", "abs_dev"])
        for pt in self.points:
            writer.writerow(
                [repr(x) for x in pt.p] + [repr(x) for x in pt.q]
                + [repr(pt.numeric), repr(pt.symbolic), repr(pt.abs_dev)]
            )


def _normalize_points(points, n_shifted: int) -> list:
    out = []
    for entry in points:
        p, q = entry
        pv = tuple(float(x) for x in np.atleast_1d(np.asarray(p, dtype=float)))
        qv = tuple(float(x) for x in np.atleast_1d(np.asarray(q, dtype=float)))
        if len(pv) != n_shifted or len(qv) != n_shifted:
            raise EqlabError(
                f"point has {len(pv)}/{len(qv)} components, expected {n_shifted}"
            )
        out.append((pv, qv))
    return out


def wcp_numeric(
    model: CheckedModel,
    points: Sequence,
    *,
    truncation: int | None = None,
    omega_rep: float | None = None,
    leakage_bound: float = 1e-6,
) -> WcpReport:
    """Numeric <p,q|H|p,q> on a set of phase points, with the exact
    symbolic polynomial evaluated alongside.  Leaky points are flagged,
    not fatal."""
    space = model_space(model, truncation=truncation, omega_rep=omega_rep)
    fid = model_fiducial(model, space)
    h_matrix = build_operator(model.hamiltonian, space, model.numeric_parameters())
    poly = model.wcp_polynomial()
    shifted = model.shifted_modes
    pts = _normalize_points(points, len(shifted))
    values0 = model.numeric_parameters()
    values0["hbar"] = float(model.hbar_value)

    out = []
    for pv, qv in pts:
        coh = coherent_state(
            space, fid.state, pv, qv, model.shifted_sets,
            leakage_bound=math.inf,
        )
        flagged = coh.tail_mass > leakage_bound
        numeric = expectation(h_matrix, coh.state).real
        values = dict(values0)
        for (s, k), x in zip(shifted, pv):
            values[f"p{k}"] = x
        for (s, k), x in zip(shifted, qv):
            values[f"q{k}"] = x
        symbolic = poly.evaluate(values).real
        dev = abs(numeric - symbolic)
        rel = dev / max(1.0, abs(symbolic))
        out.append(WcpPoint(pv, qv, numeric, symbolic, dev, rel, flagged,
                            coh.tail_mass))
    max_dev = max((pt.abs_dev for pt in out), default=0.0)
    truncs = {key: (truncation if truncation is not None else d)
              for key, d in model.truncations.items()}
    return WcpReport(model.name, float(model.hbar_value), truncs, out, max_dev)


def hbar_split(h: ScalarPoly) -> tuple:
    """(classical, corrections): terms without hbar, and the rest."""
    classical = h.hbar_part(True)
    corrections = h.hbar_part(False)
    return classical, corrections


@dataclass
class MetricTensor:
    """Real metric in coordinates (p_1..p_N, q_1..q_N)."""

    matrix: np.ndarray
    step: float
    defect: float

    def to_json_dict(self) -> dict:
        return {
            "coordinates": "p...q",
            "matrix": [[float(x) for x in row] for row in self.matrix],
            "step": self.step,
            "richardson_defect": self.defect,
        }


def _aligned(amplitudes: np.ndarray, center: np.ndarray) -> np.ndarray:
    ov = np.vdot(center, amplitudes)
    if abs(ov) < 1e-14:
        raise StepTooLarge("stencil state orthogonal to center; step too large")
    return amplitudes * (abs(ov) / ov)


def _metric_at_step(factory, x0, h, center, hbar, dim):
    n = len(x0)
    diffs = np.zeros((n, dim), dtype=complex)
    for a in range(n):
        xp = list(x0)
        xm = list(x0)
        xp[a] += h
        xm[a] -= h
        vp = _aligned(factory(xp).amplitudes, center)
        vm = _aligned(factory(xm).amplitudes, center)
        diffs[a] = (vp - vm) / (2.0 * h)
    g = np.zeros((n, n))
    overlaps = diffs @ center.conj()
    gram = diffs.conj() @ diffs.T
    for a in range(n):
        for b in range(n):
            val = gram[a, b] - np.conj(overlaps[a]) * overlaps[b]
            g[a, b] = 2.0 * hbar * val.real
    return (g + g.T) / 2.0


def fubini_study_metric(
    space: FockSpace,
    fiducial: StateVector,
    p: Sequence[float] | float,
    q: Sequence[float] | float,
    *,
    step: float = 1e-3,
    shifted_sets=None,
    defect_tol: float = 1e-3,
    state_factory: Callable | None = None,
) -> MetricTensor:
    """Ray metric on the coherent family at phase point (p, q).

    Entries are Richardson extrapolated from central differences at `step`
    and `step/2`.  `state_factory` exists as a test seam: it maps a
    coordinate vector (p..., q...) to a StateVector and defaults to the
    model's coherent-state construction.
    """
    if step <= 0:
        raise EqlabError("step must be positive")
    pv = np.atleast_1d(np.asarray(p, dtype=float))
    qv = np.atleast_1d(np.asarray(q, dtype=float))
    n = len(pv)

    if state_factory is None:
        def state_factory(x):
            return coherent_state(
                space, fiducial, x[:n], x[n:], shifted_sets,
                leakage_bound=math.inf,
            ).state

    x0 = list(np.concatenate([pv, qv]))
    center = state_factory(x0).amplitudes
    hbar = space.hbar
    g_full = _metric_at_step(state_factory, x0, step, center, hbar, space.dim)
    g_half = _metric_at_step(state_factory, x0, step / 2.0, center, hbar, space.dim)
    defect = float(np.max(np.abs(g_full - g_half)))
    scale = max(1.0, float(np.max(np.abs(g_half))))
    if defect > defect_tol * scale:
        raise StepTooLarge(
            f"half-step consistency defect {defect:.3e} exceeds "
            f"{defect_tol:.1e} of the metric scale"
        )
    g = (4.0 * g_half - g_full) / 3.0
    return MetricTensor(matrix=g, step=step, defect=defect)
