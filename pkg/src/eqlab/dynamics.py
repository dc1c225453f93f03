"""Full Schrödinger propagation and reduced (phase-space) dynamics.

The quantum stepper applies exp(-i*H*dt/hbar) per step through the Lanczos
action with a tight inner tolerance, logging norm and energy.

The reduced equations qdot = dH/dp, pdot = -dH/dq use exact symbolic
gradients of the classical polynomial, compiled to fast numeric term
lists.  Separable Hamiltonians H = T(p) + V(q) get a kick-drift-kick
leapfrog composed to sixth order (Yoshida coefficients); anything mixing
p and q in one term falls back to the implicit midpoint rule.  Both are
symmetric, hence time reversible, with bounded non-secular energy error.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import EqlabError, GridMismatch, HermiticityError
from .fock import MatrixOp, StateVector, expectation, expm_action
from .scalars import ScalarPoly

# sixth-order composition coefficients (Yoshida, solution A)
_W1 = -1.17767998417887
_W2 = 0.235573213359357
_W3 = 0.784513610477560
_W0 = 1.0 - 2.0 * (_W1 + _W2 + _W3)
_YOSHIDA6 = (_W3, _W2, _W1, _W0, _W1, _W2, _W3)


@dataclass(frozen=True)
class TimeGrid:
    dt: float
    steps: int

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.steps < 1:
            raise ValueError("need at least one step")

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.steps + 1) * self.dt

    @classmethod
    def for_horizon(cls, dt: float, horizon: float) -> "TimeGrid":
        return cls(dt, max(1, round(horizon / dt)))


@dataclass
class Trajectory:
    """Uniform-grid samples of a classical and/or quantum evolution."""

    times: np.ndarray
    p: np.ndarray | None = None           # (steps+1, N)
    q: np.ndarray | None = None
    q_expect: np.ndarray | None = None    # (steps+1, Nq)
    p_expect: np.ndarray | None = None
    norm: np.ndarray | None = None
    energy: np.ndarray | None = None

    def __post_init__(self):
        if len(self.times) >= 2 and not np.all(np.diff(self.times) > 0):
            raise ValueError("time grid must be strictly increasing")
        for name in ("p", "q", "q_expect", "p_expect", "norm", "energy"):
            arr = getattr(self, name)
            if arr is not None and len(arr) != len(self.times):
                raise ValueError(f"{name} log length differs from time grid")

    def write_csv(self, fh) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        header = ["t"]
        cols = []

        def add(block, label):
            if block is None:
                return
            arr = np.atleast_2d(np.asarray(block))
            if arr.shape[0] != len(self.times):
                arr = arr.T
            for j in range(arr.shape[1]):
                header.append(f"{label}{j}" if arr.shape[1] > 1 else label)
                cols.append(arr[:, j])

        add(self.p, "p")
        add(self.q, "q")
        add(self.q_expect, "Qexp")
        add(self.p_expect, "Pexp")
        if self.norm is not None:
            header.append("norm")
            cols.append(self.norm)
        if self.energy is not None:
            header.append("energy")
            cols.append(self.energy)
        writer.writerow(header)
        for k, t in enumerate(self.times):
            writer.writerow([repr(float(t))] + [repr(float(c[k])) for c in cols])


def schrodinger_evolve(
    h: MatrixOp,
    psi0: StateVector,
    grid: TimeGrid,
    *,
    q_ops: Sequence[MatrixOp] = (),
    p_ops: Sequence[MatrixOp] = (),
    tol: float = 1e-12,
) -> Trajectory:
    """Propagate i*hbar dpsi/dt = H psi by per-step exponential action."""
    if not h.hermitian:
        raise HermiticityError("Hamiltonian matrix must be flagged hermitian")
    if h.matrix.shape[1] != psi0.amplitudes.shape[0]:
        raise EqlabError("state/operator dimension mismatch")
    hbar = h.space.hbar
    steps = grid.steps
    v = psi0.amplitudes.copy()
    norms = np.empty(steps + 1)
    energies = np.empty(steps + 1)
    qexp = np.empty((steps + 1, len(q_ops)))
    pexp = np.empty((steps + 1, len(p_ops)))

    def record(k, vec):
        norms[k] = np.linalg.norm(vec)
        energies[k] = np.real(np.vdot(vec, h.matrix @ vec))
        for j, op in enumerate(q_ops):
            qexp[k, j] = np.real(np.vdot(vec, op.matrix @ vec))
        for j, op in enumerate(p_ops):
            pexp[k, j] = np.real(np.vdot(vec, op.matrix @ vec))

    record(0, v)
    tau = grid.dt / hbar
    for k in range(1, steps + 1):
        v = expm_action(h.matrix, v, tau, tol=tol)
        record(k, v)
    return Trajectory(
        times=grid.times,
        q_expect=qexp if len(q_ops) else None,
        p_expect=pexp if len(p_ops) else None,
        norm=norms,
        energy=energies,
    )


# -- reduced dynamics --


class _CompiledPoly:
    """Numeric evaluator for a polynomial over coordinates (p..., q...)."""

    def __init__(self, poly: ScalarPoly, coord_index: Mapping[str, int]):
        self.terms = []
        for mono, coeff in poly.items():
            c = coeff.to_complex()
            if abs(c.imag) > 1e-15 * max(1.0, abs(c.real)):
                raise EqlabError("classical Hamiltonian has complex terms")
            entry = []
            for s, e in mono:
                if s not in coord_index:
                    raise EqlabError(f"unbound symbol {s!r} in classical input")
                entry.append((coord_index[s], e))
            self.terms.append((c.real, tuple(entry)))

    def __call__(self, z: np.ndarray) -> float:
        total = 0.0
        for c, entry in self.terms:
            x = c
            for idx, e in entry:
                x *= z[idx] ** e
            total += x
        return total


def _coordinates(h_cl: ScalarPoly, n: int, params: Mapping[str, float]):
    """Bind parameters, return (bound poly, coordinate index map)."""
    from fractions import Fraction

    # Fraction(float) is the exact binary value, so nothing is lost here
    bindings = {k: Fraction(v) for k, v in (params or {}).items()}
    bound = h_cl.bind(bindings) if bindings else h_cl
    index = {}
    for k in range(n):
        index[f"p{k}"] = k
        index[f"q{k}"] = n + k
    extra = bound.symbols() - set(index)
    if extra:
        raise EqlabError(
            "unbound symbols in classical Hamiltonian: " + ", ".join(sorted(extra))
        )
    return bound, index


def _is_separable(poly: ScalarPoly, n: int) -> bool:
    for mono, _ in poly.items():
        has_p = any(s.startswith("p") for s, _ in mono)
        has_q = any(s.startswith("q") for s, _ in mono)
        if has_p and has_q:
            return False
    return True


def reduced_evolve(
    h_cl: ScalarPoly,
    p0: Sequence[float] | float,
    q0: Sequence[float] | float,
    grid: TimeGrid,
    *,
    params: Mapping[str, float] | None = None,
    method: str = "auto",
) -> Trajectory:
    """Integrate qdot = dH/dp, pdot = -dH/dq with exact symbolic gradients.

    method: "auto" (leapfrog6 when separable, midpoint otherwise),
    "leapfrog6", or "midpoint".
    """
    pv = np.atleast_1d(np.asarray(p0, dtype=float))
    qv = np.atleast_1d(np.asarray(q0, dtype=float))
    n = len(pv)
    if len(qv) != n:
        raise EqlabError("p0 and q0 must have the same length")
    bound, index = _coordinates(h_cl, n, params or {})
    h_fn = _CompiledPoly(bound, index)
    dhdp = [_CompiledPoly(bound.diff(f"p{k}"), index) for k in range(n)]
    dhdq = [_CompiledPoly(bound.diff(f"q{k}"), index) for k in range(n)]

    if method == "auto":
        method = "leapfrog6" if _is_separable(bound, n) else "midpoint"
    if method == "leapfrog6" and not _is_separable(bound, n):
        raise EqlabError("leapfrog requires a separable Hamiltonian")

    steps = grid.steps
    ps = np.empty((steps + 1, n))
    qs = np.empty((steps + 1, n))
    energies = np.empty(steps + 1)
    z = np.concatenate([pv, qv])
    ps[0], qs[0] = z[:n], z[n:]
    energies[0] = h_fn(z)

    if method == "leapfrog6":
        def leapfrog(z, dt):
            p = z[:n].copy()
            q = z[n:].copy()
            grad_q = np.array([g(z) for g in dhdq])
            p -= 0.5 * dt * grad_q
            zmid = np.concatenate([p, q])
            q += dt * np.array([g(zmid) for g in dhdp])
            zmid = np.concatenate([p, q])
            p -= 0.5 * dt * np.array([g(zmid) for g in dhdq])
            return np.concatenate([p, q])

        def step(z, dt):
            for w in _YOSHIDA6:
                z = leapfrog(z, w * dt)
            return z
    elif method == "midpoint":
        def step(z, dt):
            zmid = z.copy()
            for _ in range(100):
                grad = np.concatenate([
                    [-g(zmid) for g in dhdq],
                    [g(zmid) for g in dhdp],
                ])
                nxt = z + 0.5 * dt * grad
                if np.max(np.abs(nxt - zmid)) < 1e-14:
                    zmid = nxt
                    break
                zmid = nxt
            else:
                raise EqlabError("implicit midpoint failed to converge")
            return 2.0 * zmid - z
    else:
        raise EqlabError(f"unknown method {method!r}")

    for k in range(1, steps + 1):
        z = step(z, grid.dt)
        ps[k], qs[k] = z[:n], z[n:]
        energies[k] = h_fn(z)
    return Trajectory(times=grid.times, p=ps, q=qs, energy=energies)


@dataclass
class DeviationReport:
    """Pointwise gap between quantum expectations and the reduced orbit."""

    times: np.ndarray
    q_dev: np.ndarray
    p_dev: np.ndarray
    max_q_dev: float
    max_p_dev: float
    rms_q_dev: float
    rms_p_dev: float

    def to_json_dict(self) -> dict:
        return {
            "max_q_dev": self.max_q_dev,
            "max_p_dev": self.max_p_dev,
            "rms_q_dev": self.rms_q_dev,
            "rms_p_dev": self.rms_p_dev,
            "samples": len(self.times),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=2)


def compare_trajectories(full: Trajectory, reduced: Trajectory) -> DeviationReport:
    if len(full.times) != len(reduced.times) or not np.allclose(
        full.times, reduced.times, rtol=0, atol=1e-15
    ):
        raise GridMismatch("trajectories use different time grids")
    if full.q_expect is None or full.p_expect is None:
        raise EqlabError("full trajectory lacks expectation logs")
    if reduced.q is None or reduced.p is None:
        raise EqlabError("reduced trajectory lacks phase-point logs")
    q_dev = np.abs(full.q_expect - reduced.q).max(axis=1)
    p_dev = np.abs(full.p_expect - reduced.p).max(axis=1)
    return DeviationReport(
        times=full.times,
        q_dev=q_dev,
        p_dev=p_dev,
        max_q_dev=float(q_dev.max()),
        max_p_dev=float(p_dev.max()),
        rms_q_dev=float(np.sqrt(np.mean(q_dev ** 2))),
        rms_p_dev=float(np.sqrt(np.mean(p_dev ** 2))),
    )
