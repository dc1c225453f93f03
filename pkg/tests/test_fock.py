"""Truncated Fock-space numerics against dense and analytic oracles."""

import io
import math
import random
from fractions import Fraction

import numpy as np
import pytest
import scipy.linalg
import scipy.sparse as sp

from _oracles import expr_matrix
from eqlab.errors import (
    DegenerateGroundSpace,
    DimensionMismatch,
    EqlabError,
    TruncationLeakage,
    UnknownGeneratorError,
)
from eqlab.fock import (
    FockSpace,
    Mode,
    StateVector,
    build_generators,
    build_operator,
    coherent_state,
    dump_matrix,
    dump_state,
    expectation,
    expm_action,
    fiducial_solve,
)
from eqlab.operators import Generator, Kind, OperatorExpr
from eqlab.scalars import CR_I, ScalarPoly, sym

I = ScalarPoly.const(CR_I)


def op(g):
    return OperatorExpr.from_generator(g)


def single_space(dim, omega_rep=1.0, hbar=1.0):
    return FockSpace((Mode("pq", 0, dim, omega_rep),), hbar=hbar)


def vacuum_condition(omega=1):
    q = Generator("pq", 0, Kind.POSITION)
    p = Generator("pq", 0, Kind.MOMENTUM)
    return op(q) * ScalarPoly.const(omega) + op(p) * I


def zeta_conditions(m, z, mode=0):
    q = Generator("pq", mode, Kind.POSITION)
    p = Generator("pq", mode, Kind.MOMENTUM)
    s = Generator("rs", mode, Kind.POSITION)
    r = Generator("rs", mode, Kind.MOMENTUM)
    b1 = (op(q) + op(s) * ScalarPoly.const(z)) * ScalarPoly.const(m) + op(p) * I
    b2 = (op(s) + op(q) * ScalarPoly.const(z)) * ScalarPoly.const(m) + op(r) * I
    return [b1, b2]


class TestSpace:
    def test_row_major_enumeration(self):
        space = FockSpace((Mode("pq", 0, 3), Mode("pq", 1, 4)))
        assert space.dim == 12
        assert space.basis_index((0, 0)) == 0
        assert space.basis_index((1, 0)) == 4
        assert space.basis_index((0, 1)) == 1
        assert space.occupations(7) == (1, 3)

    def test_duplicate_mode_rejected(self):
        with pytest.raises(ValueError):
            FockSpace((Mode("pq", 0, 3), Mode("pq", 0, 4)))


class TestGenerators:
    def test_q_matrix_d2(self):
        space = single_space(2)
        q, p = build_generators(space, "pq", 0)
        expected = np.array([[0, 1], [1, 0]]) / math.sqrt(2)
        assert np.abs(q.matrix.toarray() - expected).max() <= 1e-15
        assert q.hermitian and p.hermitian

    def test_vacuum_q_moment_zero(self):
        space = single_space(17)
        q, _ = build_generators(space, "pq", 0)
        assert expectation(q, space.vacuum()) == 0

    def test_commutator_defect_structure(self):
        dim = 16
        space = single_space(dim)
        q, p = build_generators(space, "pq", 0)
        comm = (q.matrix @ p.matrix - p.matrix @ q.matrix).toarray()
        defect = comm - 1j * space.hbar * np.eye(dim)
        for n in range(dim - 1):
            assert np.linalg.norm(defect[:, n]) <= 1e-13
        assert np.linalg.norm(defect[:, dim - 1]) > 1.0


class TestBuildOperator:
    def test_scalar_is_identity(self):
        space = single_space(5)
        m = build_operator(OperatorExpr.scalar(1), space)
        assert np.abs(m.matrix.toarray() - np.eye(5)).max() == 0

    def test_kron_structure_two_modes(self):
        space = FockSpace((Mode("pq", 0, 4), Mode("pq", 1, 4)))
        q0 = Generator("pq", 0, Kind.POSITION)
        p1 = Generator("pq", 1, Kind.MOMENTUM)
        e = op(q0) * op(p1)
        got = build_operator(e, space).matrix.toarray()
        want = expr_matrix(e, 4)
        assert np.abs(got - want).max() <= 1e-14

    def test_word_order_is_composition_order(self):
        space = single_space(6)
        q = Generator("pq", 0, Kind.POSITION)
        p = Generator("pq", 0, Kind.MOMENTUM)
        qp = build_operator(op(q) * op(p), space).matrix.toarray()
        qm, pm = (x.matrix.toarray() for x in build_generators(space, "pq", 0))
        assert np.abs(qp - qm @ pm).max() <= 1e-14

    def test_quadratic_identity_interior(self):
        # (m0 Q - iP)(m0 Q + iP) vs P^2 + m0^2 Q^2 - hbar m0, interior columns
        dim = 12
        space = single_space(dim)
        q = Generator("pq", 0, Kind.POSITION)
        p = Generator("pq", 0, Kind.MOMENTUM)
        m0 = Fraction(3, 2)
        lhs = build_operator(
            (op(q) * ScalarPoly.const(m0) - op(p) * I)
            * (op(q) * ScalarPoly.const(m0) + op(p) * I),
            space,
        ).matrix.toarray()
        rhs = build_operator(
            op(p) * op(p) + op(q) * op(q) * ScalarPoly.const(m0 * m0)
            - OperatorExpr.scalar(ScalarPoly.symbol("hbar") * ScalarPoly.const(m0)),
            space,
        ).matrix.toarray()
        diff = np.abs(lhs - rhs)
        assert diff[:, : dim - 2].max() <= 1e-13

    def test_hermitian_flag_from_symbolic_check(self):
        space = single_space(4)
        q = Generator("pq", 0, Kind.POSITION)
        p = Generator("pq", 0, Kind.MOMENTUM)
        assert build_operator(op(q) * op(q), space).hermitian
        assert not build_operator(op(q) * op(p), space).hermitian

    def test_unknown_generator(self):
        space = single_space(4)
        s = Generator("rs", 0, Kind.POSITION)
        with pytest.raises(UnknownGeneratorError):
            build_operator(op(s), space)

    def test_unbound_symbol(self):
        space = single_space(4)
        q = Generator("pq", 0, Kind.POSITION)
        with pytest.raises(EqlabError):
            build_operator(op(q) * sym("m"), space)

    def test_deterministic_assembly(self):
        space = single_space(8)
        q = Generator("pq", 0, Kind.POSITION)
        p = Generator("pq", 0, Kind.MOMENTUM)
        e = op(q) * op(p) * op(q) + op(p) * op(p)
        m1 = build_operator(e, space).matrix
        m2 = build_operator(e, space).matrix
        assert np.array_equal(m1.toarray(), m2.toarray())


class TestFiducialSolve:
    def test_vacuum_condition_exact(self):
        space = single_space(20)
        cond = build_operator(vacuum_condition(), space)
        res = fiducial_solve([cond])
        assert res.residual <= 1e-12
        vac = np.zeros(20)
        vac[0] = 1
        assert np.abs(res.state.amplitudes - vac).max() <= 1e-10
        assert res.gap > 0.5

    def test_zeta_zero_is_product_vacuum(self):
        space = FockSpace((Mode("pq", 0, 10), Mode("rs", 0, 10)))
        conds = [build_operator(c, space, {"m": 1.0})
                 for c in zeta_conditions(Fraction(1), Fraction(0))]
        res = fiducial_solve(conds)
        assert res.residual <= 1e-12
        assert abs(res.state.amplitudes[0]) == pytest.approx(1.0, abs=1e-10)

    def test_zeta_half_converges(self):
        residuals = {}
        for dim in (12, 24):
            space = FockSpace((Mode("pq", 0, dim, 1.0), Mode("rs", 0, dim, 1.0)))
            conds = [build_operator(c, space)
                     for c in zeta_conditions(Fraction(1), Fraction(1, 2))]
            residuals[dim] = fiducial_solve(conds).residual
        assert residuals[24] <= 1e-6
        assert residuals[24] <= 10 * residuals[12]
        assert residuals[24] < residuals[12]

    def test_degenerate_ground_space(self):
        space = FockSpace((Mode("pq", 0, 6), Mode("rs", 0, 6)))
        cond = build_operator(vacuum_condition(), space)
        with pytest.raises(DegenerateGroundSpace):
            fiducial_solve([cond])

    def test_deterministic(self):
        space = FockSpace((Mode("pq", 0, 12), Mode("rs", 0, 12)))
        conds = [build_operator(c, space)
                 for c in zeta_conditions(Fraction(1), Fraction(1, 2))]
        a = fiducial_solve(conds).state.amplitudes
        b = fiducial_solve(conds).state.amplitudes
        assert np.array_equal(a, b)


class TestExpmAction:
    def test_against_dense_oracle(self):
        rng = np.random.default_rng(42)
        for dim in (16, 128, 256):
            a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
            h = (a + a.conj().T) / 2
            hs = sp.csr_matrix(h)
            v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
            v /= np.linalg.norm(v)
            for tau in (0.3, -1.7):
                got = expm_action(hs, v, tau, tol=1e-13)
                want = scipy.linalg.expm(-1j * tau * h) @ v
                assert np.linalg.norm(got - want) <= 1e-10

    def test_norm_preserved(self):
        space = single_space(64)
        q, _ = build_generators(space, "pq", 0)
        v = space.vacuum().amplitudes
        out = expm_action(q.matrix, v, 1.3, tol=1e-13)
        assert abs(np.linalg.norm(out) - 1.0) <= 1e-12


class TestCoherentState:
    def test_zero_displacement_is_identity(self):
        space = single_space(32)
        res = coherent_state(space, space.vacuum(), 0.0, 0.0, {"pq"})
        assert np.abs(res.state.amplitudes - space.vacuum().amplitudes).max() == 0
        assert res.renorm_correction <= 1e-12

    @pytest.mark.parametrize("pval,qval", [(1.0, 0.0), (0.0, 1.0), (0.7, -0.4)])
    def test_vacuum_overlap_gaussian(self, pval, qval):
        omega = hbar = 1.0
        space = single_space(64, omega_rep=omega, hbar=hbar)
        res = coherent_state(space, space.vacuum(), pval, qval, {"pq"})
        overlap = abs(np.vdot(space.vacuum().amplitudes, res.state.amplitudes))
        expected = math.exp(-(pval ** 2 / omega + omega * qval ** 2) / (4 * hbar))
        assert abs(overlap - expected) <= 1e-8

    def test_first_moments(self):
        space = single_space(64)
        q, p = build_generators(space, "pq", 0)
        res = coherent_state(space, space.vacuum(), 0.8, -0.6, {"pq"})
        assert abs(expectation(q, res.state).real - (-0.6)) <= 1e-8
        assert abs(expectation(p, res.state).real - 0.8) <= 1e-8
        assert abs(expectation(q, res.state).imag) <= 1e-12

    def test_leakage_raises(self):
        space = single_space(8)
        with pytest.raises(TruncationLeakage):
            coherent_state(space, space.vacuum(), 4.0, 0.0, {"pq"})

    def test_shifted_sets_select_modes(self):
        space = FockSpace((Mode("pq", 0, 24), Mode("rs", 0, 24)))
        conds = [build_operator(c, space)
                 for c in zeta_conditions(Fraction(1), Fraction(1, 2))]
        fid = fiducial_solve(conds).state
        res = coherent_state(space, fid, [0.5], [0.5], {"pq"})
        qs = build_operator(op(Generator("rs", 0, Kind.POSITION)), space)
        # S expectation unchanged by a pq-only displacement
        before = expectation(qs, fid).real
        after = expectation(qs, res.state).real
        assert abs(before - after) <= 1e-8


class TestExpectation:
    def test_identity(self):
        space = single_space(7)
        one = build_operator(OperatorExpr.scalar(1), space)
        v = space.vacuum()
        assert expectation(one, v) == pytest.approx(1.0)

    def test_number_operator_on_basis_state(self):
        dim = 12
        space = single_space(dim)
        q, p = build_generators(space, "pq", 0)
        number = (p.matrix @ p.matrix + q.matrix @ q.matrix) / 2.0 - \
            0.5 * sp.identity(dim, dtype=complex)
        amps = np.zeros(dim)
        amps[3] = 1.0
        v = StateVector(amps, space, normalized=True)
        from eqlab.fock import MatrixOp
        got = expectation(MatrixOp(number.tocsr(), space, hermitian=True), v)
        assert got.real == pytest.approx(3.0, abs=1e-12)

    def test_vacuum_energy(self):
        space = single_space(32)
        q = Generator("pq", 0, Kind.POSITION)
        p = Generator("pq", 0, Kind.MOMENTUM)
        h = (op(p) * op(p) + op(q) * op(q)) * ScalarPoly.const(Fraction(1, 2))
        hm = build_operator(h, space)
        val = expectation(hm, space.vacuum())
        assert val.real == pytest.approx(0.5, abs=1e-12)
        assert abs(val.imag) <= 1e-12

    def test_dimension_mismatch(self):
        space = single_space(7)
        other = single_space(9)
        one = build_operator(OperatorExpr.scalar(1), space)
        with pytest.raises(DimensionMismatch):
            expectation(one, other.vacuum())


class TestRepresentationIndependence:
    def test_omega_rep_does_not_matter(self):
        q = Generator("pq", 0, Kind.POSITION)
        obs = op(q) ** 4
        values = {}
        for omega_rep in (1.0, 2.0):
            space = single_space(64, omega_rep=omega_rep)
            cond = build_operator(vacuum_condition(), space)
            fid = fiducial_solve([cond]).state
            coh = coherent_state(space, fid, 0.4, 0.7, {"pq"}).state
            values[omega_rep] = expectation(build_operator(obs, space), coh).real
        assert abs(values[1.0] - values[2.0]) <= 1e-6


class TestDumps:
    def test_state_dump(self):
        space = single_space(3)
        buf = io.StringIO()
        dump_state(space.vacuum(), buf)
        lines = buf.getvalue().strip().split("\n")
        assert lines[0] == "0 1.0 0.0"
        assert len(lines) == 3

    def test_matrix_dump(self):
        space = single_space(2)
        q, _ = build_generators(space, "pq", 0)
        buf = io.StringIO()
        dump_matrix(q, buf)
        assert len(buf.getvalue().strip().split("\n")) == 2
