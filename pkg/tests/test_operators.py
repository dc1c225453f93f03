"""Canonical operator algebra: commutator rewriting, adjoints, displacement."""

import random
from fractions import Fraction

import numpy as np
import pytest

from _oracles import expr_matrix, interior_mask
from eqlab.errors import DegreeLimitError
from eqlab.operators import (
    Generator,
    Kind,
    OperatorExpr,
    canonicalize,
    displace,
    hermitian_check,
    render,
)
from eqlab.scalars import CR_I, ComplexRational, ScalarPoly, sym

Q0 = Generator("pq", 0, Kind.POSITION)
P0 = Generator("pq", 0, Kind.MOMENTUM)
Q1 = Generator("pq", 1, Kind.POSITION)
P1 = Generator("pq", 1, Kind.MOMENTUM)
S0 = Generator("rs", 0, Kind.POSITION)
R0 = Generator("rs", 0, Kind.MOMENTUM)

HB = ScalarPoly.symbol("hbar")


def op(g):
    return OperatorExpr.from_generator(g)


def random_expr(rng, gens, max_degree=4, n_terms=4):
    e = OperatorExpr.zero()
    for _ in range(n_terms):
        length = rng.randrange(0, max_degree + 1)
        word = tuple(rng.choice(gens) for _ in range(length))
        coeff = ComplexRational(
            Fraction(rng.randrange(-4, 5), rng.randrange(1, 4)),
            Fraction(rng.randrange(-4, 5), rng.randrange(1, 4)),
        )
        e = e + OperatorExpr.monomial(word, ScalarPoly.const(coeff))
    return e


class TestCanonicalize:
    def test_pq_single_commutator(self):
        # P*Q -> Q*P - i*hbar
        e = (op(P0) * op(Q0)).canonical()
        expected = op(Q0) * op(P0) - OperatorExpr.scalar(ScalarPoly.const(CR_I) * HB)
        assert e == expected

    def test_cross_mode_commutes(self):
        e = (op(P1) * op(Q0)).canonical()
        assert e == op(Q0) * op(P1)

    def test_cross_set_commutes(self):
        e = (op(R0) * op(Q0)).canonical()
        assert e == (op(Q0) * op(R0)).canonical()
        assert list(e.items())[0][0] == (Q0, R0)

    def test_qpq_two_step(self):
        # Q*P*Q -> Q^2*P - i*hbar*Q
        e = (op(Q0) * op(P0) * op(Q0)).canonical()
        expected = op(Q0) * op(Q0) * op(P0) - op(Q0) * (ScalarPoly.const(CR_I) * HB)
        assert e == expected.canonical()
        assert e == expected  # already canonical

    def test_idempotent_random(self):
        rng = random.Random(7)
        gens = [Q0, P0, Q1, P1, S0, R0]
        for _ in range(30):
            e = random_expr(rng, gens, max_degree=6, n_terms=5)
            c1 = e.canonical()
            assert c1.canonical() == c1

    def test_matrix_identity_random(self):
        # e and canonicalize(e) agree on interior entries at D=12
        rng = random.Random(11)
        gens = [Q0, P0, Q1, P1]
        dim = 12
        mask = interior_mask(dim, 2, 4)
        for _ in range(12):
            e = random_expr(rng, gens, max_degree=4, n_terms=4)
            m1 = expr_matrix(e, dim)
            m2 = expr_matrix(e.canonical(), dim)
            diff = np.abs(m1 - m2)[np.ix_(mask, mask)]
            scale = max(1.0, np.abs(m1).max())
            assert diff.max() <= 1e-12 * scale


class TestAdjoint:
    def test_reverses_and_conjugates(self):
        e = OperatorExpr.monomial((Q0, P0), ScalarPoly.const(CR_I))
        assert e.adjoint() == OperatorExpr.monomial((P0, Q0), ScalarPoly.const(-CR_I))

    def test_involution_random(self):
        rng = random.Random(3)
        gens = [Q0, P0, S0, R0]
        for _ in range(20):
            e = random_expr(rng, gens)
            assert e.adjoint().adjoint() == e


class TestHermitianCheck:
    def test_harmonic_true(self):
        omega = sym("omega")
        h = op(P0) * op(P0) + op(Q0) * op(Q0) * (omega * omega)
        assert hermitian_check(h)

    def test_qp_false(self):
        assert not hermitian_check(op(Q0) * op(P0))

    def test_symmetrized_true(self):
        half = ScalarPoly.const(Fraction(1, 2))
        e = (op(Q0) * op(P0) + op(P0) * op(Q0)) * half
        assert hermitian_check(e)


class TestDisplace:
    def test_binomial(self):
        q = sym("q0")
        e = op(Q0) * op(Q0)
        d = displace(e, {Q0: q})
        expected = e + op(Q0) * (2 * q) + OperatorExpr.scalar(q * q)
        assert d == expected

    def test_linear(self):
        p = sym("p0")
        assert displace(op(P0), {P0: p}) == op(P0) + OperatorExpr.scalar(p)

    def test_partial_shift_matches_matrix(self):
        # (Q + zeta*S)^2 with only Q shifted, against dense substitution
        zeta = Fraction(1, 2)
        qshift = Fraction(1, 3)
        a = op(Q0) + op(S0) * ScalarPoly.const(zeta)
        e = a * a
        d = displace(e, {Q0: ScalarPoly.const(qshift), S0: 0})
        expected = e + a * ScalarPoly.const(2 * qshift) + OperatorExpr.scalar(
            ScalarPoly.const(qshift * qshift)
        )
        assert d == expected
        m_direct = expr_matrix(d, 8)
        m_expected = expr_matrix(expected, 8)
        assert np.abs(m_direct - m_expected).max() <= 1e-12

    def test_degree_preserved_and_zero_shift(self):
        e = op(Q0) * op(Q0) * op(P0)
        assert displace(e, {Q0: 0}) == e
        d = displace(e, {Q0: sym("q0"), P0: sym("p0")})
        assert d.total_degree() == e.total_degree()


class TestDegreeCap:
    def test_product_cap(self):
        e = op(Q0) ** 6
        with pytest.raises(DegreeLimitError):
            e * (op(Q0) ** 7)

    def test_pow_within_cap(self):
        assert (op(Q0) ** 12).total_degree() == 12


class TestRender:
    def test_round_words(self):
        e = op(Q0) * op(Q0) * op(P1) - OperatorExpr.scalar(
            ScalarPoly.const(Fraction(1, 2)) * HB
        )
        text = render(e)
        assert text == "Q[0]^2*P[1] - 1/2*hbar"

    def test_two_sets_letters(self):
        e = op(S0) * op(R0)
        assert render(e, set_order=["pq", "rs"]) == "S[0]*R[0]"

    def test_scalar_zero(self):
        assert render(OperatorExpr.zero()) == "0"
