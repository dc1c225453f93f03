"""The reducible rotationally symmetric model and its classical match."""

import json
import random
from fractions import Fraction

import pytest

from eqlab.dsl import parse_model, validate
from eqlab.errors import GramNotPositiveDefinite, ZetaOutOfRange
from eqlab.frames import wcp_symbolic
from eqlab.rotsym import (
    RotsymParams,
    build_classical,
    build_reducible_model,
    effective_parameters,
    invert_parameters,
    irreducible_model_source,
    reducible_model_source,
    verify_match,
)
from eqlab.scalars import ScalarPoly, sym


class TestParams:
    def test_effective_parameters_exact(self):
        assert effective_parameters(Fraction(1), Fraction(1, 2), Fraction(1)) == (
            Fraction(5, 4), Fraction(1, 16))
        assert effective_parameters(Fraction(2), Fraction(1, 2), Fraction(1)) == (
            Fraction(5), Fraction(1))

    def test_quartic_suppression(self):
        small = Fraction(1, 100)
        _, lam = effective_parameters(Fraction(1), small, Fraction(1))
        assert lam == small ** 4

    @pytest.mark.parametrize("zeta", [Fraction(0), Fraction(1), Fraction(3, 2)])
    def test_zeta_range_enforced(self, zeta):
        with pytest.raises(ZetaOutOfRange):
            effective_parameters(Fraction(1), zeta, Fraction(1))
        with pytest.raises(ZetaOutOfRange):
            RotsymParams(1, Fraction(1), zeta, Fraction(1))

    def test_derived_fields(self):
        p = RotsymParams(2, Fraction(1), Fraction(1, 2), Fraction(1))
        assert p.m0_squared == Fraction(5, 4)
        assert p.lambda0 == Fraction(1, 16)


class TestInvert:
    def test_exact_example(self):
        m, v = invert_parameters(Fraction(5, 4), Fraction(1, 16), Fraction(1, 2))
        assert m == 1 and v == 1

    def test_free_case(self):
        m, v = invert_parameters(Fraction(1), Fraction(0), Fraction(1, 3))
        assert v == 0

    def test_round_trip_random_rationals(self):
        rng = random.Random(77)
        for _ in range(25):
            m = Fraction(rng.randrange(1, 9), rng.randrange(1, 5))
            zeta = Fraction(rng.randrange(1, 9), 10)
            v = Fraction(rng.randrange(0, 9), rng.randrange(1, 5))
            m0sq, lam = effective_parameters(m, zeta, v)
            m2, v2 = invert_parameters(m0sq, lam, zeta)
            # exact on squared quantities
            assert Fraction(m2) ** 2 == m * m
            assert v2 == v


class TestClassical:
    def test_free_single_mode(self):
        got = build_classical(1, Fraction(1), Fraction(0))
        assert got == (sym("p0") ** 2 + sym("q0") ** 2) * ScalarPoly.const(Fraction(1, 2))

    def test_two_mode_instantiation(self):
        got = build_classical(2, Fraction(1), Fraction(1))
        half = ScalarPoly.const(Fraction(1, 2))
        quad = sum((sym(f"p{n}") ** 2 + sym(f"q{n}") ** 2 for n in range(2)),
                   ScalarPoly.zero())
        qsq = sym("q0") ** 2 + sym("q1") ** 2
        assert got == half * quad + qsq ** 2

    def test_mode_exchange_symmetry(self):
        got = build_classical(2, Fraction(3, 2), Fraction(2))
        swapped = ScalarPoly({
            tuple(sorted(
                ((s.translate(str.maketrans("01", "10")) if s[0] in "pq" else s), e)
                for s, e in mono
            )): c
            for mono, c in got.items()
        })
        assert got == swapped


class TestReducibleModel:
    def test_gram_per_mode_pair(self):
        model = build_reducible_model(
            RotsymParams(1, Fraction(1), Fraction(1, 2), Fraction(1)))
        gram = model.fiducial_frame.gram()
        assert gram[0][0] == ScalarPoly.one()
        assert gram[0][1] == ScalarPoly.const(Fraction(1, 2))
        assert gram[1][0] == ScalarPoly.const(Fraction(1, 2))

    def test_n2_model_validates(self):
        model = build_reducible_model(
            RotsymParams(2, Fraction(1), Fraction(1, 2), Fraction(1)), truncation=8)
        assert len(model.fiducial_frame.conditions) == 4
        assert model.shifted_sets == ("pq",)

    def test_boundary_zeta_rejected_at_validation(self):
        src = reducible_model_source(
            RotsymParams(1, Fraction(1), Fraction(1, 2), Fraction(1)))
        bad = src.replace("param zeta = 1/2", "param zeta = 1")
        result = parse_model(bad)
        assert result.ok
        with pytest.raises(GramNotPositiveDefinite):
            validate(result.spec)

    def test_small_zeta_decouples(self):
        tiny = Fraction(1, 1000000)
        params = RotsymParams(1, Fraction(1), tiny, Fraction(1))
        model = build_reducible_model(params, truncation=8)
        wcp = model.wcp_polynomial()
        free = build_classical(1, Fraction(1), Fraction(0))
        # quartic coefficient is zeta^4-suppressed; quadratic approaches free
        delta = wcp - free
        for mono, coeff in delta.items():
            assert abs(coeff.re) <= Fraction(3, 10 ** 12)

    def test_corpus_files_match_generator(self, models_dir):
        src1 = reducible_model_source(
            RotsymParams(1, Fraction(1), Fraction(1, 2), Fraction(1)), truncation=24)
        assert (models_dir / "rotsym_n1.eqm").read_text() == src1
        src2 = reducible_model_source(
            RotsymParams(2, Fraction(1), Fraction(1, 2), Fraction(1)), truncation=12)
        assert (models_dir / "rotsym_n2.eqm").read_text() == src2


class TestMatch:
    @pytest.mark.parametrize("n_modes", [1, 2, 3])
    @pytest.mark.parametrize("m,zeta,v", [
        (Fraction(1), Fraction(1, 2), Fraction(1)),
        (Fraction(2), Fraction(1, 3), Fraction(1, 2)),
    ])
    def test_exact_identity(self, n_modes, m, zeta, v):
        report = verify_match(RotsymParams(n_modes, m, zeta, v), numeric=False)
        assert report.exact_match

    def test_quadratic_sector_when_v_zero(self):
        params = RotsymParams(1, Fraction(1), Fraction(1, 2), Fraction(0))
        model = build_reducible_model(params, truncation=8)
        wcp = model.wcp_polynomial()
        assert wcp == build_classical(1, params.m0_squared, Fraction(0))

    def test_random_rational_samples(self):
        rng = random.Random(5)
        for _ in range(4):
            m = Fraction(rng.randrange(1, 5), rng.randrange(1, 3))
            zeta = Fraction(rng.randrange(1, 10), rng.randrange(10, 13))
            v = Fraction(rng.randrange(0, 4), rng.randrange(1, 3))
            report = verify_match(RotsymParams(1, m, zeta, v), numeric=False)
            assert report.exact_match, (m, zeta, v)

    def test_numeric_spot_check(self):
        report = verify_match(
            RotsymParams(1, Fraction(1), Fraction(1, 2), Fraction(1)),
            truncation=24,
            grid=(0.0, 1.0),
        )
        assert report.exact_match
        assert report.max_abs_dev is not None and report.max_abs_dev <= 1e-4
        payload = json.loads(report.to_json())
        assert payload["exact_match"] is True
        assert payload["m0sq"] == "5/4"
        assert payload["lambda0"] == "1/16"

    def test_irreducible_contrast_keeps_p_in_quartic(self):
        src = irreducible_model_source(2, Fraction(1), Fraction(1))
        result = parse_model(src)
        assert result.ok
        model = validate(result.spec)
        wcp = model.wcp_polynomial()
        quartic_p_terms = [
            (mono, c) for mono, c in wcp.items()
            if sum(e for s, e in mono if s.startswith("p")) >= 2
            and sum(e for s, e in mono) >= 4
        ]
        assert quartic_p_terms, "irreducible quartic should depend on p"
        # and the reducible construction has no p in its quartic part
        red = verify_match(
            RotsymParams(2, Fraction(1), Fraction(1, 2), Fraction(1)), numeric=False)
        assert red.exact_match
