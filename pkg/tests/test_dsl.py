"""Model-language parsing, diagnostics, round-trip, and validation."""

import random
from fractions import Fraction

import pytest

from eqlab import dsl
from eqlab.dsl import (
    Add,
    Gen,
    Lit,
    Mul,
    Neg,
    Pow,
    Ref,
    WickRegion,
    parse_expression,
    parse_model,
    render_model,
    validate,
)
from eqlab.errors import (
    GramNotPositiveDefinite,
    ModelError,
    NonHermitianHamiltonian,
)
from eqlab.operators import Kind

HARMONIC = """\
param hbar = 1
param omega = 1
set pq 1
frame vac : omega*Q[0] + i*P[0]
fiducial vac
shifted pq
truncation 64
H = 1/2*(P[0]^2 + omega^2*Q[0]^2)
"""


def parse_ok(text):
    result = parse_model(text)
    assert result.ok, [d.render() for d in result.diagnostics]
    return result.spec


class TestParse:
    def test_harmonic(self):
        spec = parse_ok(HARMONIC)
        assert spec.operator_sets == (("pq", 1),)
        assert spec.parameters == (("hbar", Fraction(1)), ("omega", Fraction(1)))
        assert spec.fiducial == "vac"
        assert spec.shifted_sets == ("pq",)
        assert spec.truncation_default == 64
        model = validate(spec)
        assert model.hamiltonian is not None

    def test_unclosed_bracket_column(self):
        result = parse_model("param omega = 1\nset pq 1\nH = Q[0\n")
        assert not result.ok
        errs = [d for d in result.diagnostics if d.severity == "error"]
        assert any("']'" in d.message for d in errs)
        d = next(d for d in errs if "']'" in d.message)
        assert (d.line, d.column) == (3, 8)

    def test_unknown_identifier(self):
        result = parse_model("set pq 1\nH = nu*Q[0]^2\n")
        assert not result.ok
        assert any("unknown identifier" in d.message for d in result.diagnostics)

    def test_duplicate_param(self):
        result = parse_model("param a = 1\nparam a = 2\n")
        assert any("duplicate parameter" in d.message for d in result.diagnostics)

    def test_duplicate_hamiltonian(self):
        result = parse_model("set pq 1\nH = Q[0]\nH = P[0]\n")
        assert any("duplicate Hamiltonian" in d.message for d in result.diagnostics)

    def test_mode_out_of_range(self):
        result = parse_model("set pq 2\nH = Q[2]^2\n")
        assert any("out of range" in d.message for d in result.diagnostics)

    def test_second_set_letters_need_declaration(self):
        result = parse_model("set pq 1\nH = S[0]^2\n")
        assert any("second" in d.message for d in result.diagnostics)

    def test_unknown_frame_in_wick(self):
        result = parse_model("set pq 1\nH = :[ Q[0]^2 ]:@nope\n")
        assert any("unknown frame" in d.message for d in result.diagnostics)

    def test_reserved_and_shift_collisions(self):
        assert not parse_model("param i = 1\n").ok
        assert not parse_model("param q0 = 1\n").ok

    def test_multiline_inside_parens(self):
        spec = parse_ok("set pq 1\nH = 1/2*(P[0]^2 +\n  Q[0]^2)\n")
        assert spec.hamiltonian is not None

    def test_recovers_and_reports_multiple_errors(self):
        result = parse_model("param = 3\nset pq 1\nbogus stuff\nH = Q[0]^2\n")
        errs = [d for d in result.diagnostics if d.severity == "error"]
        assert len(errs) >= 2

    def test_diagnostic_render_format(self):
        result = parse_model("junk\n")
        line = result.diagnostics[0].render("file.eqm")
        assert line.startswith("file.eqm:1:1: error:")


class TestPrecedence:
    def golden(self, text):
        spec = parse_ok(f"param a = 1\nparam b = 1\nset pq 1\nH = {text}\n")
        return spec.hamiltonian

    def test_power_over_unary_minus(self):
        # -a^2 parses as -(a^2)
        assert self.golden("-a^2 + Q[0]^2") == Add(
            (Neg(Pow(Ref("a"), 2)), Pow(Gen("pq", 0, Kind.POSITION), 2))
        )

    def test_unary_minus_over_mul(self):
        # -a*b parses as (-a)*b
        assert self.golden("-a*b + Q[0]^2") == Add(
            (Mul((Neg(Ref("a")), Ref("b"))),
             Pow(Gen("pq", 0, Kind.POSITION), 2))
        )

    def test_mul_over_add(self):
        assert self.golden("a*b + a") == Add((Mul((Ref("a"), Ref("b"))), Ref("a")))

    def test_rational_then_power(self):
        # 1/2^2 is (1/2)^2: the rational literal binds first
        assert self.golden("1/2^2") == Pow(Lit(Fraction(1, 2)), 2)


class TestRoundTrip:
    def test_corpus_round_trips(self, corpus):
        assert corpus, "model corpus missing"
        for path in corpus:
            text = path.read_text()
            spec = parse_ok(text)
            rendered = render_model(spec)
            spec2 = parse_ok(rendered)
            assert spec2 == spec, path.name

    def test_round_trip_is_fixed_point(self, corpus):
        for path in corpus:
            spec = parse_ok(path.read_text())
            rendered = render_model(spec)
            assert render_model(parse_ok(rendered)) == rendered


class TestValidate:
    def rotsym_text(self, zeta):
        from eqlab.rotsym import reducible_model_source, RotsymParams
        # bypass RotsymParams range check to probe validation itself
        src = reducible_model_source(
            RotsymParams(1, Fraction(1), Fraction(1, 2), Fraction(1))
        )
        return src.replace("param zeta = 1/2", f"param zeta = {zeta}")

    def test_zeta_inside_range_valid(self):
        model = validate(parse_ok(self.rotsym_text("1/2")))
        assert model.fiducial_frame is not None

    @pytest.mark.parametrize("zeta", ["1", "11/10"])
    def test_zeta_boundary_rejected(self, zeta):
        with pytest.raises(GramNotPositiveDefinite):
            validate(parse_ok(self.rotsym_text(zeta)))

    def test_zeta_nine_tenths_accepted(self):
        validate(parse_ok(self.rotsym_text("9/10")))

    def test_nonhermitian_rejected(self):
        text = "set pq 1\nframe vac : Q[0] + i*P[0]\nfiducial vac\nH = Q[0]*P[0]\n"
        with pytest.raises(NonHermitianHamiltonian):
            validate(parse_ok(text))

    def test_unbound_frame_parameter_rejected(self):
        text = "param omega\nset pq 1\nframe vac : omega*Q[0] + i*P[0]\n" \
               "fiducial vac\nH = Q[0]^2\n"
        with pytest.raises(ModelError):
            validate(parse_ok(text))

    def test_condition_count_must_match_modes(self):
        text = ("set pq 2\nframe vac : Q[0] + i*P[0]\nfiducial vac\n"
                "H = Q[0]^2 + Q[1]^2\n")
        with pytest.raises(ModelError):
            validate(parse_ok(text))

    def test_param_override(self):
        spec = parse_ok(HARMONIC)
        model = validate(spec, param_overrides={"omega": Fraction(2)})
        assert model.parameters["omega"] == 2

    def test_unknown_override_rejected(self):
        spec = parse_ok(HARMONIC)
        with pytest.raises(ModelError):
            validate(spec, param_overrides={"nope": Fraction(1)})

    def test_truncation_override_and_floor(self):
        spec = parse_ok(HARMONIC)
        model = validate(spec, truncation_override=32)
        assert model.truncations[("pq", 0)] == 32
        with pytest.raises(ModelError):
            validate(spec, truncation_override=2)

    def test_wcp_polynomial_matches_direct_route(self):
        from eqlab.frames import wcp_symbolic
        model = validate(parse_ok(HARMONIC))
        assert model.wcp_polynomial() == wcp_symbolic(
            model.hamiltonian, model.fiducial_frame, model.shifted_sets
        )


class TestParseExpression:
    def test_in_model_namespace(self):
        spec = parse_ok(HARMONIC)
        ast, diags = parse_expression("omega*Q[0]^2", spec)
        assert ast == Mul((Ref("omega"), Pow(Gen("pq", 0, Kind.POSITION), 2)))
        assert not diags

    def test_bad_expression_reports(self):
        spec = parse_ok(HARMONIC)
        ast, diags = parse_expression("Q[0] +", spec)
        assert ast is None
        assert diags


class TestFuzzSmoke:
    """Small mutation fuzz; the heavy run lives in the acceptance suite."""

    def test_no_crash_and_in_bounds(self, corpus):
        rng = random.Random(1234)
        sources = [p.read_bytes() for p in corpus]
        for _ in range(500):
            raw = bytearray(rng.choice(sources))
            for _ in range(rng.randrange(1, 6)):
                pos = rng.randrange(len(raw))
                raw[pos] = rng.randrange(256)
            text = raw.decode("utf-8", errors="replace")
            result = parse_model(text)
            lines = text.split("\n")
            for d in result.diagnostics:
                assert 1 <= d.line <= len(lines)
                assert 1 <= d.column <= len(lines[d.line - 1]) + 2
